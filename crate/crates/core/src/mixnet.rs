//! Feedforward mixture-prediction network.
//!
//! Maps the 207 mixture features to a 41-sample reflectance. Hidden layers
//! use the logistic sigmoid; training minimizes
//!
//! ```text
//! Σ|y − ŷ| / Σ|y|  +  α/m Σ|y − ŷ|  +  β/m Σ(ŷ − μ)²  +  λ₁Σ|W| + λ₂ΣW²
//! ```
//!
//! with Adam. `|·|` uses the subgradient `sign(0) = 0`. Biases are not
//! regularized.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{pack_features, Ingredient, MixSample, Normalization, FEATURE_COUNT};
use crate::math;
use crate::spectrum::{interpolate_quantity, PigmentId, PigmentRecord, Quantity, Spectrum, SAMPLES};
use crate::{Error, Result};

/// Layer widths of the 15-hidden-layer reference architecture.
pub const REFERENCE_LAYER_SIZES: [usize; 17] = [
    FEATURE_COUNT,
    100,
    90,
    90,
    80,
    80,
    70,
    70,
    60,
    60,
    60,
    60,
    50,
    50,
    50,
    50,
    SAMPLES,
];

/// Default desk-scale architecture.
pub const DESK_LAYER_SIZES: [usize; 4] = [FEATURE_COUNT, 128, 128, SAMPLES];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Sigmoid,
    Linear,
}

/// What `μ` in the spread term averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMean {
    /// One scalar: the mean of every target value in the batch.
    Batch,
    /// The mean of each sample's own 41 targets.
    PerSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `U(−√(6/(fan_in + fan_out)), +…)`, zero biases.
    GlorotUniform,
    /// `U(−√(3/fan_in), +…)`, zero biases.
    LecunUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// Missing fields in serialized form take their [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub output_activation: OutputActivation,
    pub learning_rate: f64,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub alpha: f64,
    pub beta: f64,
    pub target_mean: TargetMean,
    pub epochs: u64,
    /// Rows per step; 0 means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub init: InitScheme,
    pub adam: AdamParams,
    pub normalization: Normalization,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            layer_sizes: DESK_LAYER_SIZES.to_vec(),
            output_activation: OutputActivation::Sigmoid,
            learning_rate: 0.001,
            l1_weight: 0.000015,
            l2_weight: 0.000003,
            alpha: 3.0,
            beta: 2.0,
            target_mean: TargetMean::Batch,
            epochs: 20_000,
            batch_size: 0,
            seed: 1,
            init: InitScheme::LecunUniform,
            adam: AdamParams::default(),
            normalization: Normalization::default(),
        }
    }
}

impl NetworkConfig {
    /// The reference architecture and hyperparameters.
    pub fn reference() -> Self {
        NetworkConfig {
            layer_sizes: REFERENCE_LAYER_SIZES.to_vec(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.layer_sizes.len();
        if n < 2 || self.layer_sizes[0] != FEATURE_COUNT || self.layer_sizes[n - 1] != SAMPLES {
            return Err(Error::Validation(format!(
                "layer sizes must run from {FEATURE_COUNT} to {SAMPLES}"
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Validation("empty layer".into()));
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("quantity_scale_ml", self.normalization.quantity_scale_ml),
            ("adam.epsilon", self.adam.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("l1_weight", self.l1_weight), ("l2_weight", self.l2_weight)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation(format!("{name} must be non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Validation("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn layer_offsets(&self) -> Vec<LayerSpan> {
        let mut out = Vec::with_capacity(self.layer_sizes.len() - 1);
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            out.push(LayerSpan {
                fan_in,
                fan_out,
                weights: off,
                bias: off + fan_in * fan_out,
            });
            off += fan_in * fan_out + fan_out;
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// Location of one layer inside the flat parameter vector. Weights are
/// `fan_out × fan_in`, row-major, followed by `fan_out` biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpan {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

impl LayerSpan {
    fn weight_range(&self) -> core::ops::Range<usize> {
        self.weights..self.weights + self.fan_in * self.fan_out
    }
    fn bias_range(&self) -> core::ops::Range<usize> {
        self.bias..self.bias + self.fan_out
    }
}

/// Network parameters plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights {
    pub config: NetworkConfig,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub step: u64,
}

impl ModelWeights {
    /// Seeded initialization according to `config.init`.
    pub fn init(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = config.parameter_count();
        let mut params = vec![0.0; n];
        for span in config.layer_offsets() {
            let limit = match config.init {
                InitScheme::GlorotUniform => math::sqrt(6.0 / (span.fan_in + span.fan_out) as f64),
                InitScheme::LecunUniform => math::sqrt(3.0 / span.fan_in as f64),
            };
            for p in &mut params[span.weight_range()] {
                *p = rng.random_range(-limit..limit);
            }
        }
        Ok(ModelWeights {
            config,
            params,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step: 0,
        })
    }

    /// All-zero parameters.
    pub fn zeros(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let n = config.parameter_count();
        Ok(ModelWeights {
            config,
            params: vec![0.0; n],
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step: 0,
        })
    }

    /// Check shapes and finiteness, e.g. after loading from disk.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let n = self.config.parameter_count();
        if self.params.len() != n || self.adam_m.len() != n || self.adam_v.len() != n {
            return Err(Error::Shape(format!(
                "expected {n} parameters, found {}/{}/{}",
                self.params.len(),
                self.adam_m.len(),
                self.adam_v.len()
            )));
        }
        if self
            .params
            .iter()
            .chain(&self.adam_m)
            .chain(&self.adam_v)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Validation("non-finite model parameter".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> Vec<LayerSpan> {
        self.config.layer_offsets()
    }

    /// Predict one reflectance spectrum.
    pub fn forward(&self, features: &[f64]) -> Result<Spectrum> {
        if features.len() != FEATURE_COUNT {
            return Err(Error::Shape(format!(
                "{} features, expected {FEATURE_COUNT}",
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature".into()));
        }
        let out = self.forward_batch(features, 1)?;
        Spectrum::from_slice(&out)
    }

    /// Predict `m` rows at once; `inputs` is `m × 207` row-major, the
    /// result `m × 41`.
    pub fn forward_batch(&self, inputs: &[f64], m: usize) -> Result<Vec<f64>> {
        if inputs.len() != m * FEATURE_COUNT {
            return Err(Error::Shape(format!(
                "{} inputs for {m} rows of {FEATURE_COUNT}",
                inputs.len()
            )));
        }
        let mut acts = Activations::default();
        forward_into(self, inputs, m, &mut acts);
        Ok(acts.values.pop().unwrap_or_default())
    }
}

#[derive(Default)]
struct Activations {
    /// `values[0]` is the input, `values[l]` the output of layer `l`.
    values: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: every caller passes slices that cover the strided extents
    // (checked by the debug assertions below); `c` does not alias `a`/`b`.
    debug_assert!(k == 0 || a.len() > (m - 1) * rsa as usize + (k - 1) * csa as usize);
    debug_assert!(c.len() > (m - 1) * rsc as usize + (n - 1) * csc as usize);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

fn forward_into(w: &ModelWeights, inputs: &[f64], m: usize, acts: &mut Activations) {
    let spans = w.config.layer_offsets();
    acts.values.clear();
    acts.values.push(inputs.to_vec());
    let last = spans.len() - 1;
    for (l, span) in spans.iter().enumerate() {
        let mut z = vec![0.0; m * span.fan_out];
        let bias = &w.params[span.bias_range()];
        for row in z.chunks_exact_mut(span.fan_out) {
            row.copy_from_slice(bias);
        }
        // Z (m×out) += A (m×in) · Wᵀ (in×out)
        gemm(
            m,
            span.fan_in,
            span.fan_out,
            &acts.values[l],
            span.fan_in as isize,
            1,
            &w.params[span.weight_range()],
            1,
            span.fan_in as isize,
            1.0,
            &mut z,
            span.fan_out as isize,
            1,
        );
        if l < last || w.config.output_activation == OutputActivation::Sigmoid {
            for v in &mut z {
                *v = math::sigmoid(*v);
            }
        }
        acts.values.push(z);
    }
}

/// The loss split into its terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// `Σ|y − ŷ| / Σ|y|`
    pub relative_deviation: f64,
    /// `α/m Σ|y − ŷ|`
    pub absolute_error: f64,
    /// `β/m Σ(ŷ − μ)²`
    pub spread: f64,
    /// `λ₁Σ|W| + λ₂ΣW²`
    pub regularization: f64,
    pub total: f64,
}

/// Data terms of the loss and, optionally, `∂L/∂ŷ`.
fn data_loss(
    cfg: &NetworkConfig,
    predictions: &[f64],
    targets: &[f64],
    m: usize,
    mut grad: Option<&mut [f64]>,
) -> Result<LossBreakdown> {
    if m == 0 || predictions.len() != m * SAMPLES || targets.len() != m * SAMPLES {
        return Err(Error::Shape(format!(
            "loss needs m >= 1 rows of {SAMPLES}; got {} predictions, {} targets, m = {m}",
            predictions.len(),
            targets.len()
        )));
    }
    let denom: f64 = targets.iter().map(|y| math::abs(*y)).sum();
    if denom == 0.0 {
        return Err(Error::DivisionByZero("sum of |targets| is zero"));
    }
    let batch_mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let mf = m as f64;
    let (mut abs_sum, mut sq_sum) = (0.0, 0.0);
    for i in 0..m {
        let row = i * SAMPLES..(i + 1) * SAMPLES;
        let mu = match cfg.target_mean {
            TargetMean::Batch => batch_mean,
            TargetMean::PerSample => targets[row.clone()].iter().sum::<f64>() / SAMPLES as f64,
        };
        for j in row {
            let r = predictions[j] - targets[j];
            let d = predictions[j] - mu;
            abs_sum += math::abs(r);
            sq_sum += d * d;
            if let Some(g) = grad.as_deref_mut() {
                g[j] = math::sign(r) * (1.0 / denom + cfg.alpha / mf) + 2.0 * cfg.beta / mf * d;
            }
        }
    }
    let relative_deviation = abs_sum / denom;
    let absolute_error = cfg.alpha / mf * abs_sum;
    let spread = cfg.beta / mf * sq_sum;
    Ok(LossBreakdown {
        relative_deviation,
        absolute_error,
        spread,
        regularization: 0.0,
        total: relative_deviation + absolute_error + spread,
    })
}

fn regularization(w: &ModelWeights, mut grad: Option<&mut [f64]>) -> f64 {
    let (l1, l2) = (w.config.l1_weight, w.config.l2_weight);
    let mut total = 0.0;
    for span in w.layers() {
        for i in span.weight_range() {
            let p = w.params[i];
            total += l1 * math::abs(p) + l2 * p * p;
            if let Some(g) = grad.as_deref_mut() {
                g[i] += l1 * math::sign(p) + 2.0 * l2 * p;
            }
        }
    }
    total
}

/// Full loss of predictions against targets under `w`'s hyperparameters.
pub fn loss(predictions: &[Spectrum], targets: &[Spectrum], w: &ModelWeights) -> Result<LossBreakdown> {
    if predictions.len() != targets.len() {
        return Err(Error::Shape("prediction and target counts differ".into()));
    }
    let flat = |s: &[Spectrum]| s.iter().flat_map(|x| x.values().iter().copied()).collect::<Vec<_>>();
    let mut b = data_loss(&w.config, &flat(predictions), &flat(targets), targets.len(), None)?;
    b.regularization = regularization(w, None);
    b.total += b.regularization;
    Ok(b)
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_and_gradient(
    w: &ModelWeights,
    inputs: &[f64],
    targets: &[f64],
    m: usize,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let mut grad = vec![0.0; w.params.len()];
    let mut acts = Activations::default();
    let b = backprop(w, inputs, targets, m, &mut acts, &mut grad)?;
    Ok((b, grad))
}

fn backprop(
    w: &ModelWeights,
    inputs: &[f64],
    targets: &[f64],
    m: usize,
    acts: &mut Activations,
    grad: &mut [f64],
) -> Result<LossBreakdown> {
    if inputs.len() != m * FEATURE_COUNT {
        return Err(Error::Shape("input rows do not match batch size".into()));
    }
    forward_into(w, inputs, m, acts);
    let spans = w.layers();
    let last = spans.len() - 1;
    let mut delta = vec![0.0; m * SAMPLES];
    let mut b = data_loss(&w.config, &acts.values[last + 1], targets, m, Some(&mut delta))?;
    grad.fill(0.0);
    if w.config.output_activation == OutputActivation::Sigmoid {
        for (d, a) in delta.iter_mut().zip(&acts.values[last + 1]) {
            *d *= a * (1.0 - a);
        }
    }
    for l in (0..=last).rev() {
        let span = spans[l];
        let a_prev = &acts.values[l];
        // ∂W (out×in) = δᵀ (out×m) · A_prev (m×in)
        gemm(
            span.fan_out,
            m,
            span.fan_in,
            &delta,
            1,
            span.fan_out as isize,
            a_prev,
            span.fan_in as isize,
            1,
            0.0,
            &mut grad[span.weight_range()],
            span.fan_in as isize,
            1,
        );
        let gb = &mut grad[span.bias_range()];
        for row in delta.chunks_exact(span.fan_out) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if l > 0 {
            // δ_prev (m×in) = δ (m×out) · W (out×in), then ⊙ σ'
            let mut prev = vec![0.0; m * span.fan_in];
            gemm(
                m,
                span.fan_out,
                span.fan_in,
                &delta,
                span.fan_out as isize,
                1,
                &w.params[span.weight_range()],
                span.fan_in as isize,
                1,
                0.0,
                &mut prev,
                span.fan_in as isize,
                1,
            );
            for (d, a) in prev.iter_mut().zip(a_prev) {
                *d *= a * (1.0 - a);
            }
            delta = prev;
        }
    }
    b.regularization = regularization(w, Some(grad));
    b.total += b.regularization;
    Ok(b)
}

fn adam_step(w: &mut ModelWeights, grad: &[f64]) {
    let AdamParams { beta1, beta2, epsilon } = w.config.adam;
    w.step += 1;
    let t = w.step as f64;
    let lr_t = w.config.learning_rate * math::sqrt(1.0 - math::powf(beta2, t)) / (1.0 - math::powf(beta1, t));
    for (((p, m), v), g) in w
        .params
        .iter_mut()
        .zip(w.adam_m.iter_mut())
        .zip(w.adam_v.iter_mut())
        .zip(grad)
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        *p -= lr_t * *m / (math::sqrt(*v) + epsilon);
    }
}

/// Hooks called by [`train`].
pub trait TrainObserver {
    /// Called after every epoch with that epoch's mean step loss.
    fn epoch_end(&mut self, _epoch: u64, _loss: f64, _weights: &ModelWeights) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl TrainObserver for () {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs_run: u64,
    pub steps: u64,
    pub loss_curve: Vec<f64>,
    pub final_loss: Option<f64>,
    pub stopped_early: bool,
    /// Filled in by callers that have a clock.
    pub wall_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trained {
    pub weights: ModelWeights,
    pub report: TrainingReport,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Core(#[from] Error),
    /// The loss became non-finite; the weights from the end of the last
    /// finite epoch are kept.
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged {
        epoch: u64,
        last_good: Box<ModelWeights>,
        report: TrainingReport,
    },
}

/// Stack inputs and targets of samples into row-major matrices.
pub fn stack(samples: &[MixSample]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(samples.len() * FEATURE_COUNT);
    let mut y = Vec::with_capacity(samples.len() * SAMPLES);
    for s in samples {
        x.extend_from_slice(&s.features);
        y.extend_from_slice(s.target.as_slice());
    }
    (x, y)
}

/// Train for `weights.config.epochs` epochs with Adam.
///
/// Deterministic for a given config, seed and sample order. Mini-batches are
/// drawn from a seeded shuffle each epoch.
pub fn train(
    mut weights: ModelWeights,
    samples: &[MixSample],
    observer: &mut dyn TrainObserver,
) -> core::result::Result<Trained, TrainError> {
    weights.validate()?;
    if samples.is_empty() {
        return Err(Error::Validation("empty training set".into()).into());
    }
    let cfg = weights.config.clone();
    let n = samples.len();
    let batch = if cfg.batch_size == 0 || cfg.batch_size >= n {
        n
    } else {
        cfg.batch_size
    };
    if samples
        .iter()
        .any(|s| s.features.len() != FEATURE_COUNT || s.features.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Validation("training features must be 207 finite values".into()).into());
    }
    let (x_all, y_all) = stack(samples);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5348_5546));
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; weights.params.len()];
    let mut acts = Activations::default();
    let mut xb = Vec::with_capacity(batch * FEATURE_COUNT);
    let mut yb = Vec::with_capacity(batch * SAMPLES);
    let mut report = TrainingReport {
        epochs_run: 0,
        steps: 0,
        loss_curve: Vec::with_capacity(cfg.epochs.min(1 << 20) as usize),
        final_loss: None,
        stopped_early: false,
        wall_time_s: None,
    };
    let mut last_good = weights.clone();

    for epoch in 1..=cfg.epochs {
        if batch < n {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(batch) {
            let (x, y): (&[f64], &[f64]) = if batch == n {
                (&x_all, &y_all)
            } else {
                xb.clear();
                yb.clear();
                for &i in chunk {
                    xb.extend_from_slice(&x_all[i * FEATURE_COUNT..(i + 1) * FEATURE_COUNT]);
                    yb.extend_from_slice(&y_all[i * SAMPLES..(i + 1) * SAMPLES]);
                }
                (&xb, &yb)
            };
            let b = backprop(&weights, x, y, chunk.len(), &mut acts, &mut grad)?;
            if !b.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::Diverged {
                    epoch,
                    last_good: Box::new(last_good),
                    report,
                });
            }
            adam_step(&mut weights, &grad);
            epoch_loss += b.total;
            steps += 1;
        }
        if weights.params.iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged {
                epoch,
                last_good: Box::new(last_good),
                report,
            });
        }
        let mean = epoch_loss / steps as f64;
        report.epochs_run = epoch;
        report.steps += steps;
        report.loss_curve.push(mean);
        report.final_loss = Some(mean);
        last_good.clone_from(&weights);
        if observer.epoch_end(epoch, mean, &weights).is_break() {
            report.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    Ok(Trained { weights, report })
}

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    /// Parameter index where the maximum occurred.
    pub worst_parameter: usize,
    pub compared: usize,
    /// Coordinates skipped because a perturbation crossed a `|·|` kink.
    pub excluded: usize,
}

/// Denominator floor for relative errors of near-zero gradients.
pub const GRADIENT_CHECK_FLOOR: f64 = 1e-6;

/// Central differences with step `h` against backpropagation over every
/// parameter. Coordinates whose `±h` perturbation changes the sign pattern
/// of any residual, or moves a regularized weight across zero, are excluded.
pub fn gradient_check(w: &ModelWeights, inputs: &[f64], targets: &[f64], m: usize, h: f64) -> Result<GradientCheck> {
    let (_, analytic) = loss_and_gradient(w, inputs, targets, m)?;
    let weight_mask = {
        let mut mask = vec![false; w.params.len()];
        for span in w.layers() {
            for i in span.weight_range() {
                mask[i] = true;
            }
        }
        mask
    };
    let eval = |probe: &ModelWeights| -> Result<(f64, Vec<i8>)> {
        let pred = probe.forward_batch(inputs, m)?;
        let mut b = data_loss(&probe.config, &pred, targets, m, None)?;
        b.total += regularization(probe, None);
        let signs = pred.iter().zip(targets).map(|(p, y)| math::sign(p - y) as i8).collect();
        Ok((b.total, signs))
    };
    let mut probe = w.clone();
    let mut out = GradientCheck {
        max_relative_error: 0.0,
        worst_parameter: 0,
        compared: 0,
        excluded: 0,
    };
    for i in 0..w.params.len() {
        let p = w.params[i];
        if weight_mask[i] && w.config.l1_weight > 0.0 && math::abs(p) <= h {
            out.excluded += 1;
            continue;
        }
        probe.params[i] = p + h;
        let (lp, sp) = eval(&probe)?;
        probe.params[i] = p - h;
        let (lm, sm) = eval(&probe)?;
        probe.params[i] = p;
        if sp != sm || sp.contains(&0) {
            out.excluded += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * h);
        let a = analytic[i];
        let denom = math::abs(a).max(math::abs(numeric)).max(GRADIENT_CHECK_FLOOR);
        let rel = math::abs(a - numeric) / denom;
        out.compared += 1;
        if rel > out.max_relative_error {
            out.max_relative_error = rel;
            out.worst_parameter = i;
        }
    }
    Ok(out)
}

fn find_record(records: &[PigmentRecord], id: PigmentId) -> Result<&PigmentRecord> {
    records
        .iter()
        .find(|r| r.id == id)
        .ok_or_else(|| Error::Validation(format!("no record for pigment {}", id.index())))
}

/// Predicted reflectance of `qa` of pigment `pa` mixed with `qb` of `pb`,
/// coated on `substrate`. Quantities must be on the 0.002 mL grid.
pub fn predict_mixture(
    w: &ModelWeights,
    records: &[PigmentRecord],
    substrate: &Spectrum,
    pa: PigmentId,
    qa: Quantity,
    pb: PigmentId,
    qb: Quantity,
) -> Result<Spectrum> {
    let (ra, ta) = interpolate_quantity(find_record(records, pa)?, qa)?;
    let (rb, tb) = interpolate_quantity(find_record(records, pb)?, qb)?;
    let f = pack_features(
        Ingredient {
            transmittance: &ta,
            reflectance: &ra,
            quantity: qa,
        },
        Ingredient {
            transmittance: &tb,
            reflectance: &rb,
            quantity: qb,
        },
        substrate,
        &w.config.normalization,
    );
    w.forward(&f)
}
