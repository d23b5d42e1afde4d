//! Test-set error distribution, symmetry audit, the KM baseline comparison
//! and user-study style ΔE scoring.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::colorimetry::{delta_e_ab, xyz_to_linear_rgb, Colorimeter, Lab, Srgb8, DISTINGUISHABLE_DELTA_E};
use crate::dataset::{swap_roles, Corpus, LabelType, MixSample};
use crate::km::{composite_km, invert_km, mix_km, Backings, Channels};
use crate::mixnet::{stack, ModelWeights};
use crate::spectrum::{PigmentId, Quantity, Spectrum, SAMPLES};
use crate::{Error, Result};

/// Histogram bins of width 1 cover `[0, 20)`; larger values overflow.
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleDeltaE {
    pub id: String,
    pub pigment_a: PigmentId,
    pub q_a_ul: u32,
    pub pigment_b: PigmentId,
    pub q_b_ul: u32,
    pub label: LabelType,
    pub swapped: bool,
    pub delta_e: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u32,
    /// `counts[i]` holds `i ≤ ΔE < i + 1`.
    pub counts: Vec<u64>,
    pub overflow: u64,
}

pub fn histogram(delta_es: &[f64]) -> Histogram {
    let mut counts = alloc::vec![0u64; HISTOGRAM_BINS];
    let mut overflow = 0;
    for &d in delta_es {
        if d < HISTOGRAM_BINS as f64 {
            counts[d.max(0.0) as usize] += 1;
        } else {
            overflow += 1;
        }
    }
    Histogram {
        bin_width: 1,
        counts,
        overflow,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    /// Fraction of samples with `ΔE ≤ at`.
    pub at: f64,
    pub fraction: f64,
}

/// CDF at `0, 1, …, 20`, plus a final point at the maximum if it exceeds 20.
pub fn cdf(delta_es: &[f64]) -> Vec<CdfPoint> {
    let n = delta_es.len().max(1) as f64;
    let mut out: Vec<CdfPoint> = (0..=HISTOGRAM_BINS)
        .map(|b| CdfPoint {
            at: b as f64,
            fraction: delta_es.iter().filter(|&&d| d <= b as f64).count() as f64 / n,
        })
        .collect();
    let max = delta_es.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > HISTOGRAM_BINS as f64 {
        out.push(CdfPoint { at: max, fraction: 1.0 });
    }
    out
}

/// Share of values strictly below `threshold`.
pub fn fraction_below(delta_es: &[f64], threshold: f64) -> f64 {
    if delta_es.is_empty() {
        return 0.0;
    }
    delta_es.iter().filter(|&&d| d < threshold).count() as f64 / delta_es.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    if values.is_empty() {
        return Summary {
            count: 0,
            mean: 0.0,
            median: 0.0,
            max: 0.0,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    Summary {
        count: n,
        mean: sorted.iter().sum::<f64>() / n as f64,
        median,
        max: sorted[n - 1],
    }
}

fn predict_all(w: &ModelWeights, samples: &[MixSample]) -> Result<Vec<Spectrum>> {
    let (x, _) = stack(samples);
    let flat = w.forward_batch(&x, samples.len())?;
    flat.chunks_exact(SAMPLES).map(Spectrum::from_slice).collect()
}

/// ΔE*ab between prediction and ground truth for every sample.
pub fn per_sample_delta_e(
    w: &ModelWeights,
    samples: &[MixSample],
    colorimeter: &Colorimeter,
) -> Result<Vec<SampleDeltaE>> {
    let pred = predict_all(w, samples)?;
    Ok(samples
        .iter()
        .zip(&pred)
        .map(|(s, p)| SampleDeltaE {
            id: s.id(),
            pigment_a: s.pigment_a,
            q_a_ul: s.q_a.microliters(),
            pigment_b: s.pigment_b,
            q_b_ul: s.q_b.microliters(),
            label: s.label,
            swapped: s.swapped,
            delta_e: delta_e_ab(colorimeter.lab(p), colorimeter.lab(&s.target)),
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGap {
    pub id: String,
    pub pigment_a: PigmentId,
    pub q_a_ul: u32,
    pub pigment_b: PigmentId,
    pub q_b_ul: u32,
    pub forward: Srgb8,
    pub reversed: Srgb8,
    pub delta_e: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryAudit {
    pub pairs: Vec<SymmetryGap>,
    pub max_delta_e: f64,
    pub mean_delta_e: f64,
    /// Id of the pair with the largest gap.
    pub worst: Option<String>,
}

/// ΔE between `predict(A, B)` and `predict(B, A)` for each non-twin sample
/// whose swap is a different input.
pub fn symmetry_audit(w: &ModelWeights, samples: &[MixSample], colorimeter: &Colorimeter) -> Result<SymmetryAudit> {
    let chosen: Vec<&MixSample> = samples
        .iter()
        .filter(|s| !s.swapped && !(s.pigment_a == s.pigment_b && s.q_a == s.q_b))
        .collect();
    let mut pairs = Vec::with_capacity(chosen.len());
    for s in chosen {
        let fwd = w.forward(&s.features)?;
        let mut f = s.features.clone();
        swap_roles(&mut f);
        let rev = w.forward(&f)?;
        pairs.push(SymmetryGap {
            id: s.id(),
            pigment_a: s.pigment_a,
            q_a_ul: s.q_a.microliters(),
            pigment_b: s.pigment_b,
            q_b_ul: s.q_b.microliters(),
            forward: colorimeter.srgb8(&fwd),
            reversed: colorimeter.srgb8(&rev),
            delta_e: delta_e_ab(colorimeter.lab(&fwd), colorimeter.lab(&rev)),
        });
    }
    let gaps: Vec<f64> = pairs.iter().map(|p| p.delta_e).collect();
    let s = summarize(&gaps);
    let worst = pairs
        .iter()
        .max_by(|a, b| a.delta_e.total_cmp(&b.delta_e))
        .map(|p| p.id.clone());
    Ok(SymmetryAudit {
        pairs,
        max_delta_e: s.max,
        mean_delta_e: s.mean,
        worst,
    })
}

/// Linear sRGB of a reflectance, the three-channel stand-in for spectra.
pub fn linear_rgb(colorimeter: &Colorimeter, r: &Spectrum) -> [f64; 3] {
    xyz_to_linear_rgb(colorimeter.xyz(r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmComparisonConfig {
    pub cases: usize,
    /// Candidate layer thicknesses; the best per case is reported.
    pub thickness_grid: Vec<f64>,
    pub proportions: [f64; 2],
}

impl Default for KmComparisonConfig {
    fn default() -> Self {
        KmComparisonConfig {
            cases: 15,
            thickness_grid: (1..=16).map(|i| i as f64 * 0.25).collect(),
            proportions: [0.5, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmCase {
    pub id: String,
    pub pigment_a: PigmentId,
    pub q_a_ul: u32,
    pub pigment_b: PigmentId,
    pub q_b_ul: u32,
    pub ground_truth: Srgb8,
    pub model: Srgb8,
    pub km: Srgb8,
    pub model_delta_e: f64,
    pub km_delta_e: f64,
    /// Thickness from the grid that minimized the KM error.
    pub km_thickness: f64,
    pub model_wins: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmComparison {
    pub cases: Vec<KmCase>,
    pub model_wins: usize,
    pub skipped: Vec<SkippedCase>,
    pub config: KmComparisonConfig,
}

struct RgbKm {
    colorimeter: Colorimeter,
    substrate: Channels,
    backings: Backings,
}

impl RgbKm {
    fn coefficients(&self, corpus: &Corpus, p: PigmentId) -> Result<crate::km::KmCoefficients> {
        let black = corpus
            .black_backing
            .as_ref()
            .ok_or_else(|| Error::Validation("corpus has no black-backed samples".into()))?;
        let on_black = black.samples.get(&p).ok_or(Error::MissingEntry {
            pigment: p.index(),
            quantity_ml: 0.01,
            role: "Rb",
        })?;
        let on_white = corpus
            .record(p)
            .reflectance(Quantity::from_microliters(10))
            .ok_or(Error::MissingEntry {
                pigment: p.index(),
                quantity_ml: 0.01,
                role: "Rw",
            })?;
        invert_km(
            &Channels::new(linear_rgb(&self.colorimeter, on_white).to_vec())?,
            &Channels::new(linear_rgb(&self.colorimeter, on_black).to_vec())?,
            &self.backings,
        )
    }
}

/// Ground truth vs model vs three-channel KM for Type M test pairs.
///
/// Each pigment is inverted from its 0.01 mL samples over the white and the
/// black paper in linear RGB, mixed at `cfg.proportions`, and composited
/// over the paper at every thickness in `cfg.thickness_grid`; the thickness
/// closest to the ground truth is kept. Pairs whose inversion fails are
/// skipped and listed.
pub fn compare_km(
    w: &ModelWeights,
    corpus: &Corpus,
    test: &[MixSample],
    cfg: &KmComparisonConfig,
    colorimeter: &Colorimeter,
) -> Result<KmComparison> {
    if cfg.thickness_grid.is_empty() || cfg.thickness_grid.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::Validation(
            "thickness grid must be non-empty and non-negative".into(),
        ));
    }
    let black = corpus
        .black_backing
        .as_ref()
        .ok_or_else(|| Error::Validation("corpus has no black-backed samples".into()))?;
    let km = RgbKm {
        colorimeter: colorimeter.clone(),
        substrate: Channels::new(linear_rgb(colorimeter, &corpus.substrate).to_vec())?,
        backings: Backings::Measured {
            white: Channels::new(linear_rgb(colorimeter, &corpus.substrate).to_vec())?,
            black: Channels::new(linear_rgb(colorimeter, &black.paper).to_vec())?,
        },
    };
    let mut cases = Vec::new();
    let mut skipped = Vec::new();
    for s in test.iter().filter(|s| s.label == LabelType::TypeM && !s.swapped) {
        if cases.len() == cfg.cases {
            break;
        }
        let coeffs = match (
            km.coefficients(corpus, s.pigment_a),
            km.coefficients(corpus, s.pigment_b),
        ) {
            (Ok(a), Ok(b)) => [a, b],
            (Err(e), _) | (_, Err(e)) => {
                skipped.push(SkippedCase {
                    id: s.id(),
                    reason: format!("{e}"),
                });
                continue;
            }
        };
        let mixed = mix_km(&coeffs, &cfg.proportions)?;
        let truth = colorimeter.lab(&s.target);
        let mut best: Option<(f64, f64, [f64; 3])> = None;
        for &x in &cfg.thickness_grid {
            let r = composite_km(&mixed, &km.substrate, x)?;
            let rgb = [r.values()[0], r.values()[1], r.values()[2]];
            let d = delta_e_ab(colorimeter.linear_rgb_to_lab(rgb), truth);
            if best.map_or(true, |(bd, _, _)| d < bd) {
                best = Some((d, x, rgb));
            }
        }
        let Some((km_delta_e, km_thickness, km_rgb)) = best else {
            continue;
        };
        let pred = w.forward(&s.features)?;
        let model_delta_e = delta_e_ab(colorimeter.lab(&pred), truth);
        cases.push(KmCase {
            id: s.id(),
            pigment_a: s.pigment_a,
            q_a_ul: s.q_a.microliters(),
            pigment_b: s.pigment_b,
            q_b_ul: s.q_b.microliters(),
            ground_truth: colorimeter.srgb8(&s.target),
            model: colorimeter.srgb8(&pred),
            km: crate::colorimetry::linear_to_srgb8(km_rgb),
            model_delta_e,
            km_delta_e,
            km_thickness,
            model_wins: model_delta_e < km_delta_e,
        });
    }
    Ok(KmComparison {
        model_wins: cases.iter().filter(|c| c.model_wins).count(),
        cases,
        skipped,
        config: cfg.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleDeltaE>,
    pub histogram: Histogram,
    pub cdf: Vec<CdfPoint>,
    pub fraction_below_5: f64,
    pub summary: Summary,
    pub symmetry: SymmetryAudit,
    pub km_comparison: Option<KmComparison>,
}

/// Error distribution and symmetry audit over `test`.
pub fn evaluate(w: &ModelWeights, test: &[MixSample], colorimeter: &Colorimeter) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Validation("empty test set".into()));
    }
    let samples = per_sample_delta_e(w, test, colorimeter)?;
    let des: Vec<f64> = samples.iter().map(|s| s.delta_e).collect();
    Ok(EvalReport {
        histogram: histogram(&des),
        cdf: cdf(&des),
        fraction_below_5: fraction_below(&des, DISTINGUISHABLE_DELTA_E),
        summary: summarize(&des),
        symmetry: symmetry_audit(w, test, colorimeter)?,
        km_comparison: None,
        samples,
    })
}

/// Mean ΔE*ab of a participant's mixtures against their targets.
pub fn task_score(targets: &[Lab], mixtures: &[Lab]) -> Result<f64> {
    if targets.is_empty() || targets.len() != mixtures.len() {
        return Err(Error::Shape(format!(
            "{} targets vs {} mixtures",
            targets.len(),
            mixtures.len()
        )));
    }
    Ok(targets
        .iter()
        .zip(mixtures)
        .map(|(t, m)| delta_e_ab(*t, *m))
        .sum::<f64>()
        / targets.len() as f64)
}

/// Mean of per-participant task scores.
pub fn overall_task_score(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Validation("no scores".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{label_all, split, synthetic_corpus, Normalization, SyntheticConfig};
    use crate::mixnet::NetworkConfig;

    #[test]
    fn histogram_bins_and_overflow() {
        let h = histogram(&[0.0, 0.99, 1.0, 4.999, 5.0, 19.99, 20.0, 300.0]);
        assert_eq!(h.counts[0], 2);
        assert_eq!(h.counts[1], 1);
        assert_eq!(h.counts[4], 1);
        assert_eq!(h.counts[5], 1);
        assert_eq!(h.counts[19], 1);
        assert_eq!(h.overflow, 2);
        assert_eq!(h.counts.iter().sum::<u64>() + h.overflow, 8);
    }

    #[test]
    fn cdf_recomputable_and_ends_at_one() {
        let d = [0.5, 1.0, 2.5, 4.0, 7.0, 25.0];
        let c = cdf(&d);
        for p in &c {
            let want = d.iter().filter(|&&x| x <= p.at).count() as f64 / 6.0;
            assert_eq!(p.fraction, want);
        }
        assert_eq!(c[1].fraction, 2.0 / 6.0);
        assert_eq!(c.last().unwrap().fraction, 1.0);
        assert!(c.windows(2).all(|w| w[0].fraction <= w[1].fraction));
        assert_eq!(fraction_below(&d, 5.0), c[5].fraction);
    }

    #[test]
    fn summary_median() {
        let s = summarize(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!((s.count, s.mean, s.median, s.max), (4, 4.0, 2.5, 10.0));
    }

    #[test]
    fn task_scores() {
        let t = [Lab::new(50.0, 0.0, 0.0), Lab::new(60.0, 0.0, 0.0)];
        let m = [Lab::new(50.0, 3.0, 4.0), Lab::new(60.0, 0.0, 0.0)];
        assert_eq!(task_score(&t, &m).unwrap(), 2.5);
        assert!(task_score(&t, &m[..1]).is_err());
        assert_eq!(overall_task_score(&[13.0, 15.0]).unwrap(), 14.0);
    }

    fn small_setup() -> (Corpus, crate::dataset::DatasetSplit, ModelWeights) {
        let corpus = synthetic_corpus(&SyntheticConfig::default()).unwrap();
        let all = label_all(&corpus, &Normalization::default()).unwrap();
        let sp = split(&all, 1);
        let w = ModelWeights::init(NetworkConfig {
            layer_sizes: alloc::vec![207, 8, 41],
            ..NetworkConfig::default()
        })
        .unwrap();
        (corpus, sp, w)
    }

    #[test]
    fn evaluate_report_is_consistent() {
        let (_, sp, w) = small_setup();
        let c = Colorimeter::standard();
        let r = evaluate(&w, &sp.test, &c).unwrap();
        assert_eq!(r.samples.len(), 488);
        assert_eq!(r.histogram.counts.iter().sum::<u64>() + r.histogram.overflow, 488);
        let des: Vec<f64> = r.samples.iter().map(|s| s.delta_e).collect();
        assert_eq!(r.fraction_below_5, fraction_below(&des, 5.0));
        // Non-twin samples minus same-pigment equal-quantity Type I pairs.
        assert!(r.symmetry.pairs.len() <= 244 && !r.symmetry.pairs.is_empty());
        assert!(r.symmetry.pairs.iter().all(|p| p.delta_e <= r.symmetry.max_delta_e));
    }

    #[test]
    fn symmetric_model_has_zero_gap() {
        let (_, sp, mut w) = small_setup();
        w.params.fill(0.0);
        let a = symmetry_audit(&w, &sp.test, &Colorimeter::standard()).unwrap();
        assert_eq!(a.max_delta_e, 0.0);
    }

    #[test]
    fn km_comparison_structure() {
        let (corpus, sp, w) = small_setup();
        let r = compare_km(
            &w,
            &corpus,
            &sp.test,
            &KmComparisonConfig::default(),
            &Colorimeter::standard(),
        )
        .unwrap();
        assert_eq!(r.cases.len(), 15, "{:?}", r.skipped);
        for c in &r.cases {
            assert!(c.model_delta_e >= 0.0 && c.km_delta_e >= 0.0);
            assert_eq!(c.model_wins, c.model_delta_e < c.km_delta_e);
            assert!(c.km_thickness >= 0.25 && c.km_thickness <= 4.0);
        }
        assert_eq!(r.model_wins, r.cases.iter().filter(|c| c.model_wins).count());
    }

    #[test]
    fn km_comparison_needs_black_backing() {
        let (mut corpus, sp, w) = small_setup();
        corpus.black_backing = None;
        assert!(compare_km(
            &w,
            &corpus,
            &sp.test,
            &KmComparisonConfig::default(),
            &Colorimeter::standard()
        )
        .is_err());
    }
}
