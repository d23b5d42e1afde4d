//! Labeled mixture samples, the stratified train/test split with swap
//! doubling, and the synthetic Kubelka–Munk corpus generator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::km::{self, Channels, KmCoefficients};
use crate::math;
use crate::spectrum::{
    interpolate_quantity, PigmentId, PigmentRecord, Quantity, Spectrum, CANONICAL_QUANTITIES_UL, PIGMENT_COUNT, SAMPLES,
};
use crate::{Error, Result};

/// Input width of the mixture network.
pub const FEATURE_COUNT: usize = 5 * SAMPLES + 2;

/// Offsets of the feature blocks: `[T_A | Rw_A | T_B | Rw_B | Rw | q_A | q_B]`.
pub mod layout {
    use crate::spectrum::SAMPLES;
    pub const T_A: usize = 0;
    pub const RW_A: usize = SAMPLES;
    pub const T_B: usize = 2 * SAMPLES;
    pub const RW_B: usize = 3 * SAMPLES;
    pub const SUBSTRATE: usize = 4 * SAMPLES;
    pub const Q_A: usize = 5 * SAMPLES;
    pub const Q_B: usize = 5 * SAMPLES + 1;
}

/// Feature scaling. Spectra are used as fractions; quantities are divided
/// by `quantity_scale_ml`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub quantity_scale_ml: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            quantity_scale_ml: 0.16,
        }
    }
}

/// The spectra and quantity of one mixing ingredient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ingredient<'a> {
    pub transmittance: &'a Spectrum,
    pub reflectance: &'a Spectrum,
    pub quantity: Quantity,
}

pub fn pack_features(
    a: Ingredient<'_>,
    b: Ingredient<'_>,
    substrate: &Spectrum,
    norm: &Normalization,
) -> [f64; FEATURE_COUNT] {
    let mut f = [0.0; FEATURE_COUNT];
    write_features(&mut f, a, b, substrate, norm);
    f
}

/// [`pack_features`] into a caller-provided row.
pub fn write_features(f: &mut [f64], a: Ingredient<'_>, b: Ingredient<'_>, substrate: &Spectrum, norm: &Normalization) {
    use layout::*;
    f[T_A..T_A + SAMPLES].copy_from_slice(a.transmittance.as_slice());
    f[RW_A..RW_A + SAMPLES].copy_from_slice(a.reflectance.as_slice());
    f[T_B..T_B + SAMPLES].copy_from_slice(b.transmittance.as_slice());
    f[RW_B..RW_B + SAMPLES].copy_from_slice(b.reflectance.as_slice());
    f[SUBSTRATE..SUBSTRATE + SAMPLES].copy_from_slice(substrate.as_slice());
    f[Q_A] = a.quantity.ml() / norm.quantity_scale_ml;
    f[Q_B] = b.quantity.ml() / norm.quantity_scale_ml;
}

/// Spectra and quantities (in mL) recovered from a feature row.
#[derive(Clone, Debug, PartialEq)]
pub struct UnpackedFeatures {
    pub t_a: Spectrum,
    pub rw_a: Spectrum,
    pub t_b: Spectrum,
    pub rw_b: Spectrum,
    pub substrate: Spectrum,
    pub q_a_ml: f64,
    pub q_b_ml: f64,
}

pub fn unpack_features(f: &[f64], norm: &Normalization) -> Result<UnpackedFeatures> {
    use layout::*;
    if f.len() != FEATURE_COUNT {
        return Err(Error::Shape(format!("{} features, expected {FEATURE_COUNT}", f.len())));
    }
    let block = |o: usize| Spectrum::from_slice(&f[o..o + SAMPLES]);
    Ok(UnpackedFeatures {
        t_a: block(T_A)?,
        rw_a: block(RW_A)?,
        t_b: block(T_B)?,
        rw_b: block(RW_B)?,
        substrate: block(SUBSTRATE)?,
        q_a_ml: f[Q_A] * norm.quantity_scale_ml,
        q_b_ml: f[Q_B] * norm.quantity_scale_ml,
    })
}

/// Swap the A and B roles of a feature row in place.
pub fn swap_roles(f: &mut [f64]) {
    use layout::*;
    for k in 0..SAMPLES {
        f.swap(T_A + k, T_B + k);
        f.swap(RW_A + k, RW_B + k);
    }
    f.swap(Q_A, Q_B);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LabelType {
    /// A pigment added to itself; the target is the thicker single-pigment sample.
    TypeI,
    /// Two different pigments mixed at 1:1, 1:2 or 2:1.
    TypeM,
}

/// One labeled example.
#[derive(Clone, Debug, PartialEq)]
pub struct MixSample {
    pub pigment_a: PigmentId,
    pub pigment_b: PigmentId,
    pub q_a: Quantity,
    pub q_b: Quantity,
    pub features: Vec<f64>,
    pub target: Spectrum,
    pub label: LabelType,
    /// True for the B+A twin created when doubling.
    pub swapped: bool,
}

impl MixSample {
    /// Stable identifier, e.g. `M-01-08-020-010` or `I-03-010-020/BA`.
    pub fn id(&self) -> String {
        let kind = match self.label {
            LabelType::TypeI => 'I',
            LabelType::TypeM => 'M',
        };
        let (pa, pb, qa, qb) = if self.swapped {
            (self.pigment_b, self.pigment_a, self.q_b, self.q_a)
        } else {
            (self.pigment_a, self.pigment_b, self.q_a, self.q_b)
        };
        let mut id = format!(
            "{kind}-{:02}-{:02}-{:03}-{:03}",
            pa.index(),
            pb.index(),
            qa.microliters(),
            qb.microliters()
        );
        if self.swapped {
            id.push_str("/BA");
        }
        id
    }

    /// The same mixture with the A and B roles exchanged.
    pub fn swapped_twin(&self) -> MixSample {
        let mut features = self.features.clone();
        swap_roles(&mut features);
        MixSample {
            pigment_a: self.pigment_b,
            pigment_b: self.pigment_a,
            q_a: self.q_b,
            q_b: self.q_a,
            features,
            target: self.target,
            label: self.label,
            swapped: !self.swapped,
        }
    }
}

/// Key of a two-pigment mixture ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MixKey {
    pub pigment_a: PigmentId,
    pub pigment_b: PigmentId,
    pub q_a: Quantity,
    pub q_b: Quantity,
}

/// Measurements of a palette: 13 pigment records on one white paper, the
/// measured two-pigment mixtures, and optionally the 0.01 mL black-backed
/// samples used by the Kubelka–Munk comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub records: Vec<PigmentRecord>,
    pub substrate: Spectrum,
    pub mixtures: BTreeMap<MixKey, Spectrum>,
    pub black_backing: Option<BlackBacked>,
}

/// Reflectance of the black paper and of each pigment at 0.01 mL on it.
#[derive(Clone, Debug, PartialEq)]
pub struct BlackBacked {
    pub paper: Spectrum,
    pub samples: BTreeMap<PigmentId, Spectrum>,
}

impl Corpus {
    pub fn new(
        mut records: Vec<PigmentRecord>,
        substrate: Spectrum,
        mixtures: BTreeMap<MixKey, Spectrum>,
        black_backing: Option<BlackBacked>,
    ) -> Result<Self> {
        records.sort_by_key(|r| r.id);
        for w in records.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Validation(format!("pigment {} appears twice", w[0].id.index())));
            }
        }
        if records.len() != PIGMENT_COUNT {
            return Err(Error::Validation(format!(
                "expected {PIGMENT_COUNT} pigment records, found {}",
                records.len()
            )));
        }
        Ok(Corpus {
            records,
            substrate,
            mixtures,
            black_backing,
        })
    }

    pub fn record(&self, id: PigmentId) -> &PigmentRecord {
        &self.records[id.ordinal()]
    }
}

fn sample_from(
    corpus: &Corpus,
    key: MixKey,
    target: Spectrum,
    label: LabelType,
    norm: &Normalization,
) -> Result<MixSample> {
    let (ra, ta) = interpolate_quantity(corpus.record(key.pigment_a), key.q_a)?;
    let (rb, tb) = interpolate_quantity(corpus.record(key.pigment_b), key.q_b)?;
    let features = pack_features(
        Ingredient {
            transmittance: &ta,
            reflectance: &ra,
            quantity: key.q_a,
        },
        Ingredient {
            transmittance: &tb,
            reflectance: &rb,
            quantity: key.q_b,
        },
        &corpus.substrate,
        norm,
    );
    Ok(MixSample {
        pigment_a: key.pigment_a,
        pigment_b: key.pigment_b,
        q_a: key.q_a,
        q_b: key.q_b,
        features: features.to_vec(),
        target,
        label,
        swapped: false,
    })
}

/// Unordered canonical quantity pairs whose sum is also canonical.
pub fn type_i_quantity_pairs() -> Vec<(Quantity, Quantity)> {
    let mut out = Vec::new();
    for (i, &a) in CANONICAL_QUANTITIES_UL.iter().enumerate() {
        for &b in &CANONICAL_QUANTITIES_UL[i..] {
            if CANONICAL_QUANTITIES_UL.contains(&(a + b)) {
                out.push((Quantity::from_microliters(a), Quantity::from_microliters(b)));
            }
        }
    }
    out
}

/// Type I samples: 34 quantity pairs per pigment, 442 in total.
pub fn label_type_i(corpus: &Corpus, norm: &Normalization) -> Result<Vec<MixSample>> {
    let pairs = type_i_quantity_pairs();
    let mut out = Vec::with_capacity(pairs.len() * corpus.records.len());
    for rec in &corpus.records {
        for &(qa, qb) in &pairs {
            let total = Quantity::from_microliters(qa.microliters() + qb.microliters());
            let target = *rec.reflectance(total).expect("sum is canonical");
            let key = MixKey {
                pigment_a: rec.id,
                pigment_b: rec.id,
                q_a: qa,
                q_b: qb,
            };
            out.push(sample_from(corpus, key, target, LabelType::TypeI, norm)?);
        }
    }
    Ok(out)
}

/// The ten Type M quantity pairs in µL (1:1, 1:2 and 2:1 at several totals).
pub const TYPE_M_QUANTITY_PAIRS_UL: [(u32, u32); 10] = [
    (10, 10),
    (20, 20),
    (40, 40),
    (80, 80),
    (10, 20),
    (20, 40),
    (40, 80),
    (20, 10),
    (40, 20),
    (80, 40),
];

/// Every Type M key: 78 unordered pigment pairs × 10 quantity pairs.
pub fn type_m_keys() -> Vec<MixKey> {
    let mut out = Vec::with_capacity(780);
    for a in PigmentId::all() {
        for b in PigmentId::all().filter(|b| *b > a) {
            for &(qa, qb) in &TYPE_M_QUANTITY_PAIRS_UL {
                out.push(MixKey {
                    pigment_a: a,
                    pigment_b: b,
                    q_a: Quantity::from_microliters(qa),
                    q_b: Quantity::from_microliters(qb),
                });
            }
        }
    }
    out
}

/// Type M samples (780) from the corpus' mixture ground truths.
pub fn label_type_m(corpus: &Corpus, norm: &Normalization) -> Result<Vec<MixSample>> {
    type_m_keys()
        .into_iter()
        .map(|key| {
            let target = *corpus.mixtures.get(&key).ok_or(Error::MissingMixture {
                pigment_a: key.pigment_a.index(),
                pigment_b: key.pigment_b.index(),
                q_a_ml: key.q_a.ml(),
                q_b_ml: key.q_b.ml(),
            })?;
            sample_from(corpus, key, target, LabelType::TypeM, norm)
        })
        .collect()
}

/// Both label types, Type I first.
pub fn label_all(corpus: &Corpus, norm: &Normalization) -> Result<Vec<MixSample>> {
    let mut v = label_type_i(corpus, norm)?;
    v.extend(label_type_m(corpus, norm)?);
    Ok(v)
}

/// Pre-doubling partition sizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub type_i_train: usize,
    pub type_i_test: usize,
    pub type_m_train: usize,
    pub type_m_test: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<MixSample>,
    pub test: Vec<MixSample>,
    pub seed: u64,
    pub counts: SplitCounts,
}

/// Fraction of each label type held out for testing.
pub const TEST_FRACTION: f64 = 0.2;

/// Stratified 80/20 split per label type, then each sample is followed by its
/// swapped twin in the same partition.
pub fn split(samples: &[MixSample], seed: u64) -> DatasetSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = SplitCounts::default();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [LabelType::TypeI, LabelType::TypeM] {
        let mut idx: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].label == label).collect();
        idx.shuffle(&mut rng);
        let n_test = math::round(idx.len() as f64 * TEST_FRACTION) as usize;
        let (te, tr) = idx.split_at(n_test);
        match label {
            LabelType::TypeI => {
                counts.type_i_train = tr.len();
                counts.type_i_test = te.len();
            }
            LabelType::TypeM => {
                counts.type_m_train = tr.len();
                counts.type_m_test = te.len();
            }
        }
        for (dst, part) in [(&mut train, tr), (&mut test, te)] {
            for &i in part {
                dst.push(samples[i].clone());
                dst.push(samples[i].swapped_twin());
            }
        }
    }
    DatasetSplit {
        train,
        test,
        seed,
        counts,
    }
}

/// Shape of one absorption feature of a synthetic pigment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AbsorptionBand {
    /// Gaussian band `strength·exp(−((λ−center)/width)²)`.
    Peak {
        center_nm: f64,
        width_nm: f64,
        strength: f64,
    },
    /// Logistic edge absorbing below `edge_nm`.
    Below { edge_nm: f64, width_nm: f64, strength: f64 },
    /// Logistic edge absorbing above `edge_nm`.
    Above { edge_nm: f64, width_nm: f64, strength: f64 },
}

impl AbsorptionBand {
    fn eval(&self, wl: f64) -> f64 {
        match *self {
            AbsorptionBand::Peak {
                center_nm,
                width_nm,
                strength,
            } => {
                let z = (wl - center_nm) / width_nm;
                strength * math::exp(-z * z)
            }
            AbsorptionBand::Below {
                edge_nm,
                width_nm,
                strength,
            } => strength / (1.0 + math::exp((wl - edge_nm) / width_nm)),
            AbsorptionBand::Above {
                edge_nm,
                width_nm,
                strength,
            } => strength / (1.0 + math::exp(-(wl - edge_nm) / width_nm)),
        }
    }

    fn scaled(self, f: f64) -> Self {
        match self {
            AbsorptionBand::Peak {
                center_nm,
                width_nm,
                strength,
            } => AbsorptionBand::Peak {
                center_nm,
                width_nm,
                strength: strength * f,
            },
            AbsorptionBand::Below {
                edge_nm,
                width_nm,
                strength,
            } => AbsorptionBand::Below {
                edge_nm,
                width_nm,
                strength: strength * f,
            },
            AbsorptionBand::Above {
                edge_nm,
                width_nm,
                strength,
            } => AbsorptionBand::Above {
                edge_nm,
                width_nm,
                strength: strength * f,
            },
        }
    }
}

/// Spectral `K` and `S` of a synthetic pigment, per 0.01 mL layer.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPigmentSpec {
    pub id: PigmentId,
    pub coefficients: KmCoefficients,
}

impl SyntheticPigmentSpec {
    /// `K(λ) = base_absorption + Σ bands`, flat scattering.
    pub fn from_bands(id: PigmentId, base_absorption: f64, bands: &[AbsorptionBand], scattering: f64) -> Result<Self> {
        let k = Spectrum::from_fn(|wl| base_absorption + bands.iter().map(|b| b.eval(wl)).sum::<f64>())?;
        let s = Spectrum::flat(scattering);
        Self::new(id, k.values().to_vec(), s.values().to_vec())
    }

    pub fn new(id: PigmentId, k: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        if k.len() != SAMPLES || s.len() != SAMPLES {
            return Err(Error::Shape("synthetic pigments are spectral (41 channels)".into()));
        }
        if k.iter().chain(&s).any(|&v| !(v > 0.0)) {
            return Err(Error::Validation(format!(
                "synthetic pigment {}: K and S must be positive",
                id.index()
            )));
        }
        Ok(SyntheticPigmentSpec {
            id,
            coefficients: KmCoefficients::new(Channels::new(k)?, Channels::new(s)?)?,
        })
    }
}

/// Seeded knobs of the synthetic corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Band strengths are scaled by a factor drawn from `1 ± strength_jitter`.
    pub strength_jitter: f64,
    /// Standard deviation of additive measurement noise (0 = exact KM).
    pub noise_sigma: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            strength_jitter: 0.1,
            noise_sigma: 0.0,
        }
    }
}

/// Reflectance of the black backing used for the black-backed samples.
pub const BLACK_PAPER_REFLECTANCE: f64 = 0.001;

/// 0.01 mL of pigment is one unit of KM thickness.
pub const ML_PER_UNIT_THICKNESS: f64 = 0.01;

pub fn thickness_of(q: Quantity) -> f64 {
    q.ml() / ML_PER_UNIT_THICKNESS
}

/// Slightly warm white watercolor paper.
pub fn default_substrate() -> Spectrum {
    Spectrum::from_fn(|wl| 0.82 + 0.06 / (1.0 + math::exp(-(wl - 420.0) / 15.0))).expect("finite")
}

/// Band descriptions of the 13 palette pigments, ordered ρ1…ρ13.
fn palette_bands() -> [(f64, Vec<AbsorptionBand>, f64); PIGMENT_COUNT] {
    use AbsorptionBand::*;
    [
        // cadmium red
        (
            0.004,
            alloc::vec![Below {
                edge_nm: 585.0,
                width_nm: 12.0,
                strength: 0.55
            }],
            0.045,
        ),
        // alizarin crimson
        (
            0.004,
            alloc::vec![
                Peak {
                    center_nm: 540.0,
                    width_nm: 45.0,
                    strength: 0.45
                },
                Peak {
                    center_nm: 440.0,
                    width_nm: 40.0,
                    strength: 0.12
                },
            ],
            0.012,
        ),
        // burnt sienna
        (
            0.02,
            alloc::vec![
                Below {
                    edge_nm: 560.0,
                    width_nm: 45.0,
                    strength: 0.25
                },
                Peak {
                    center_nm: 420.0,
                    width_nm: 60.0,
                    strength: 0.05
                },
            ],
            0.02,
        ),
        // lemon yellow
        (
            0.003,
            alloc::vec![Below {
                edge_nm: 490.0,
                width_nm: 12.0,
                strength: 0.45
            }],
            0.035,
        ),
        // cadmium yellow
        (
            0.003,
            alloc::vec![Below {
                edge_nm: 520.0,
                width_nm: 12.0,
                strength: 0.5
            }],
            0.05,
        ),
        // raw sienna
        (
            0.012,
            alloc::vec![Below {
                edge_nm: 540.0,
                width_nm: 35.0,
                strength: 0.18
            }],
            0.015,
        ),
        // sap green
        (
            0.02,
            alloc::vec![
                Below {
                    edge_nm: 470.0,
                    width_nm: 25.0,
                    strength: 0.3
                },
                Above {
                    edge_nm: 620.0,
                    width_nm: 25.0,
                    strength: 0.35
                },
            ],
            0.012,
        ),
        // cerulean blue
        (
            0.01,
            alloc::vec![Above {
                edge_nm: 560.0,
                width_nm: 30.0,
                strength: 0.25
            }],
            0.07,
        ),
        // cobalt blue
        (
            0.015,
            alloc::vec![
                Peak {
                    center_nm: 600.0,
                    width_nm: 70.0,
                    strength: 0.35
                },
                Peak {
                    center_nm: 530.0,
                    width_nm: 40.0,
                    strength: 0.1
                },
            ],
            0.04,
        ),
        // ultramarine
        (
            0.015,
            alloc::vec![Peak {
                center_nm: 590.0,
                width_nm: 80.0,
                strength: 0.45
            }],
            0.02,
        ),
        // prussian blue
        (
            0.08,
            alloc::vec![Above {
                edge_nm: 540.0,
                width_nm: 40.0,
                strength: 0.6
            }],
            0.01,
        ),
        // ivory black
        (
            0.25,
            alloc::vec![Above {
                edge_nm: 780.0,
                width_nm: 400.0,
                strength: 0.02
            }],
            0.03,
        ),
        // chinese white
        (
            0.002,
            alloc::vec![Peak {
                center_nm: 380.0,
                width_nm: 30.0,
                strength: 0.03
            }],
            0.25,
        ),
    ]
}

/// The 13 synthetic palette pigments, band strengths jittered by the seed.
pub fn synthetic_pigments(cfg: &SyntheticConfig) -> Result<Vec<SyntheticPigmentSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(PIGMENT_COUNT);
    for (id, (base, bands, s)) in PigmentId::all().zip(palette_bands()) {
        let bands: Vec<AbsorptionBand> = bands
            .into_iter()
            .map(|b| {
                let f = if cfg.strength_jitter > 0.0 {
                    1.0 + rng.random_range(-cfg.strength_jitter..=cfg.strength_jitter)
                } else {
                    1.0
                };
                b.scaled(f)
            })
            .collect();
        out.push(SyntheticPigmentSpec::from_bands(id, base, &bands, s)?);
    }
    Ok(out)
}

fn spectral(values: Channels) -> Result<Spectrum> {
    Spectrum::from_slice(values.values())
}

fn noisy(s: Spectrum, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
    if sigma == 0.0 {
        return Ok(s);
    }
    let mut v = *s.values();
    for x in &mut v {
        // Box–Muller
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let n = math::sqrt(-2.0 * math::ln(u1)) * libm::cos(core::f64::consts::TAU * u2);
        *x = (*x + sigma * n).clamp(0.0, 1.0);
    }
    Spectrum::new(v)
}

/// Generate a full corpus from synthetic pigments with the KM model.
///
/// Pigment `q` mL is a layer of thickness `q / 0.01` composited over the
/// substrate; transmittance is the layer's KM transmittance. A Type M mixture
/// of `q_a` and `q_b` mixes coefficients in proportion `q_a : q_b` at
/// thickness `(q_a + q_b) / 0.01`.
pub fn generate_synthetic(
    specs: &[SyntheticPigmentSpec],
    substrate: &Spectrum,
    cfg: &SyntheticConfig,
) -> Result<Corpus> {
    if specs.len() != PIGMENT_COUNT {
        return Err(Error::Validation(format!(
            "expected {PIGMENT_COUNT} synthetic pigments, got {}",
            specs.len()
        )));
    }
    let mut specs: Vec<&SyntheticPigmentSpec> = specs.iter().collect();
    specs.sort_by_key(|s| s.id);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6d65_6173_7572_6564);
    let sub = Channels::new(substrate.values().to_vec())?;
    let black = Channels::splat(BLACK_PAPER_REFLECTANCE, SAMPLES)?;

    let mut records = Vec::with_capacity(PIGMENT_COUNT);
    let mut black_samples = BTreeMap::new();
    for spec in &specs {
        let mut rw = Vec::with_capacity(12);
        let mut tr = Vec::with_capacity(12);
        for q in Quantity::canonical() {
            let x = thickness_of(q);
            let r = spectral(km::composite_km(&spec.coefficients, &sub, x)?)?;
            let t = spectral(km::km_transmittance(&spec.coefficients, x)?)?;
            rw.push((q, noisy(r, cfg.noise_sigma, &mut rng)?));
            tr.push((q, noisy(t, cfg.noise_sigma, &mut rng)?));
        }
        records.push(PigmentRecord::new(spec.id, &rw, &tr)?);
        let rb = spectral(km::composite_km(&spec.coefficients, &black, 1.0)?)?;
        black_samples.insert(spec.id, noisy(rb, cfg.noise_sigma, &mut rng)?);
    }

    let mut mixtures = BTreeMap::new();
    for key in type_m_keys() {
        let (qa, qb) = (key.q_a.ml(), key.q_b.ml());
        let total = qa + qb;
        let mixed = km::mix_km(
            &[
                specs[key.pigment_a.ordinal()].coefficients.clone(),
                specs[key.pigment_b.ordinal()].coefficients.clone(),
            ],
            &[qa / total, qb / total],
        )?;
        let r = spectral(km::composite_km(&mixed, &sub, total / ML_PER_UNIT_THICKNESS)?)?;
        mixtures.insert(key, noisy(r, cfg.noise_sigma, &mut rng)?);
    }

    Corpus::new(
        records,
        *substrate,
        mixtures,
        Some(BlackBacked {
            paper: Spectrum::flat(BLACK_PAPER_REFLECTANCE),
            samples: black_samples,
        }),
    )
}

/// Convenience: default palette, default paper, generated with `cfg`.
pub fn synthetic_corpus(cfg: &SyntheticConfig) -> Result<Corpus> {
    generate_synthetic(&synthetic_pigments(cfg)?, &default_substrate(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        synthetic_corpus(&SyntheticConfig::default()).unwrap()
    }

    #[test]
    fn type_i_pair_rule_gives_34() {
        // brute force over all ordered pairs in hundredths of a mL
        let set = [1u32, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 16];
        let mut n = 0;
        for &a in &set {
            for &b in &set {
                if a <= b && set.contains(&(a + b)) {
                    n += 1;
                }
            }
        }
        assert_eq!(n, 34);
        let pairs = type_i_quantity_pairs();
        assert_eq!(pairs.len(), n);
        let q = |ul| Quantity::from_microliters(ul);
        assert!(pairs.contains(&(q(10), q(10))));
        assert!(!pairs.contains(&(q(50), q(80))));
    }

    #[test]
    fn label_counts() {
        let c = corpus();
        let norm = Normalization::default();
        let i = label_type_i(&c, &norm).unwrap();
        let m = label_type_m(&c, &norm).unwrap();
        assert_eq!(i.len(), 442);
        assert_eq!(m.len(), 780);
        assert!(i.iter().all(|s| s.pigment_a == s.pigment_b));
        assert!(m.iter().all(|s| s.pigment_a < s.pigment_b));
        assert!(i.iter().chain(&m).all(|s| s.features.len() == FEATURE_COUNT));
    }

    #[test]
    fn type_i_target_is_reflectance_at_sum() {
        let c = corpus();
        let i = label_type_i(&c, &Normalization::default()).unwrap();
        let s = i
            .iter()
            .find(|s| s.q_a.microliters() == 10 && s.q_b.microliters() == 10)
            .unwrap();
        let want = c
            .record(s.pigment_a)
            .reflectance(Quantity::from_microliters(20))
            .unwrap();
        assert_eq!(&s.target, want);
    }

    #[test]
    fn missing_mixture_names_the_pair() {
        let mut c = corpus();
        let key = type_m_keys()[13];
        c.mixtures.remove(&key);
        let err = label_type_m(&c, &Normalization::default()).unwrap_err();
        assert!(
            matches!(
                err,
                Error::MissingMixture {
                    pigment_a: 1,
                    pigment_b: 3,
                    ..
                }
            ),
            "{err:?}"
        );
    }

    #[test]
    fn split_counts_and_twins() {
        let c = corpus();
        let all = label_all(&c, &Normalization::default()).unwrap();
        let s = split(&all, 11);
        assert_eq!(
            s.counts,
            SplitCounts {
                type_i_train: 354,
                type_i_test: 88,
                type_m_train: 624,
                type_m_test: 156
            }
        );
        assert_eq!((s.train.len(), s.test.len()), (1956, 488));
        for part in [&s.train, &s.test] {
            for pair in part.chunks(2) {
                assert_eq!(pair[1], pair[0].swapped_twin());
                assert_eq!(pair[0].target, pair[1].target);
            }
        }
        let train_ids: alloc::collections::BTreeSet<String> = s.train.iter().map(|x| x.id()).collect();
        assert!(s.test.iter().all(|x| !train_ids.contains(&x.id())));
        assert_eq!(split(&all, 11), s);
        assert_ne!(split(&all, 12).test, s.test);
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let c = corpus();
        let m = label_type_m(&c, &Normalization::default()).unwrap();
        let s = &m[17];
        let u = unpack_features(&s.features, &Normalization::default()).unwrap();
        let (ra, ta) = interpolate_quantity(c.record(s.pigment_a), s.q_a).unwrap();
        assert_eq!(u.rw_a, ra);
        assert_eq!(u.t_a, ta);
        assert_eq!(u.substrate, c.substrate);
        assert!((u.q_a_ml - s.q_a.ml()).abs() < 1e-15);
        let mut f = s.features.clone();
        swap_roles(&mut f);
        swap_roles(&mut f);
        assert_eq!(f, s.features);
    }

    #[test]
    fn synthetic_type_i_is_exact_km() {
        let cfg = SyntheticConfig::default();
        let specs = synthetic_pigments(&cfg).unwrap();
        let c = corpus();
        let sub = Channels::new(c.substrate.values().to_vec()).unwrap();
        let r2 = km::composite_km(&specs[4].coefficients, &sub, 2.0).unwrap();
        let stored = c.records[4].reflectance(Quantity::from_microliters(20)).unwrap();
        assert_eq!(stored.as_slice(), r2.values());
    }

    #[test]
    fn self_mixture_equals_double_quantity() {
        let cfg = SyntheticConfig::default();
        let specs = synthetic_pigments(&cfg).unwrap();
        let sub = Channels::new(default_substrate().values().to_vec()).unwrap();
        let c = &specs[7].coefficients;
        for q in [1.0, 2.0, 4.0, 8.0] {
            let mixed = km::mix_km(&[c.clone(), c.clone()], &[0.5, 0.5]).unwrap();
            let a = km::composite_km(&mixed, &sub, 2.0 * q).unwrap();
            let b = km::composite_km(c, &sub, 2.0 * q).unwrap();
            for ch in 0..SAMPLES {
                assert!((a.values()[ch] - b.values()[ch]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic_and_seed_dependent() {
        let a = synthetic_corpus(&SyntheticConfig::default()).unwrap();
        let b = synthetic_corpus(&SyntheticConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = synthetic_corpus(&SyntheticConfig {
            seed: 8,
            ..SyntheticConfig::default()
        })
        .unwrap();
        assert_ne!(a.records, c.records);
        for rec in &a.records {
            for (_, r, t) in rec.entries() {
                r.check_unit_range().unwrap();
                t.check_unit_range().unwrap();
            }
        }
    }

    #[test]
    fn noise_stays_in_range() {
        let c = synthetic_corpus(&SyntheticConfig {
            noise_sigma: 0.01,
            ..SyntheticConfig::default()
        })
        .unwrap();
        for s in c.mixtures.values() {
            s.check_unit_range().unwrap();
        }
    }
}
