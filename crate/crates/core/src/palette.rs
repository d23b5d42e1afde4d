//! Recipe look-up table: every ordered pair of primary entries, predicted,
//! converted to Lab/sRGB, and indexed for exact nearest-color queries.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::colorimetry::{delta_e_ab, Colorimeter, Lab, Srgb8, DISTINGUISHABLE_DELTA_E};
use crate::dataset::{write_features, Ingredient, FEATURE_COUNT};
use crate::mixnet::ModelWeights;
use crate::spectrum::{
    expand_primaries_on, interpolate_quantity, PigmentId, PigmentRecord, PrimaryEntry, Quantity, Spectrum, SAMPLES,
};
use crate::{Error, Result};

/// Recipes with a ratio gap below this stay near the trained mixing ratios.
pub const GOOD_RATIO_GAP: f64 = 0.5;

/// Rows per network call during a build.
pub const BUILD_CHUNK: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    pub pigment_a: PigmentId,
    pub pigment_b: PigmentId,
    pub q_a: Quantity,
    pub q_b: Quantity,
    pub lab: [f32; 3],
    pub rgb: Srgb8,
}

impl LutEntry {
    pub fn lab(&self) -> Lab {
        Lab::new(self.lab[0] as f64, self.lab[1] as f64, self.lab[2] as f64)
    }

    /// `|q_a − q_b| / (q_a + q_b)`
    pub fn ratio_gap(&self) -> f64 {
        let (a, b) = (self.q_a.microliters(), self.q_b.microliters());
        a.abs_diff(b) as f64 / (a + b) as f64
    }

    pub fn total_microliters(&self) -> u32 {
        self.q_a.microliters() + self.q_b.microliters()
    }

    fn ratio_gap_cmp(&self, other: &LutEntry) -> Ordering {
        // Exact rational comparison: |a−b|/(a+b) vs |c−d|/(c+d).
        let (a, b) = (self.q_a.microliters() as u64, self.q_b.microliters() as u64);
        let (c, d) = (other.q_a.microliters() as u64, other.q_b.microliters() as u64);
        (a.abs_diff(b) * (c + d)).cmp(&(c.abs_diff(d) * (a + b)))
    }

    /// Order among entries at equal distance: smaller ratio gap, smaller
    /// total quantity, then pigment ids and quantities lexicographically.
    pub fn tie_break(&self, other: &LutEntry) -> Ordering {
        self.ratio_gap_cmp(other)
            .then(self.total_microliters().cmp(&other.total_microliters()))
            .then(self.pigment_a.cmp(&other.pigment_a))
            .then(self.pigment_b.cmp(&other.pigment_b))
            .then(self.q_a.cmp(&other.q_a))
            .then(self.q_b.cmp(&other.q_b))
    }

    pub fn validate(&self) -> Result<()> {
        self.q_a.check_on_grid()?;
        self.q_b.check_on_grid()?;
        if self.lab.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite Lab in LUT entry".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityFlags {
    pub good_ratio: bool,
    pub good_match: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub entry: LutEntry,
    pub delta_e_to_target: f64,
    pub ratio_gap: f64,
    pub quality_flags: QualityFlags,
}

impl Recipe {
    pub fn new(entry: LutEntry, target: Lab) -> Self {
        let delta_e = delta_e_ab(entry.lab(), target);
        let ratio_gap = entry.ratio_gap();
        Recipe {
            entry,
            delta_e_to_target: delta_e,
            ratio_gap,
            quality_flags: QualityFlags {
                good_ratio: ratio_gap < GOOD_RATIO_GAP,
                good_match: delta_e < DISTINGUISHABLE_DELTA_E,
            },
        }
    }
}

/// Which primaries enter the table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutBuildConfig {
    pub pigments: Vec<PigmentId>,
    pub quantities_ul: Vec<u32>,
}

impl Default for LutBuildConfig {
    fn default() -> Self {
        LutBuildConfig {
            pigments: PigmentId::all().collect(),
            quantities_ul: Quantity::grid().map(Quantity::microliters).collect(),
        }
    }
}

impl LutBuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pigments.is_empty() || self.quantities_ul.is_empty() {
            return Err(Error::Validation("LUT build needs pigments and quantities".into()));
        }
        for (i, p) in self.pigments.iter().enumerate() {
            if self.pigments[..i].contains(p) {
                return Err(Error::Validation(format!("pigment {} listed twice", p.index())));
            }
        }
        for (i, &q) in self.quantities_ul.iter().enumerate() {
            Quantity::from_microliters(q).check_on_grid()?;
            if self.quantities_ul[..i].contains(&q) {
                return Err(Error::Validation(format!("quantity {q} uL listed twice")));
            }
        }
        Ok(())
    }

    pub fn primary_count(&self) -> usize {
        self.pigments.len() * self.quantities_ul.len()
    }

    /// Number of ordered pairs, self-pairs included.
    pub fn entry_count(&self) -> usize {
        self.primary_count() * self.primary_count()
    }
}

/// Primary entries of a build, ordered by the config's pigment then quantity
/// order. Entry `i` of the table pairs primary `i / n` with `i % n`.
pub fn lut_primaries(records: &[PigmentRecord], cfg: &LutBuildConfig) -> Result<Vec<PrimaryEntry>> {
    cfg.validate()?;
    let mut chosen = Vec::with_capacity(cfg.pigments.len());
    for &p in &cfg.pigments {
        let rec = records
            .iter()
            .find(|r| r.id == p)
            .ok_or_else(|| Error::Validation(format!("no record for pigment {}", p.index())))?;
        chosen.push(rec.clone());
    }
    let qs: Vec<Quantity> = cfg
        .quantities_ul
        .iter()
        .map(|&q| Quantity::from_microliters(q))
        .collect();
    expand_primaries_on(&chosen, &qs)
}

/// Predict table entries `range` (indices into the `n²` ordered pairs).
pub fn predict_entries(
    w: &ModelWeights,
    primaries: &[PrimaryEntry],
    substrate: &Spectrum,
    colorimeter: &Colorimeter,
    range: Range<usize>,
) -> Result<Vec<LutEntry>> {
    let n = primaries.len();
    if range.end > n * n {
        return Err(Error::Validation(format!(
            "entry range {:?} beyond {} pairs",
            range,
            n * n
        )));
    }
    let mut out = Vec::with_capacity(range.len());
    let mut features = vec![0.0; BUILD_CHUNK.min(range.len().max(1)) * FEATURE_COUNT];
    let mut start = range.start;
    while start < range.end {
        let end = (start + BUILD_CHUNK).min(range.end);
        let m = end - start;
        for (row, i) in features.chunks_exact_mut(FEATURE_COUNT).zip(start..end) {
            let (a, b) = (&primaries[i / n], &primaries[i % n]);
            write_features(row, ingredient(a), ingredient(b), substrate, &w.config.normalization);
        }
        let pred = w.forward_batch(&features[..m * FEATURE_COUNT], m)?;
        for (i, s) in (start..end).zip(pred.chunks_exact(SAMPLES)) {
            let (a, b) = (&primaries[i / n], &primaries[i % n]);
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::PredictionFailure {
                    pigment_a: a.pigment.index(),
                    pigment_b: b.pigment.index(),
                    q_a_ml: a.quantity.ml(),
                    q_b_ml: b.quantity.ml(),
                });
            }
            let spectrum = Spectrum::from_slice(s)?;
            let lab = colorimeter.lab(&spectrum);
            out.push(LutEntry {
                pigment_a: a.pigment,
                pigment_b: b.pigment,
                q_a: a.quantity,
                q_b: b.quantity,
                lab: [lab.l as f32, lab.a as f32, lab.b as f32],
                rgb: colorimeter.srgb8(&spectrum),
            });
        }
        start = end;
    }
    Ok(out)
}

fn ingredient(p: &PrimaryEntry) -> Ingredient<'_> {
    Ingredient {
        transmittance: &p.transmittance,
        reflectance: &p.reflectance,
        quantity: p.quantity,
    }
}

/// Where a table came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutProvenance {
    pub model_hash: [u8; 32],
    pub config: LutBuildConfig,
}

/// Built table with its spatial index. Immutable once constructed.
#[derive(Clone, Debug)]
pub struct Lut {
    entries: Vec<LutEntry>,
    provenance: LutProvenance,
    index: KdTree,
}

impl Lut {
    pub fn new(entries: Vec<LutEntry>, provenance: LutProvenance) -> Result<Self> {
        for e in &entries {
            e.validate()?;
        }
        let index = KdTree::build(&entries);
        Ok(Lut {
            entries,
            provenance,
            index,
        })
    }

    /// Single-threaded build over the whole config.
    pub fn build(
        w: &ModelWeights,
        records: &[PigmentRecord],
        substrate: &Spectrum,
        provenance: LutProvenance,
    ) -> Result<Self> {
        let primaries = lut_primaries(records, &provenance.config)?;
        let n = primaries.len();
        let entries = predict_entries(w, &primaries, substrate, &Colorimeter::standard(), 0..n * n)?;
        Self::new(entries, provenance)
    }

    pub fn entries(&self) -> &[LutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn provenance(&self) -> &LutProvenance {
        &self.provenance
    }

    /// Best recipe for an 8-bit sRGB target.
    pub fn match_color(&self, colorimeter: &Colorimeter, target: Srgb8) -> Result<Recipe> {
        Ok(self.match_top_k(colorimeter, target, 1)?.remove(0))
    }

    /// The `k` best distinct entries, best first.
    pub fn match_top_k(&self, colorimeter: &Colorimeter, target: Srgb8, k: usize) -> Result<Vec<Recipe>> {
        self.match_lab(colorimeter.srgb8_to_lab(target), k)
    }

    pub fn match_lab(&self, target: Lab, k: usize) -> Result<Vec<Recipe>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyLut);
        }
        if k == 0 {
            return Err(Error::Validation("top-k needs k >= 1".into()));
        }
        let hits = self.index.nearest(&self.entries, target, k);
        Ok(hits.into_iter().map(|i| Recipe::new(self.entries[i], target)).collect())
    }

    /// Linear-scan reference for [`Lut::match_lab`].
    pub fn brute_force(&self, target: Lab, k: usize) -> Result<Vec<Recipe>> {
        if self.entries.is_empty() {
            return Err(Error::EmptyLut);
        }
        let mut all: Vec<(f64, usize)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (squared_distance(e, target), i))
            .collect();
        all.sort_by(|x, y| self.candidate_cmp(*x, *y));
        Ok(all
            .into_iter()
            .take(k)
            .map(|(_, i)| Recipe::new(self.entries[i], target))
            .collect())
    }

    fn candidate_cmp(&self, x: (f64, usize), y: (f64, usize)) -> Ordering {
        x.0.total_cmp(&y.0)
            .then_with(|| self.entries[x.1].tie_break(&self.entries[y.1]))
    }
}

fn squared_distance(e: &LutEntry, t: Lab) -> f64 {
    let dl = e.lab[0] as f64 - t.l;
    let da = e.lab[1] as f64 - t.a;
    let db = e.lab[2] as f64 - t.b;
    dl * dl + da * da + db * db
}

fn axis_value(t: Lab, axis: usize) -> f64 {
    match axis {
        0 => t.l,
        1 => t.a,
        _ => t.b,
    }
}

const LEAF_SIZE: usize = 16;

#[derive(Clone, Debug)]
enum Node {
    Leaf(Range<usize>),
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact k-d tree over entry Lab coordinates. `order` is a permutation of
/// entry indices; each leaf owns a contiguous run of it.
#[derive(Clone, Debug)]
struct KdTree {
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl KdTree {
    fn build(entries: &[LutEntry]) -> Self {
        let mut tree = KdTree {
            order: (0..entries.len() as u32).collect(),
            nodes: Vec::new(),
        };
        if !entries.is_empty() {
            tree.build_node(entries, 0..entries.len(), 0);
        }
        tree
    }

    fn build_node(&mut self, entries: &[LutEntry], range: Range<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        if range.len() <= LEAF_SIZE {
            self.nodes.push(Node::Leaf(range));
            return id;
        }
        let axis = depth % 3;
        let mid = range.len() / 2;
        let key = |i: &u32| entries[*i as usize].lab[axis];
        self.order[range.clone()].select_nth_unstable_by(mid, |x, y| key(x).total_cmp(&key(y)));
        let value = key(&self.order[range.start + mid]) as f64;
        self.nodes.push(Node::Leaf(0..0));
        let left = self.build_node(entries, range.start..range.start + mid, depth + 1);
        let right = self.build_node(entries, range.start + mid..range.end, depth + 1);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn nearest(&self, entries: &[LutEntry], target: Lab, k: usize) -> Vec<usize> {
        let mut best = BinaryHeap::with_capacity(k + 1);
        if !self.nodes.is_empty() {
            self.search(0, entries, target, k, &mut best);
        }
        let mut out: Vec<Candidate> = best.into_vec();
        out.sort();
        out.into_iter().map(|c| c.index).collect()
    }

    fn search<'e>(
        &self,
        node: usize,
        entries: &'e [LutEntry],
        target: Lab,
        k: usize,
        best: &mut BinaryHeap<Candidate<'e>>,
    ) {
        match &self.nodes[node] {
            Node::Leaf(range) => {
                for &i in &self.order[range.clone()] {
                    let c = Candidate {
                        d2: squared_distance(&entries[i as usize], target),
                        index: i as usize,
                        entries,
                    };
                    if best.len() < k {
                        best.push(c);
                    } else if best.peek().is_some_and(|worst| c < *worst) {
                        best.pop();
                        best.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let t = axis_value(target, *axis);
                // Left holds coordinates <= value, right >= value.
                let (near, far) = if t < *value { (*left, *right) } else { (*right, *left) };
                self.search(near, entries, target, k, best);
                let gap = t - value;
                // Ties must still be visited: tie-breaking may prefer them.
                if best.len() < k || best.peek().is_some_and(|w| gap * gap <= w.d2) {
                    self.search(far, entries, target, k, best);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Candidate<'a> {
    d2: f64,
    index: usize,
    entries: &'a [LutEntry],
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate<'_> {}
impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then_with(|| self.entries[self.index].tie_break(&self.entries[other.index]))
    }
}

/// Colors of the two ingredients (from interpolated primary reflectance)
/// and of their predicted mixture.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPreview {
    pub a: Srgb8,
    pub b: Srgb8,
    pub mixture: Srgb8,
}

pub fn mix_preview(
    w: &ModelWeights,
    records: &[PigmentRecord],
    substrate: &Spectrum,
    colorimeter: &Colorimeter,
    (pa, qa): (PigmentId, Quantity),
    (pb, qb): (PigmentId, Quantity),
) -> Result<(MixPreview, Spectrum)> {
    let find = |p: PigmentId| {
        records
            .iter()
            .find(|r| r.id == p)
            .ok_or_else(|| Error::Validation(format!("no record for pigment {}", p.index())))
    };
    let (ra, _) = interpolate_quantity(find(pa)?, qa)?;
    let (rb, _) = interpolate_quantity(find(pb)?, qb)?;
    let mix = crate::mixnet::predict_mixture(w, records, substrate, pa, qa, pb, qb)?;
    Ok((
        MixPreview {
            a: colorimeter.srgb8(&ra),
            b: colorimeter.srgb8(&rb),
            mixture: colorimeter.srgb8(&mix),
        },
        mix,
    ))
}
