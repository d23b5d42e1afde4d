//! Two-constant Kubelka–Munk model.
//!
//! Coefficients are per unit thickness. Channel vectors hold either 3 values
//! (linear RGB mode) or 41 values (spectral mode); every operation works
//! channel-wise and is agnostic to which.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::spectrum::SAMPLES;
use crate::{Error, Result};

/// Per-channel values, `n ∈ {3, 41}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Channels(Vec<f64>);

impl Channels {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() != 3 && values.len() != SAMPLES {
            return Err(Error::Shape(format!(
                "channel vectors have 3 or {SAMPLES} entries, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite channel value".into()));
        }
        Ok(Channels(values))
    }

    pub fn splat(value: f64, n: usize) -> Result<Self> {
        Self::new(alloc::vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Channels {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Channels::new(v)
    }
}

impl From<Channels> for Vec<f64> {
    fn from(c: Channels) -> Vec<f64> {
        c.0
    }
}

/// Absorption `K` and scattering `S` per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmCoefficients {
    pub k: Channels,
    pub s: Channels,
}

impl KmCoefficients {
    pub fn new(k: Channels, s: Channels) -> Result<Self> {
        if k.len() != s.len() {
            return Err(Error::Shape(format!("K has {} channels, S has {}", k.len(), s.len())));
        }
        Ok(KmCoefficients { k, s })
    }

    pub fn channels(&self) -> usize {
        self.k.len()
    }
}

/// Reflectance of the backings under the white- and black-backed samples.
#[derive(Clone, Debug, PartialEq)]
pub enum Backings {
    /// White reflects everything, black nothing.
    Ideal,
    /// Measured backing reflectances, one value per channel each.
    Measured { white: Channels, black: Channels },
}

/// `coth⁻¹ z = ½ ln((z + 1)/(z − 1))`, defined for `|z| > 1`.
pub fn arccoth(z: f64) -> Option<f64> {
    if z.is_finite() && math::abs(z) > 1.0 {
        Some(0.5 * math::ln((z + 1.0) / (z - 1.0)))
    } else {
        None
    }
}

/// Recover unit-thickness `(K, S)` from a layer's reflectance over a white
/// and over a black backing.
///
/// With [`Backings::Ideal`] this is the classic closed form
/// `a = ½(R_w + (R_b − R_w + 1)/R_b)`, `b = √(a² − 1)`,
/// `S = coth⁻¹((b² − (a − R_w)(a − 1)) / (b(1 − R_w))) / b`, `K = S(a − 1)`.
/// With measured backings `g_w`, `g_b` the layer's own reflectance `R₀` and
/// squared transmittance `T²` are solved from
/// `R(g) = R₀ + T²g/(1 − R₀g)` first; `a = (1 + R₀² − T²)/(2R₀)`; then
/// `S = coth⁻¹((1/R₀ − a)/b) / b`. Both agree when `g_w = 1`, `g_b = 0`.
pub fn invert_km(r_white: &Channels, r_black: &Channels, backings: &Backings) -> Result<KmCoefficients> {
    let n = r_white.len();
    if r_black.len() != n {
        return Err(Error::Shape(format!(
            "white has {n} channels, black has {}",
            r_black.len()
        )));
    }
    if let Backings::Measured { white, black } = backings {
        if white.len() != n || black.len() != n {
            return Err(Error::Shape("backing channel count mismatch".into()));
        }
    }
    let mut k = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for ch in 0..n {
        let rw = r_white.values()[ch];
        let rb = r_black.values()[ch];
        for (v, which) in [(rw, "white"), (rb, "black")] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::domain(
                    "reflectance",
                    format!("{which}-backed channel {ch} = {v} not in (0, 1)"),
                ));
            }
        }
        let (kc, sc) = match backings {
            Backings::Ideal => invert_channel_ideal(ch, rw, rb)?,
            Backings::Measured { white, black } => invert_channel(ch, rw, rb, white.values()[ch], black.values()[ch])?,
        };
        k.push(kc);
        s.push(sc);
    }
    KmCoefficients::new(Channels::new(k)?, Channels::new(s)?)
}

fn fail(channel: usize, reason: &'static str) -> Error {
    Error::InversionFailure { channel, reason }
}

fn finish_inversion(channel: usize, a: f64, s: f64) -> Result<(f64, f64)> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(fail(channel, "non-positive scattering"));
    }
    let k = s * (a - 1.0);
    if k < 0.0 {
        return Err(fail(channel, "negative absorption"));
    }
    Ok((k, s))
}

fn invert_channel_ideal(channel: usize, rw: f64, rb: f64) -> Result<(f64, f64)> {
    if rw <= rb {
        return Err(fail(channel, "white-backed reflectance does not exceed black-backed"));
    }
    let a = 0.5 * (rw + (rb - rw + 1.0) / rb);
    if a < 1.0 {
        return Err(fail(channel, "a < 1"));
    }
    let b = math::sqrt(a * a - 1.0);
    if b == 0.0 {
        return Err(fail(channel, "b = 0"));
    }
    let z = (b * b - (a - rw) * (a - 1.0)) / (b * (1.0 - rw));
    let s = arccoth(z).ok_or(fail(channel, "coth⁻¹ argument within [-1, 1]"))? / b;
    finish_inversion(channel, a, s)
}

fn invert_channel(channel: usize, rw: f64, rb: f64, gw: f64, gb: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&gb) || !(gw > gb && gw <= 1.0) {
        return Err(Error::domain(
            "backing reflectance",
            format!("channel {channel}: need 0 <= black < white <= 1, got {gb}, {gw}"),
        ));
    }
    if rw <= rb {
        return Err(fail(channel, "white-backed reflectance does not exceed black-backed"));
    }
    let r0 = (gw * rb - gb * rw) / (gw - gb - gw * gb * (rw - rb));
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(fail(channel, "layer reflectance outside (0, 1)"));
    }
    let t2 = (rw - r0) * (1.0 - r0 * gw) / gw;
    if !(t2 > 0.0) {
        return Err(fail(channel, "non-positive transmittance"));
    }
    let a = (1.0 + r0 * r0 - t2) / (2.0 * r0);
    if a < 1.0 {
        return Err(fail(channel, "a < 1"));
    }
    let b = math::sqrt(a * a - 1.0);
    if b == 0.0 {
        return Err(fail(channel, "b = 0"));
    }
    let s = arccoth((1.0 / r0 - a) / b).ok_or(fail(channel, "coth⁻¹ argument within [-1, 1]"))? / b;
    finish_inversion(channel, a, s)
}

/// Duncan mixing: proportion-weighted sums of `K` and `S`.
pub fn mix_km(coeffs: &[KmCoefficients], proportions: &[f64]) -> Result<KmCoefficients> {
    if coeffs.is_empty() || coeffs.len() != proportions.len() {
        return Err(Error::domain(
            "proportions",
            format!("{} coefficients but {} proportions", coeffs.len(), proportions.len()),
        ));
    }
    if proportions.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::domain("proportions", "negative proportion"));
    }
    let total: f64 = proportions.iter().sum();
    if math::abs(total - 1.0) > 1e-9 {
        return Err(Error::domain("proportions", format!("sum {total} != 1")));
    }
    let n = coeffs[0].channels();
    if coeffs.iter().any(|c| c.channels() != n) {
        return Err(Error::Shape("pigments have different channel counts".into()));
    }
    let mut k = alloc::vec![0.0; n];
    let mut s = alloc::vec![0.0; n];
    for (c, &p) in coeffs.iter().zip(proportions) {
        for ch in 0..n {
            k[ch] += c.k.values()[ch] * p;
            s[ch] += c.s.values()[ch] * p;
        }
    }
    KmCoefficients::new(Channels::new(k)?, Channels::new(s)?)
}

/// `b·coth(b·S·X)`, continuous through `b → 0` where it tends to `1/(S·X)`.
fn b_coth(b: f64, s: f64, x: f64) -> f64 {
    let y = b * s * x;
    if y < 1e-6 {
        // coth y ≈ 1/y + y/3
        1.0 / (s * x) + b * y / 3.0
    } else {
        b / math::tanh(y)
    }
}

/// Reflectance of one channel of a layer of thickness `x` over a backing of
/// reflectance `rg`.
pub fn composite_channel(k: f64, s: f64, rg: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("scattering", format!("S = {s} must be positive")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain("thickness", format!("X = {x} must be >= 0")));
    }
    if x == 0.0 {
        return Ok(rg);
    }
    let a = 1.0 + k / s;
    let b = math::sqrt(a * a - 1.0);
    let bc = b_coth(b, s, x);
    Ok((1.0 - rg * (a - bc)) / (a + bc - rg))
}

/// Composite a layer with coefficients `c` and thickness `x` over `substrate`.
pub fn composite_km(c: &KmCoefficients, substrate: &Channels, thickness: f64) -> Result<Channels> {
    if substrate.len() != c.channels() {
        return Err(Error::Shape("substrate channel count mismatch".into()));
    }
    if substrate.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::domain("substrate", "reflectance outside [0, 1]"));
    }
    let mut out = Vec::with_capacity(c.channels());
    for ch in 0..c.channels() {
        out.push(composite_channel(
            c.k.values()[ch],
            c.s.values()[ch],
            substrate.values()[ch],
            thickness,
        )?);
    }
    Channels::new(out)
}

/// Transmittance of one channel, `b / (a·sinh(bSX) + b·cosh(bSX))`.
pub fn transmittance_channel(k: f64, s: f64, x: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("scattering", format!("S = {s} must be positive")));
    }
    if !(x > 0.0) {
        return Err(Error::domain("thickness", format!("X = {x} must be positive")));
    }
    let a = 1.0 + k / s;
    let b = math::sqrt(a * a - 1.0);
    let y = b * s * x;
    if y < 1e-6 {
        // b→0: sinh(y)/b → S·X, cosh → 1
        return Ok(1.0 / (a * s * x + 1.0));
    }
    // multiply through by 2e^{-y} to stay finite for thick layers
    let e = math::exp(-2.0 * y);
    Ok(2.0 * b * math::exp(-y) / ((a + b) + (b - a) * e))
}

pub fn km_transmittance(c: &KmCoefficients, thickness: f64) -> Result<Channels> {
    let mut out = Vec::with_capacity(c.channels());
    for ch in 0..c.channels() {
        out.push(transmittance_channel(c.k.values()[ch], c.s.values()[ch], thickness)?);
    }
    Channels::new(out)
}
