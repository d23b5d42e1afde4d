//! Spectra, pigment quantities and quantity interpolation.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// Number of spectral samples (380–780 nm at 10 nm).
pub const SAMPLES: usize = 41;
pub const WAVELENGTH_START_NM: u32 = 380;
pub const WAVELENGTH_STEP_NM: u32 = 10;

/// Wavelength in nm of sample `k`.
pub const fn wavelength_nm(k: usize) -> u32 {
    WAVELENGTH_START_NM + WAVELENGTH_STEP_NM * k as u32
}

/// A spectral curve sampled at 380, 390, …, 780 nm.
///
/// Used for reflectance and transmittance alike. Values are finite; for
/// reflectance they are normally in `[0, 1]`, see [`Spectrum::check_unit_range`].
#[derive(Clone, Copy, PartialEq)]
pub struct Spectrum([f64; SAMPLES]);

impl Spectrum {
    pub fn new(values: [f64; SAMPLES]) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite spectral sample at {} nm",
                wavelength_nm(k)
            )));
        }
        Ok(Spectrum(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; SAMPLES] = values
            .try_into()
            .map_err(|_| Error::Validation(format!("spectrum needs {SAMPLES} samples, got {}", values.len())))?;
        Self::new(arr)
    }

    pub const fn flat(value: f64) -> Self {
        Spectrum([value; SAMPLES])
    }

    /// Build from a closure over wavelength in nm.
    pub fn from_fn(mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        let mut v = [0.0; SAMPLES];
        for (k, x) in v.iter_mut().enumerate() {
            *x = f(wavelength_nm(k) as f64);
        }
        Self::new(v)
    }

    pub fn values(&self) -> &[f64; SAMPLES] {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Flags reflectance/transmittance spectra with negative samples or
    /// samples above one.
    pub fn check_unit_range(&self) -> Result<()> {
        match self.0.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            None => Ok(()),
            Some(k) => Err(Error::Validation(format!(
                "sample {} at {} nm outside [0, 1]",
                self.0[k],
                wavelength_nm(k)
            ))),
        }
    }

    pub fn clamped(&self) -> Self {
        let mut v = self.0;
        for x in &mut v {
            *x = x.clamp(0.0, 1.0);
        }
        Spectrum(v)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut v = self.0;
        for x in &mut v {
            *x = f(*x);
        }
        Spectrum(v)
    }
}

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Spectrum").field(&&self.0[..]).finish()
    }
}

impl core::ops::Index<usize> for Spectrum {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        self.0[..].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        Spectrum::from_slice(&v).map_err(D::Error::custom)
    }
}

/// `(1 - t) * a + t * b` per sample.
pub fn lerp_spectrum(a: &Spectrum, b: &Spectrum, t: f64) -> Result<Spectrum> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("interpolation weight", format!("{t} not in [0, 1]")));
    }
    let mut v = [0.0; SAMPLES];
    for (k, x) in v.iter_mut().enumerate() {
        *x = (1.0 - t) * a.0[k] + t * b.0[k];
    }
    Ok(Spectrum(v))
}

/// A pigment quantity, held as an integer number of microliters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Quantity(u32);

/// Measured quantities in µL: 0.01–0.10 mL, 0.12 mL and 0.16 mL.
pub const CANONICAL_QUANTITIES_UL: [u32; 12] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 120, 160];
/// Step of the interpolated quantity grid (0.002 mL).
pub const GRID_STEP_UL: u32 = 2;
pub const MIN_QUANTITY_UL: u32 = 10;
pub const MAX_QUANTITY_UL: u32 = 160;

impl Quantity {
    pub const fn from_microliters(ul: u32) -> Self {
        Quantity(ul)
    }

    /// Parse a value in mL; it must sit on the 1 µL lattice.
    pub fn from_ml(ml: f64) -> Result<Self> {
        if !ml.is_finite() || ml <= 0.0 {
            return Err(Error::domain("quantity", format!("{ml} mL must be positive")));
        }
        let ul = crate::math::round(ml * 1000.0);
        if crate::math::abs(ul - ml * 1000.0) > 1e-6 || ul > u32::MAX as f64 {
            return Err(Error::domain(
                "quantity",
                format!("{ml} mL is not a whole number of microliters"),
            ));
        }
        Ok(Quantity(ul as u32))
    }

    pub const fn microliters(self) -> u32 {
        self.0
    }

    pub fn ml(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_canonical(self) -> bool {
        CANONICAL_QUANTITIES_UL.contains(&self.0)
    }

    pub fn canonical_index(self) -> Option<usize> {
        CANONICAL_QUANTITIES_UL.iter().position(|&q| q == self.0)
    }

    /// True for multiples of 0.002 mL within [0.01, 0.16] mL.
    pub fn on_grid(self) -> bool {
        (MIN_QUANTITY_UL..=MAX_QUANTITY_UL).contains(&self.0) && self.0 % GRID_STEP_UL == 0
    }

    pub fn check_on_grid(self) -> Result<()> {
        if self.on_grid() {
            Ok(())
        } else {
            Err(Error::domain(
                "quantity",
                format!("{} mL is not a multiple of 0.002 mL within [0.01, 0.16]", self.ml()),
            ))
        }
    }

    pub fn canonical() -> impl Iterator<Item = Quantity> {
        CANONICAL_QUANTITIES_UL.iter().map(|&q| Quantity(q))
    }

    /// The 76-point interpolation grid.
    pub fn grid() -> impl Iterator<Item = Quantity> {
        (MIN_QUANTITY_UL..=MAX_QUANTITY_UL)
            .step_by(GRID_STEP_UL as usize)
            .map(Quantity)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ml())
    }
}

const PIGMENT_NAMES: [&str; 13] = [
    "cadmium red",
    "alizarin crimson",
    "burnt sienna",
    "lemon yellow",
    "cadmium yellow",
    "raw sienna",
    "sap green",
    "cerulean blue",
    "cobalt blue",
    "ultramarine",
    "prussian blue",
    "ivory black",
    "chinese white",
];

pub const PIGMENT_COUNT: usize = 13;

/// One of the 13 primary pigments, `ρ1` … `ρ13`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PigmentId(u8);

impl PigmentId {
    pub fn new(index: u8) -> Result<Self> {
        if (1..=PIGMENT_COUNT as u8).contains(&index) {
            Ok(PigmentId(index))
        } else {
            Err(Error::domain("pigment index", format!("{index} not in 1..=13")))
        }
    }

    pub fn all() -> impl Iterator<Item = PigmentId> {
        (1..=PIGMENT_COUNT as u8).map(PigmentId)
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    /// Zero-based position, handy for array indexing.
    pub const fn ordinal(self) -> usize {
        self.0 as usize - 1
    }

    pub fn name(self) -> &'static str {
        PIGMENT_NAMES[self.ordinal()]
    }

    pub fn symbol(self) -> alloc::string::String {
        format!("ρ{}", self.0)
    }
}

impl TryFrom<u8> for PigmentId {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        PigmentId::new(v)
    }
}

impl From<PigmentId> for u8 {
    fn from(p: PigmentId) -> u8 {
        p.0
    }
}

impl fmt::Display for PigmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ρ{} {}", self.0, self.name())
    }
}

/// Measured (or synthetic) spectra of one pigment at the 12 canonical
/// quantities: reflectance coated on white paper and relative transmittance.
#[derive(Clone, Debug, PartialEq)]
pub struct PigmentRecord {
    pub id: PigmentId,
    reflectance: [Spectrum; 12],
    transmittance: [Spectrum; 12],
}

impl PigmentRecord {
    /// Assemble a record; every canonical quantity must appear exactly once
    /// for both roles.
    pub fn new(
        id: PigmentId,
        reflectance: &[(Quantity, Spectrum)],
        transmittance: &[(Quantity, Spectrum)],
    ) -> Result<Self> {
        fn fill(id: PigmentId, role: &'static str, rows: &[(Quantity, Spectrum)]) -> Result<[Spectrum; 12]> {
            let mut slots: [Option<Spectrum>; 12] = [None; 12];
            for (q, s) in rows {
                let i = q.canonical_index().ok_or_else(|| {
                    Error::Validation(format!(
                        "pigment {}: {} mL is not a measured quantity",
                        id.index(),
                        q.ml()
                    ))
                })?;
                if slots[i].replace(*s).is_some() {
                    return Err(Error::Validation(format!(
                        "pigment {}: duplicate {role} at {} mL",
                        id.index(),
                        q.ml()
                    )));
                }
            }
            let mut out = [Spectrum::flat(0.0); 12];
            for (i, slot) in slots.iter().enumerate() {
                out[i] = slot.ok_or(Error::MissingEntry {
                    pigment: id.index(),
                    quantity_ml: CANONICAL_QUANTITIES_UL[i] as f64 / 1000.0,
                    role,
                })?;
            }
            Ok(out)
        }
        Ok(PigmentRecord {
            id,
            reflectance: fill(id, "Rw", reflectance)?,
            transmittance: fill(id, "T", transmittance)?,
        })
    }

    /// Stored reflectance on white at a canonical quantity.
    pub fn reflectance(&self, q: Quantity) -> Option<&Spectrum> {
        q.canonical_index().map(|i| &self.reflectance[i])
    }

    pub fn transmittance(&self, q: Quantity) -> Option<&Spectrum> {
        q.canonical_index().map(|i| &self.transmittance[i])
    }

    /// `(quantity, reflectance, transmittance)` for the 12 canonical quantities.
    pub fn entries(&self) -> impl Iterator<Item = (Quantity, &Spectrum, &Spectrum)> {
        Quantity::canonical()
            .zip(self.reflectance.iter())
            .zip(self.transmittance.iter())
            .map(|((q, r), t)| (q, r, t))
    }
}

/// Reflectance and transmittance at an arbitrary grid quantity, linearly
/// interpolated between the bracketing measured quantities.
pub fn interpolate_quantity(rec: &PigmentRecord, q: Quantity) -> Result<(Spectrum, Spectrum)> {
    q.check_on_grid()?;
    if let Some(i) = q.canonical_index() {
        return Ok((rec.reflectance[i], rec.transmittance[i]));
    }
    let ul = q.microliters();
    let hi = CANONICAL_QUANTITIES_UL
        .iter()
        .position(|&c| c > ul)
        .expect("on-grid quantity below the largest knot");
    let lo = hi - 1;
    let (q0, q1) = (CANONICAL_QUANTITIES_UL[lo], CANONICAL_QUANTITIES_UL[hi]);
    let t = (ul - q0) as f64 / (q1 - q0) as f64;
    Ok((
        lerp_spectrum(&rec.reflectance[lo], &rec.reflectance[hi], t)?,
        lerp_spectrum(&rec.transmittance[lo], &rec.transmittance[hi], t)?,
    ))
}

/// A primary pigment at one quantity of the 0.002 mL grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimaryEntry {
    pub pigment: PigmentId,
    pub quantity: Quantity,
    pub reflectance: Spectrum,
    pub transmittance: Spectrum,
}

/// Expand records onto the 0.002 mL grid, 76 entries per pigment (988 for
/// the full palette), ordered by pigment then quantity.
pub fn expand_primaries(records: &[PigmentRecord]) -> Result<Vec<PrimaryEntry>> {
    expand_primaries_on(records, &Quantity::grid().collect::<Vec<_>>())
}

/// Like [`expand_primaries`] but over a caller-chosen set of grid quantities.
pub fn expand_primaries_on(records: &[PigmentRecord], quantities: &[Quantity]) -> Result<Vec<PrimaryEntry>> {
    for (i, r) in records.iter().enumerate() {
        if records[..i].iter().any(|o| o.id == r.id) {
            return Err(Error::Validation(format!("pigment {} appears twice", r.id.index())));
        }
    }
    let mut out = Vec::with_capacity(records.len() * quantities.len());
    for rec in records {
        for &q in quantities {
            let (reflectance, transmittance) = interpolate_quantity(rec, q)?;
            out.push(PrimaryEntry {
                pigment: rec.id,
                quantity: q,
                reflectance,
                transmittance,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_record(id: u8) -> PigmentRecord {
        let rows: Vec<(Quantity, Spectrum)> = Quantity::canonical()
            .map(|q| (q, Spectrum::flat(1.0 - q.ml() * 4.0)))
            .collect();
        let trows: Vec<(Quantity, Spectrum)> = Quantity::canonical()
            .map(|q| (q, Spectrum::flat(1.0 - q.ml() * 2.0)))
            .collect();
        PigmentRecord::new(PigmentId::new(id).unwrap(), &rows, &trows).unwrap()
    }

    #[test]
    fn lerp_endpoints_and_midpoint() {
        let a = Spectrum::flat(0.2);
        let b = Spectrum::flat(0.6);
        assert_eq!(lerp_spectrum(&a, &b, 0.0).unwrap(), a);
        assert_eq!(lerp_spectrum(&a, &b, 1.0).unwrap(), b);
        let m = lerp_spectrum(&a, &b, 0.5).unwrap();
        assert!(m.values().iter().all(|v| (v - 0.4).abs() < 1e-15));
        assert!(lerp_spectrum(&a, &b, 1.5).is_err());
        assert!(lerp_spectrum(&a, &b, -0.1).is_err());
    }

    #[test]
    fn wavelengths() {
        assert_eq!(wavelength_nm(0), 380);
        assert_eq!(wavelength_nm(40), 780);
    }

    #[test]
    fn spectrum_rejects_wrong_length_and_nan() {
        assert!(Spectrum::from_slice(&[0.5; 40]).is_err());
        let mut v = [0.5; SAMPLES];
        v[3] = f64::NAN;
        assert!(Spectrum::new(v).is_err());
        let mut v = [0.5; SAMPLES];
        v[3] = 1.2;
        assert!(Spectrum::new(v).unwrap().check_unit_range().is_err());
    }

    #[test]
    fn interpolation_at_knots_and_between() {
        let rec = ramp_record(1);
        let q05 = Quantity::from_ml(0.05).unwrap();
        let (r, t) = interpolate_quantity(&rec, q05).unwrap();
        assert_eq!(&r, rec.reflectance(q05).unwrap());
        assert_eq!(&t, rec.transmittance(q05).unwrap());

        let r10 = rec.reflectance(Quantity::from_ml(0.10).unwrap()).unwrap()[0];
        let r12 = rec.reflectance(Quantity::from_ml(0.12).unwrap()).unwrap()[0];
        let r16 = rec.reflectance(Quantity::from_ml(0.16).unwrap()).unwrap()[0];
        let (r, _) = interpolate_quantity(&rec, Quantity::from_ml(0.11).unwrap()).unwrap();
        assert!((r[0] - 0.5 * (r10 + r12)).abs() < 1e-15);
        let (r, _) = interpolate_quantity(&rec, Quantity::from_ml(0.13).unwrap()).unwrap();
        assert!((r[0] - (r12 + 0.25 * (r16 - r12))).abs() < 1e-15);
    }

    #[test]
    fn interpolation_refuses_off_grid() {
        let rec = ramp_record(1);
        for ul in [8, 162, 11, 0] {
            assert!(interpolate_quantity(&rec, Quantity::from_microliters(ul)).is_err());
        }
    }

    #[test]
    fn grid_has_76_points() {
        // brute force: count multiples of 2 µL in [10, 160]
        let n = (0..=1000u32).filter(|u| *u % 2 == 0 && (10..=160).contains(u)).count();
        assert_eq!(n, 76);
        assert_eq!(Quantity::grid().count(), n);
    }

    #[test]
    fn expansion_counts() {
        let one = expand_primaries(&[ramp_record(1)]).unwrap();
        assert_eq!(one.len(), 76);
        let all: Vec<_> = (1..=13).map(ramp_record).collect();
        let e = expand_primaries(&all).unwrap();
        assert_eq!(e.len(), 988);
        let mut keys: Vec<_> = e.iter().map(|p| (p.pigment, p.quantity)).collect();
        keys.dedup();
        assert_eq!(keys.len(), 988);
        assert!(expand_primaries(&[ramp_record(2), ramp_record(2)]).is_err());
    }

    #[test]
    fn record_missing_quantity_is_reported() {
        let rows: Vec<(Quantity, Spectrum)> = Quantity::canonical()
            .filter(|q| q.microliters() != 120)
            .map(|q| (q, Spectrum::flat(0.5)))
            .collect();
        let full: Vec<(Quantity, Spectrum)> = Quantity::canonical().map(|q| (q, Spectrum::flat(0.5))).collect();
        let err = PigmentRecord::new(PigmentId::new(3).unwrap(), &rows, &full).unwrap_err();
        assert_eq!(
            err,
            Error::MissingEntry {
                pigment: 3,
                quantity_ml: 0.12,
                role: "Rw"
            }
        );
    }

    #[test]
    fn quantity_parsing() {
        assert_eq!(Quantity::from_ml(0.018).unwrap().microliters(), 18);
        assert!(Quantity::from_ml(0.0185).is_err());
        assert!(Quantity::from_ml(0.0).is_err());
        assert!(Quantity::from_ml(0.016).unwrap().on_grid());
        assert!(!Quantity::from_ml(0.017).unwrap().on_grid());
    }

    #[test]
    fn pigment_names() {
        assert_eq!(PigmentId::new(5).unwrap().name(), "cadmium yellow");
        assert_eq!(PigmentId::new(8).unwrap().name(), "cerulean blue");
        assert!(PigmentId::new(0).is_err());
        assert!(PigmentId::new(14).is_err());
    }

    proptest::proptest! {
        #[test]
        fn lerp_is_linear(a in 0.0f64..1.0, b in 0.0f64..1.0, t in 0.0f64..1.0) {
            let sa = Spectrum::flat(a);
            let sb = Spectrum::flat(b);
            let r = lerp_spectrum(&sa, &sb, t).unwrap();
            proptest::prop_assert!((r[7] - a - t * (b - a)).abs() < 1e-12);
        }
    }
}
