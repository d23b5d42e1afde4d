//! CIE colorimetry under D65 with the 1931 2° observer: spectrum → XYZ →
//! sRGB / CIELAB, and the ΔE*ab color difference.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::spectrum::{wavelength_nm, Spectrum, SAMPLES};
use crate::{Error, Result};

/// Color differences at or above this are seen as different colors by an
/// average observer.
pub const DISTINGUISHABLE_DELTA_E: f64 = 5.0;

const TABLE_ASSET: &str = include_str!("../assets/cie1931_2deg_d65_10nm.txt");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Xyz {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Lab { l, a, b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Srgb8 {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Srgb8 {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Srgb8 { r, g, b }
    }

    pub fn to_array(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// Color-matching functions and the D65 spectral power distribution at the
/// 41 sample wavelengths.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverTables {
    pub cmf_x: Spectrum,
    pub cmf_y: Spectrum,
    pub cmf_z: Spectrum,
    pub illuminant_d65: Spectrum,
}

impl ObserverTables {
    /// The embedded CIE 1931 2° / D65 table.
    pub fn cie1931_d65() -> Self {
        Self::parse(TABLE_ASSET).expect("embedded observer table is well formed")
    }

    /// Parse the text table: `#` comments, then 41 rows of
    /// `wavelength x̄ ȳ z̄ d65`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cols = [[0.0f64; SAMPLES]; 4];
        let mut row = 0;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if row == SAMPLES {
                return Err(Error::Validation("observer table has extra rows".into()));
            }
            let mut it = line.split_whitespace();
            let wl: u32 = it
                .next()
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| Error::Validation(format!("bad wavelength in row {row}")))?;
            if wl != wavelength_nm(row) {
                return Err(Error::Validation(format!(
                    "row {row}: expected {} nm, found {wl}",
                    wavelength_nm(row)
                )));
            }
            for col in cols.iter_mut() {
                col[row] = it
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Validation(format!("bad value at {wl} nm")))?;
            }
            row += 1;
        }
        if row != SAMPLES {
            return Err(Error::Validation(format!("observer table has {row} rows")));
        }
        let [x, y, z, d] = cols;
        let tables = ObserverTables {
            cmf_x: Spectrum::new(x)?,
            cmf_y: Spectrum::new(y)?,
            cmf_z: Spectrum::new(z)?,
            illuminant_d65: Spectrum::new(d)?,
        };
        if tables.cmf_y.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Validation("negative ȳ value".into()));
        }
        Ok(tables)
    }
}

/// Precomputed integration weights for repeated conversions.
#[derive(Clone, Debug)]
pub struct Colorimeter {
    weight_x: [f64; SAMPLES],
    weight_y: [f64; SAMPLES],
    weight_z: [f64; SAMPLES],
    norm: f64,
    white: Xyz,
}

impl Colorimeter {
    pub fn new(tables: &ObserverTables) -> Self {
        let d65 = tables.illuminant_d65.values();
        let mut weight_x = [0.0; SAMPLES];
        let mut weight_y = [0.0; SAMPLES];
        let mut weight_z = [0.0; SAMPLES];
        for k in 0..SAMPLES {
            weight_x[k] = d65[k] * tables.cmf_x[k];
            weight_y[k] = d65[k] * tables.cmf_y[k];
            weight_z[k] = d65[k] * tables.cmf_z[k];
        }
        let norm: f64 = weight_y.iter().sum();
        let mut c = Colorimeter {
            weight_x,
            weight_y,
            weight_z,
            norm,
            white: Xyz { x: 0.0, y: 0.0, z: 0.0 },
        };
        c.white = c.xyz(&Spectrum::flat(1.0));
        c
    }

    pub fn standard() -> Self {
        Self::new(&ObserverTables::cie1931_d65())
    }

    /// XYZ of a perfect reflector, `Y = 100`.
    pub fn white(&self) -> Xyz {
        self.white
    }

    /// Rectangle-rule integration over the 41 samples, normalized so the
    /// illuminant has `Y = 100`.
    pub fn xyz(&self, r: &Spectrum) -> Xyz {
        let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
        for (k, &v) in r.values().iter().enumerate() {
            x += v * self.weight_x[k];
            y += v * self.weight_y[k];
            z += v * self.weight_z[k];
        }
        Xyz {
            x: x / self.norm * 100.0,
            y: y / self.norm * 100.0,
            z: z / self.norm * 100.0,
        }
    }

    pub fn lab(&self, r: &Spectrum) -> Lab {
        xyz_to_lab(self.xyz(r), self.white)
    }

    pub fn srgb8(&self, r: &Spectrum) -> Srgb8 {
        xyz_to_srgb8(self.xyz(r))
    }

    /// CIELAB of an 8-bit sRGB color (sRGB decode → XYZ → Lab).
    pub fn srgb8_to_lab(&self, c: Srgb8) -> Lab {
        xyz_to_lab(linear_rgb_to_xyz(srgb8_to_linear(c)), self.white)
    }

    pub fn linear_rgb_to_lab(&self, rgb: [f64; 3]) -> Lab {
        xyz_to_lab(linear_rgb_to_xyz(rgb), self.white)
    }
}

pub fn spectrum_to_xyz(r: &Spectrum, tables: &ObserverTables) -> Xyz {
    Colorimeter::new(tables).xyz(r)
}

const XYZ_TO_LINEAR_SRGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

const LINEAR_SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

/// Linear sRGB (unclamped) from XYZ on the `Y = 100` scale.
pub fn xyz_to_linear_rgb(c: Xyz) -> [f64; 3] {
    let v = [c.x / 100.0, c.y / 100.0, c.z / 100.0];
    let m = &XYZ_TO_LINEAR_SRGB;
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn linear_rgb_to_xyz(rgb: [f64; 3]) -> Xyz {
    let m = &LINEAR_SRGB_TO_XYZ;
    Xyz {
        x: 100.0 * (m[0][0] * rgb[0] + m[0][1] * rgb[1] + m[0][2] * rgb[2]),
        y: 100.0 * (m[1][0] * rgb[0] + m[1][1] * rgb[1] + m[1][2] * rgb[2]),
        z: 100.0 * (m[2][0] * rgb[0] + m[2][1] * rgb[1] + m[2][2] * rgb[2]),
    }
}

fn gamma_encode(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * math::powf(c, 1.0 / 2.4) - 0.055
    }
}

fn gamma_decode(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        math::powf((c + 0.055) / 1.055, 2.4)
    }
}

/// Encode linear RGB, clamping each channel to `[0, 1]` first.
pub fn linear_to_srgb8(rgb: [f64; 3]) -> Srgb8 {
    let enc = |c: f64| -> u8 {
        let c = if c.is_nan() { 0.0 } else { c.clamp(0.0, 1.0) };
        math::round(gamma_encode(c) * 255.0) as u8
    };
    Srgb8::new(enc(rgb[0]), enc(rgb[1]), enc(rgb[2]))
}

pub fn srgb8_to_linear(c: Srgb8) -> [f64; 3] {
    let dec = |v: u8| gamma_decode(v as f64 / 255.0);
    [dec(c.r), dec(c.g), dec(c.b)]
}

pub fn xyz_to_srgb8(c: Xyz) -> Srgb8 {
    linear_to_srgb8(xyz_to_linear_rgb(c))
}

const LAB_EPSILON: f64 = (6.0 / 29.0) * (6.0 / 29.0) * (6.0 / 29.0);

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        math::cbrt(t)
    } else {
        t / (3.0 * (6.0 / 29.0) * (6.0 / 29.0)) + 4.0 / 29.0
    }
}

pub fn xyz_to_lab(c: Xyz, white: Xyz) -> Lab {
    let fx = lab_f(c.x / white.x);
    let fy = lab_f(c.y / white.y);
    let fz = lab_f(c.z / white.z);
    Lab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// CIE76 ΔE*ab, the Euclidean distance in CIELAB.
pub fn delta_e_ab(p: Lab, q: Lab) -> f64 {
    let (dl, da, db) = (p.l - q.l, p.a - q.a, p.b - q.b);
    math::sqrt(dl * dl + da * da + db * db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_point_close_to_d65() {
        let c = Colorimeter::standard();
        let w = c.white();
        assert_eq!(w.y, 100.0);
        assert!((w.x - 95.047).abs() < 0.5, "{w:?}");
        assert!((w.z - 108.883).abs() < 0.5, "{w:?}");
        let t = ObserverTables::cie1931_d65();
        assert_eq!(spectrum_to_xyz(&Spectrum::flat(1.0), &t), w);
    }

    #[test]
    fn flat_spectra() {
        let c = Colorimeter::standard();
        let zero = c.xyz(&Spectrum::flat(0.0));
        assert_eq!((zero.x, zero.y, zero.z), (0.0, 0.0, 0.0));
        let half = c.xyz(&Spectrum::flat(0.5));
        let w = c.white();
        assert_eq!((half.x, half.y, half.z), (w.x / 2.0, w.y / 2.0, w.z / 2.0));
        assert_eq!(c.srgb8(&Spectrum::flat(1.0)), Srgb8::new(255, 255, 255));
        assert_eq!(c.srgb8(&Spectrum::flat(0.0)), Srgb8::new(0, 0, 0));
        let g = c.srgb8(&Spectrum::flat(0.5));
        let (lo, hi) = (g.r.min(g.g).min(g.b), g.r.max(g.g).max(g.b));
        assert!(hi - lo <= 2, "{g:?}");
    }

    #[test]
    fn lab_anchors() {
        let c = Colorimeter::standard();
        let w = c.white();
        let lw = xyz_to_lab(w, w);
        assert_eq!((lw.l, lw.a, lw.b), (100.0, 0.0, 0.0));
        let l0 = xyz_to_lab(Xyz { x: 0.0, y: 0.0, z: 0.0 }, w);
        assert_eq!((l0.l, l0.a, l0.b), (0.0, 0.0, 0.0));
        let half = Xyz {
            x: w.x / 2.0,
            y: 50.0,
            z: w.z / 2.0,
        };
        let lh = xyz_to_lab(half, w);
        let want = 116.0 * 0.5f64.powf(1.0 / 3.0) - 16.0;
        assert!((lh.l - want).abs() < 0.01, "{lh:?}");
        assert!((lh.l - 76.069).abs() < 0.001);
        assert!(lh.a.abs() < 1e-12 && lh.b.abs() < 1e-12);
    }

    #[test]
    fn delta_e_examples() {
        let p = Lab::new(50.0, 0.0, 0.0);
        let q = Lab::new(50.0, 3.0, 4.0);
        assert_eq!(delta_e_ab(p, p), 0.0);
        assert_eq!(delta_e_ab(p, q), 5.0);
        assert_eq!(delta_e_ab(q, p), 5.0);
    }

    #[test]
    fn gray_axis_is_monotone() {
        let c = Colorimeter::standard();
        let mut last = -1.0;
        for i in 0..=20 {
            let l = c.lab(&Spectrum::flat(i as f64 / 20.0)).l;
            assert!(l > last);
            last = l;
        }
    }

    #[test]
    fn srgb_roundtrip_through_lab_is_close() {
        let c = Colorimeter::standard();
        let white = c.srgb8_to_lab(Srgb8::new(255, 255, 255));
        assert!((white.l - 100.0).abs() < 0.1);
        assert!(white.a.abs() < 0.5 && white.b.abs() < 0.5, "{white:?}");
    }

    #[test]
    fn table_parser_rejects_short_table() {
        let short: alloc::string::String = TABLE_ASSET.lines().take(20).collect::<alloc::vec::Vec<_>>().join("\n");
        assert!(ObserverTables::parse(&short).is_err());
    }

    proptest::proptest! {
        #[test]
        fn xyz_is_linear(alpha in 0.0f64..1.0, base in 0.0f64..1.0) {
            let c = Colorimeter::standard();
            let r = Spectrum::from_fn(|wl| base * (wl / 780.0)).unwrap();
            let scaled = r.map(|v| alpha * v);
            let a = c.xyz(&r);
            let b = c.xyz(&scaled);
            proptest::prop_assert!((b.x - alpha * a.x).abs() < 1e-9);
            proptest::prop_assert!((b.y - alpha * a.y).abs() < 1e-9);
            proptest::prop_assert!((b.z - alpha * a.z).abs() < 1e-9);
        }

        #[test]
        fn delta_e_is_a_metric(
            p in proptest::array::uniform3(-100.0f64..100.0),
            q in proptest::array::uniform3(-100.0f64..100.0),
            r in proptest::array::uniform3(-100.0f64..100.0),
        ) {
            let (p, q, r) = (Lab::new(p[0], p[1], p[2]), Lab::new(q[0], q[1], q[2]), Lab::new(r[0], r[1], r[2]));
            proptest::prop_assert!(delta_e_ab(p, q) >= 0.0);
            proptest::prop_assert_eq!(delta_e_ab(p, q), delta_e_ab(q, p));
            proptest::prop_assert!(delta_e_ab(p, r) <= delta_e_ab(p, q) + delta_e_ab(q, r) + 1e-9);
        }
    }
}
