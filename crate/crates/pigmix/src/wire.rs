//! JSON documents shared by the CLI and the HTTP service.
//!
//! Both front ends call the same builders and [`to_json`], so identical
//! inputs and artifacts give identical bytes. Schemas live in `docs/api/`.

use pigmix_core::colorimetry::{Colorimeter, Lab, Srgb8};
use pigmix_core::palette::{mix_preview, Recipe};
use pigmix_core::spectrum::{
    interpolate_quantity, PigmentId, PigmentRecord, Quantity, Spectrum, WAVELENGTH_START_NM, WAVELENGTH_STEP_NM,
};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::lut_file::LoadedLut;
use crate::model_file::LoadedModel;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_TOP_K: usize = 5;
/// Upper bound on `top_k` so a single request stays cheap.
pub const MAX_TOP_K: usize = 100;

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("wire types serialize");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigmentRef {
    pub index: u8,
    pub name: String,
    pub symbol: String,
}

impl From<PigmentId> for PigmentRef {
    fn from(p: PigmentId) -> Self {
        PigmentRef {
            index: p.index(),
            name: p.name().into(),
            symbol: p.symbol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorWire {
    pub rgb: [u8; 3],
    pub hex: String,
    pub lab: [f64; 3],
}

impl ColorWire {
    pub fn new(rgb: Srgb8, lab: Lab) -> Self {
        ColorWire {
            rgb: rgb.to_array(),
            hex: format!("#{:02x}{:02x}{:02x}", rgb.r, rgb.g, rgb.b),
            lab: [lab.l, lab.a, lab.b],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityFlagsWire {
    pub good_ratio: bool,
    pub good_match: bool,
}

/// One recipe; quantities are given in mL and in µL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecipeWire {
    pub pigment_a: PigmentRef,
    pub qa: f64,
    pub qa_ul: u32,
    pub pigment_b: PigmentRef,
    pub qb: f64,
    pub qb_ul: u32,
    pub rgb: [u8; 3],
    pub hex: String,
    /// Stored table value (32-bit), widened.
    pub lab: [f64; 3],
    pub delta_e: f64,
    pub ratio_gap: f64,
    pub quality_flags: QualityFlagsWire,
}

impl From<&Recipe> for RecipeWire {
    fn from(r: &Recipe) -> Self {
        let e = &r.entry;
        RecipeWire {
            pigment_a: e.pigment_a.into(),
            qa: e.q_a.ml(),
            qa_ul: e.q_a.microliters(),
            pigment_b: e.pigment_b.into(),
            qb: e.q_b.ml(),
            qb_ul: e.q_b.microliters(),
            rgb: e.rgb.to_array(),
            hex: format!("#{:02x}{:02x}{:02x}", e.rgb.r, e.rgb.g, e.rgb.b),
            lab: e.lab.map(f64::from),
            delta_e: r.delta_e_to_target,
            ratio_gap: r.ratio_gap,
            quality_flags: QualityFlagsWire {
                good_ratio: r.quality_flags.good_ratio,
                good_match: r.quality_flags.good_match,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchProvenance {
    pub model_hash: String,
    pub lut_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchResponse {
    pub schema_version: u32,
    pub provenance: MatchProvenance,
    pub target: ColorWire,
    pub recipes: Vec<RecipeWire>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRequest {
    pub rgb: [u8; 3],
    #[serde(default)]
    pub top_k: Option<usize>,
}

pub fn check_top_k(k: usize) -> AppResult<usize> {
    if k == 0 || k > MAX_TOP_K {
        return Err(AppError::Usage(format!("top_k must be in 1..={MAX_TOP_K}, got {k}")));
    }
    Ok(k)
}

pub fn match_response(
    lut: &LoadedLut,
    colorimeter: &Colorimeter,
    rgb: Srgb8,
    top_k: usize,
) -> AppResult<MatchResponse> {
    let k = check_top_k(top_k)?;
    let recipes = lut.lut.match_top_k(colorimeter, rgb, k)?;
    Ok(MatchResponse {
        schema_version: SCHEMA_VERSION,
        provenance: MatchProvenance {
            model_hash: hex::encode(lut.lut.provenance().model_hash),
            lut_hash: hex::encode(lut.hash),
        },
        target: ColorWire::new(rgb, colorimeter.srgb8_to_lab(rgb)),
        recipes: recipes.iter().map(RecipeWire::from).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixRequest {
    pub pa: u8,
    /// mL, on the 0.002 mL grid within [0.01, 0.16].
    pub qa: f64,
    pub pb: u8,
    pub qb: f64,
}

impl MixRequest {
    pub fn resolve(&self) -> AppResult<((PigmentId, Quantity), (PigmentId, Quantity))> {
        let side = |p: u8, q: f64| -> AppResult<(PigmentId, Quantity)> {
            let q = Quantity::from_ml(q)?;
            q.check_on_grid()?;
            Ok((PigmentId::new(p)?, q))
        };
        Ok((side(self.pa, self.qa)?, side(self.pb, self.qb)?))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngredientWire {
    pub pigment: PigmentRef,
    pub q: f64,
    pub q_ul: u32,
    pub color: ColorWire,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumWire {
    pub start_nm: u32,
    pub step_nm: u32,
    pub values: Vec<f64>,
}

impl From<&Spectrum> for SpectrumWire {
    fn from(s: &Spectrum) -> Self {
        SpectrumWire {
            start_nm: WAVELENGTH_START_NM,
            step_nm: WAVELENGTH_STEP_NM,
            values: s.values().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixResponse {
    pub schema_version: u32,
    pub model_hash: String,
    pub a: IngredientWire,
    pub b: IngredientWire,
    pub mixture: ColorWire,
    pub spectrum: SpectrumWire,
}

pub fn mix_response(
    model: &LoadedModel,
    records: &[PigmentRecord],
    substrate: &Spectrum,
    colorimeter: &Colorimeter,
    req: &MixRequest,
) -> AppResult<MixResponse> {
    let ((pa, qa), (pb, qb)) = req.resolve()?;
    let (preview, mix) = mix_preview(&model.weights, records, substrate, colorimeter, (pa, qa), (pb, qb))?;
    let ingredient = |p: PigmentId, q: Quantity, rgb: Srgb8| -> AppResult<IngredientWire> {
        let rec = records
            .iter()
            .find(|r| r.id == p)
            .ok_or_else(|| AppError::Internal(format!("no record for pigment {}", p.index())))?;
        let (r, _) = interpolate_quantity(rec, q)?;
        Ok(IngredientWire {
            pigment: p.into(),
            q: q.ml(),
            q_ul: q.microliters(),
            color: ColorWire::new(rgb, colorimeter.lab(&r)),
        })
    };
    Ok(MixResponse {
        schema_version: SCHEMA_VERSION,
        model_hash: model.hash_hex(),
        a: ingredient(pa, qa, preview.a)?,
        b: ingredient(pb, qb, preview.b)?,
        mixture: ColorWire::new(preview.mixture, colorimeter.lab(&mix)),
        spectrum: (&mix).into(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwatchWire {
    pub q: f64,
    pub q_ul: u32,
    pub rgb: [u8; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigmentWire {
    #[serde(flatten)]
    pub pigment: PigmentRef,
    pub swatches: Vec<SwatchWire>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PigmentsResponse {
    pub schema_version: u32,
    pub substrate_rgb: [u8; 3],
    pub pigments: Vec<PigmentWire>,
}

/// Every pigment at every grid quantity, as coated on the paper.
pub fn pigments_response(
    records: &[PigmentRecord],
    substrate: &Spectrum,
    colorimeter: &Colorimeter,
) -> AppResult<PigmentsResponse> {
    let pigments = records
        .iter()
        .map(|rec| {
            let swatches = Quantity::grid()
                .map(|q| {
                    let (r, _) = interpolate_quantity(rec, q)?;
                    Ok(SwatchWire {
                        q: q.ml(),
                        q_ul: q.microliters(),
                        rgb: colorimeter.srgb8(&r).to_array(),
                    })
                })
                .collect::<AppResult<Vec<_>>>()?;
            Ok(PigmentWire {
                pigment: rec.id.into(),
                swatches,
            })
        })
        .collect::<AppResult<Vec<_>>>()?;
    Ok(PigmentsResponse {
        schema_version: SCHEMA_VERSION,
        substrate_rgb: colorimeter.srgb8(substrate).to_array(),
        pigments,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactStatus {
    pub ready: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub schema_version: u32,
    /// "ok" when every artifact loaded, otherwise "degraded".
    pub status: String,
    pub pigments: ArtifactStatus,
    pub model: ArtifactStatus,
    pub lut: ArtifactStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lut_entries: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub schema_version: u32,
    pub error: ErrorBody,
}

#[cfg(test)]
mod tests {
    use super::*;
    use pigmix_core::palette::LutEntry;

    #[test]
    fn recipe_fields() {
        let e = LutEntry {
            pigment_a: PigmentId::new(3).unwrap(),
            pigment_b: PigmentId::new(11).unwrap(),
            q_a: Quantity::from_microliters(40),
            q_b: Quantity::from_microliters(120),
            lab: [50.0, 1.5, -2.25],
            rgb: Srgb8::new(64, 108, 57),
        };
        let r = Recipe::new(e, Lab::new(50.0, 1.5, 1.75));
        let v = serde_json::to_value(RecipeWire::from(&r)).unwrap();
        assert_eq!(v["pigment_a"]["index"], 3);
        assert_eq!(v["qa"], 0.04);
        assert_eq!(v["qb_ul"], 120);
        assert_eq!(v["delta_e"], 4.0);
        assert_eq!(v["ratio_gap"], 0.5);
        assert_eq!(v["hex"], "#406c39");
        assert_eq!(v["quality_flags"]["good_match"], true);
        assert_eq!(v["quality_flags"]["good_ratio"], false);
    }

    #[test]
    fn mix_request_validation() {
        let ok = MixRequest {
            pa: 1,
            qa: 0.04,
            pb: 13,
            qb: 0.16,
        };
        assert!(ok.resolve().is_ok());
        for bad in [
            MixRequest { qa: 0.0, ..ok.clone() },
            MixRequest {
                qa: 0.041,
                ..ok.clone()
            },
            MixRequest { qb: 0.2, ..ok.clone() },
            MixRequest { pa: 0, ..ok.clone() },
            MixRequest { pb: 14, ..ok.clone() },
        ] {
            assert!(bad.resolve().is_err(), "{bad:?}");
        }
        assert!(check_top_k(0).is_err());
        assert!(check_top_k(MAX_TOP_K + 1).is_err());
    }
}
