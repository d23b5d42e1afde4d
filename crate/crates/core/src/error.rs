use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("{what} out of range: {detail}")]
    Domain { what: &'static str, detail: String },

    /// Input data failed a structural check.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A pigment/quantity/role triple is absent from a record set.
    #[error("missing entry: pigment {pigment}, quantity {quantity_ml} mL, role {role}")]
    MissingEntry {
        pigment: u8,
        quantity_ml: f64,
        role: &'static str,
    },

    /// A mixture ground truth is absent for a pigment pair.
    #[error("missing mixture ground truth for pigments {pigment_a}+{pigment_b} at {q_a_ml}+{q_b_ml} mL")]
    MissingMixture {
        pigment_a: u8,
        pigment_b: u8,
        q_a_ml: f64,
        q_b_ml: f64,
    },

    /// The network produced a non-finite value for a pair.
    #[error("prediction failed for pigments {pigment_a}+{pigment_b} at {q_a_ml}+{q_b_ml} mL")]
    PredictionFailure {
        pigment_a: u8,
        pigment_b: u8,
        q_a_ml: f64,
        q_b_ml: f64,
    },

    #[error("Kubelka-Munk inversion failed on channel {channel}: {reason}")]
    InversionFailure { channel: usize, reason: &'static str },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("look-up table is empty")]
    EmptyLut,
}

impl Error {
    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}
