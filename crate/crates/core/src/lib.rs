//! Watercolor pigment mixture prediction.
//!
//! The crate covers the whole numeric pipeline for semitransparent pigment
//! mixing: 41-sample spectra and quantity interpolation ([`spectrum`]),
//! CIE colorimetry and ΔE*ab ([`colorimetry`]), the two-constant
//! Kubelka–Munk baseline ([`km`]), dataset labeling, splitting and a
//! synthetic KM corpus ([`dataset`]), the feedforward mixture network
//! ([`mixnet`]), the recipe look-up table ([`palette`]) and evaluation
//! reports ([`eval`]).
//!
//! Everything here is `no_std` + `alloc`. File formats, the CLI and the HTTP
//! service live in the `pigmix` crate.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod colorimetry;
pub mod dataset;
mod error;
pub mod eval;
pub mod km;
pub(crate) mod math;
pub mod mixnet;
pub mod palette;
pub mod spectrum;

pub use error::{Error, Result};
