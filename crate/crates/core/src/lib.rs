//! Robust aperiodic sampled-data washout control for uncertain affine plants.
//!
//! The crate covers the whole pipeline: closed-loop hybrid model
//! ([`model`]), clock-dependent polynomial certificates ([`polymatrix`]),
//! a small semidefinite-programming layer ([`sdp`]) with an interval
//! sum-of-squares compiler ([`sos`]), controller synthesis and the
//! maximum-`T2` sweep ([`synthesis`]), certificate and stability checks
//! ([`verification`]) and an exact hybrid simulator ([`sim`]).

pub mod error;
pub mod linalg;
pub mod model;
pub mod polymatrix;
pub mod sdp;
mod serde_matrix;
pub mod sim;
pub mod sos;
pub mod synthesis;
pub mod verification;

pub use error::{Error, Result};
