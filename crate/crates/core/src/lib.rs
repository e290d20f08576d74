//! Numerical laboratory for parabolic equations with rough coefficients.
//!
//! Periodic grids in one or two dimensions carry a dyadic time ladder on
//! which weighted tent-type norms are evaluated, Duhamel operators of the
//! divergence-form heat flow are probed for hypercontractivity, and a Picard
//! iteration solves the semilinear reaction-diffusion problem.

pub mod cli;
pub mod coefficients;
pub mod duhamel;
pub mod ensemble;
pub mod error;
pub mod exponents;
pub mod geometry;
pub mod operator;
pub mod pipeline;
pub mod solver;
pub mod spaces;
pub mod suite;
pub mod verify;

pub use error::{Error, Result};
