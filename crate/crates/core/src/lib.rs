//! Numerical laboratory for the epistemically restricted phase-space model:
//! a momentum field estimated from positions by `d_q S`, with a single-shot
//! error driven by a global random variable `xi` of variance `hbar^2`.
//!
//! The crate computes the model's mean-squared errors, Fisher information,
//! dispersions and uncertainty relations by quadrature on uniform grids,
//! cross-checks them against wave-function expectation values and Monte
//! Carlo sampling, and audits estimation independence on product
//! preparations.

pub mod audit;
pub mod error;
pub mod estimation;
pub mod grid;
pub mod preparation;
pub mod sampler;
pub mod uncertainty;

pub use error::{Error, Result};
