//! Precision of dissipation-rate estimation for a damped bosonic mode under
//! linear and Kerr controls, and the trade-off against state fidelity.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod fock;
pub mod metrology;
pub mod optimize;

pub use error::{Error, Result};
pub use fock::{ComplexMatrix, DensityMatrix, StateVector, SystemConfig, C64};
