//! Disease-informed neural networks for compartmental epidemic models.
//!
//! A small MLP of time is trained so that its outputs both match observed
//! compartment counts and satisfy the model's ODE system, while the unknown
//! rates are learned as extra trainable values. Classical least-squares
//! baselines and an adaptive integrator are included for comparison.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod autodiff;
pub mod baselines;
pub mod dataset;
pub mod dinn;
pub mod error;
pub mod experiments;
pub mod integrate;
pub mod models;

pub use error::{Error, Result};
