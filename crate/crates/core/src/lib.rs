//! Reduced-order models of parametric LTI systems by direct optimization of a
//! stability-preserving parameterization in the H-infinity x L-infinity error.

// `!(x > 0.0)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fom;
pub mod function;
pub mod ini;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod optimizer;
pub mod reshape;
pub mod rom;
pub mod sampling;

pub use error::{Error, Result};
