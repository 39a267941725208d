//! Inner minimization and the outer bisection over the error level.

mod lbfgs;
mod sobmor;

pub use lbfgs::{minimize, LbfgsOptions, Minimum, Termination};
pub use sobmor::{sobmor, BisectionStep, BisectionTrace, SobmorOptions, SobmorResult};
