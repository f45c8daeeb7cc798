//! Modified truncated Euler-Maruyama schemes for neutral stochastic
//! differential delay equations, with condition probes and a coupled
//! Monte Carlo convergence harness.
//!
//! Numerical code is generic over [`Real`]; the aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod paths;
pub mod scalar;
pub mod scheme;
pub mod truncation;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Problem = model::NsddeProblem<f64>;
pub type Policy = truncation::TruncationPolicy<f64>;
pub type Mesh = paths::MeshSpec<f64>;
pub type Grid = paths::BrownianGrid<f64>;
pub type Solution = scheme::PathSolution<f64>;
pub type Sweep = montecarlo::SweepConfig<f64>;
pub type Report = montecarlo::ErrorReport<f64>;
