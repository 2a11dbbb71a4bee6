//! Penalized weighted least squares (PWLS) for simultaneous outlier detection
//! and robust linear regression.
//!
//! Each observation carries a weight `w_i ∈ (0, 1]` and the estimator
//! penalizes `|log w_i|`; observations whose fitted weight drops below one are
//! flagged as outliers. The crate provides the estimator and its adaptive
//! variant ([`solver`]), the equivalent redescending M-estimator
//! ([`m_equiv`]), BIC and random-weighting stability tuning ([`tuning`]), a
//! heteroscedastic extension ([`hetero`]) and simulation benchmarks
//! ([`simbench`]).
//!
//! The numerical core is generic over the scalar type through [`Real`];
//! the aliases below fix it to `f64`.

pub mod error;
pub mod hetero;
pub mod m_equiv;
pub mod numerics;
mod scalar;
pub mod simbench;
pub mod solver;
pub mod tuning;

pub use error::{Error, Result};
pub use numerics::Dataset;
pub use scalar::Real;
pub use solver::{PathTop, PenaltyScales, PwlsFit, SolutionPath, SolverConfig};

pub type Dataset64 = numerics::Dataset<f64>;
pub type Dataset32 = numerics::Dataset<f32>;
pub type PwlsFit64 = solver::PwlsFit<f64>;
pub type SolutionPath64 = solver::SolutionPath<f64>;
pub type PenaltyScales64 = solver::PenaltyScales<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type MConfig64 = m_equiv::MConfig<f64>;
pub type StabilityReport64 = tuning::StabilityReport<f64>;
pub type HpwlsFit64 = hetero::HpwlsFit<f64>;
pub type VarianceModel64 = hetero::VarianceModel<f64>;
