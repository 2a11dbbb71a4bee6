//! Tuning-parameter selection over a solution path.

mod bic;
mod kappa;
mod stability;

pub use bic::{bic, select_bic, BicReport};
pub use kappa::kappa;
pub use stability::{
    draw_weights, perturbed_fit, stability_curve, stability_curve_with_pairs, RandomWeights,
    StabilityReport, MAX_PAIR_FAILURE_RATE,
};
