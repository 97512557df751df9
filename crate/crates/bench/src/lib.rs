//! Shared fixtures for the benchmarks.

use growthsgd::data::generate_margin_data;
use growthsgd::{LossKind, Objective};

/// Squared-hinge objective on unit-norm margin data.
pub fn margin_objective(n: usize, d: usize, tau: f64, seed: u64) -> Objective {
    let data = generate_margin_data(n, d, tau, seed).expect("generator parameters are valid");
    Objective::new(LossKind::SquaredHinge, data).expect("squared hinge accepts any dataset")
}
