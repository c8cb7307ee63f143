//! Fixtures shared by the benchmarks.

use ctdr_core::dgp::{generate, true_nuisance, DgpSpec, Sample};
use ctdr_core::nuisance::NuisancePair;
use ctdr_core::stepfun::StepPath;

/// A sample from the default design of `spec` with its true nuisances.
pub fn sample_with_truth(spec: &DgpSpec, n: usize, seed: u64) -> (Sample, NuisancePair) {
    (
        generate(spec, n, seed).expect("valid default design"),
        true_nuisance(spec),
    )
}

/// Step path with `k` jumps on `(0, 10)`.
pub fn staircase(k: usize, phase: f64) -> StepPath {
    let times: Vec<f64> = (1..=k).map(|j| 10.0 * (j as f64 - phase) / (k as f64 + 1.0)).collect();
    let values: Vec<f64> = (1..=k).map(|j| ((j as f64) * 0.37 + phase).sin()).collect();
    StepPath::new(0.0, times, values).expect("increasing times")
}
