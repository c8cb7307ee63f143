//! Per-observation doubly robust estimating functions and the model-DR
//! solver with sandwich standard errors.
//!
//! The target is `θ = P(T > t0)` through `D(T, Z; θ) = 1(T > t0) − θ`, so
//! every estimating function is affine in `θ`: `Ξ_i(θ) = a_i − b_i θ`.

mod censoring;
mod truncation;

pub use censoring::{censoring_coefficients, xi_censoring, xi_censoring_generic};
pub use truncation::{truncation_coefficients, xi_truncation, xi_truncation_generic};

use rayon::prelude::*;

use crate::dgp::{Sample, Scenario};
use crate::error::{Error, Result};
use crate::nuisance::{CoarseningModel, ConditionalHazardModel, NuisancePair};
use crate::numeric::{pairwise_mean, pairwise_sum};

/// Smallest survival or distribution value allowed in a denominator.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Two-sided 95% standard normal quantile.
pub const Z_975: f64 = 1.959964;

pub(crate) fn positivity(what: &'static str, value: f64, time: f64) -> Error {
    Error::Positivity {
        index: None,
        what,
        value,
        time,
    }
}

/// Builds `Ξ_i{H(θ), Q}` for one coarsening problem from an event nuisance
/// and a coarsening nuisance.
#[derive(Debug, Clone, Copy)]
pub struct EstimatingFunctionPlugin<'a> {
    pub scenario: Scenario,
    pub event: &'a ConditionalHazardModel,
    pub coarsening: &'a CoarseningModel,
    pub horizon: f64,
}

impl<'a> EstimatingFunctionPlugin<'a> {
    pub fn new(scenario: Scenario, nuisances: &'a NuisancePair, horizon: f64) -> Self {
        Self {
            scenario,
            event: &nuisances.event,
            coarsening: &nuisances.coarsening,
            horizon,
        }
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.scenario() == self.scenario {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "{} plugin applied to a {} sample",
                self.scenario.name(),
                sample.scenario().name()
            )))
        }
    }

    /// `(a_i, b_i)` for observation `i` (closed-form route).
    pub fn coefficients(&self, sample: &Sample, i: usize) -> Result<(f64, f64)> {
        self.check_sample(sample)?;
        match sample {
            Sample::Censoring(d) => {
                censoring_coefficients(&d.observations[i], self.event, self.coarsening, self.horizon)
            }
            Sample::Truncation(d) => {
                truncation_coefficients(&d.observations[i], self.event, self.coarsening, self.horizon)
            }
        }
        .map_err(|e| e.with_index(i))
    }

    /// Coefficients of every observation, in index order.
    pub fn all_coefficients(&self, sample: &Sample) -> Result<Vec<(f64, f64)>> {
        let results: Vec<Result<(f64, f64)>> = (0..sample.len())
            .into_par_iter()
            .map(|i| self.coefficients(sample, i))
            .collect();
        results.into_iter().collect()
    }

    pub fn xi(&self, sample: &Sample, i: usize, theta: f64) -> Result<f64> {
        let (a, b) = self.coefficients(sample, i)?;
        Ok(a - b * theta)
    }

    /// `Ξ_i(θ)` assembled from paths through the generic integration engine.
    pub fn xi_generic(&self, sample: &Sample, i: usize, theta: f64) -> Result<f64> {
        self.check_sample(sample)?;
        match sample {
            Sample::Censoring(d) => {
                xi_censoring_generic(&d.observations[i], self.event, self.coarsening, theta, self.horizon)
            }
            Sample::Truncation(d) => {
                xi_truncation_generic(&d.observations[i], self.event, self.coarsening, theta, self.horizon)
            }
        }
        .map_err(|e| e.with_index(i))
    }
}

/// Solution of an estimating equation with its sandwich standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResult {
    pub theta_hat: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    /// Estimate of `∂/∂θ E[Ξ]`.
    pub slope: f64,
    /// `mean_i Ξ_i(θ̂)`.
    pub equation_residual: f64,
}

impl EstimateResult {
    fn assemble(theta_hat: f64, xi_at_root: &[f64], slope: f64, equation_residual: f64) -> Result<Self> {
        let n = xi_at_root.len();
        let tol = 1e-8f64.min(1.0 / n as f64);
        if !(equation_residual.abs() <= tol) {
            return Err(Error::Solver(format!(
                "estimating equation residual {equation_residual:e} exceeds {tol:e}"
            )));
        }
        let second: Vec<f64> = xi_at_root.iter().map(|x| x * x).collect();
        let se = (pairwise_mean(&second) / (slope * slope) / n as f64).sqrt();
        Ok(Self {
            theta_hat,
            se,
            ci_low: theta_hat - Z_975 * se,
            ci_high: theta_hat + Z_975 * se,
            n,
            slope,
            equation_residual,
        })
    }

    pub fn covers(&self, theta: f64) -> bool {
        self.ci_low <= theta && theta <= self.ci_high
    }
}

/// Exact root of `Σ_i (a_i − b_i θ) = 0` with the analytic slope `−mean b`.
pub fn solve_linear(coefficients: &[(f64, f64)]) -> Result<EstimateResult> {
    if coefficients.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let a: Vec<f64> = coefficients.iter().map(|c| c.0).collect();
    let b: Vec<f64> = coefficients.iter().map(|c| c.1).collect();
    let sum_b = pairwise_sum(&b);
    if !(sum_b > 0.0) {
        return Err(Error::Solver(format!("sum of slopes {sum_b:e} is not positive")));
    }
    let theta_hat = pairwise_sum(&a) / sum_b;
    if !theta_hat.is_finite() {
        return Err(Error::Solver("non-finite estimate".into()));
    }
    let xi: Vec<f64> = coefficients.iter().map(|(a, b)| a - b * theta_hat).collect();
    let residual = pairwise_mean(&xi);
    EstimateResult::assemble(theta_hat, &xi, -sum_b / coefficients.len() as f64, residual)
}

/// An estimating equation `mean_i Ξ_i(θ) = 0` over `len()` observations.
pub trait EstimatingEquation: Sync {
    fn len(&self) -> usize;

    fn value(&self, i: usize, theta: f64) -> Result<f64>;

    /// `(a_i, b_i)` when `Ξ_i(θ) = a_i − b_i θ`.
    fn linear_coefficients(&self, _i: usize) -> Option<Result<(f64, f64)>> {
        None
    }
}

struct BoundPlugin<'s, 'p> {
    sample: &'s Sample,
    plugin: &'s EstimatingFunctionPlugin<'p>,
}

impl EstimatingEquation for BoundPlugin<'_, '_> {
    fn len(&self) -> usize {
        self.sample.len()
    }

    fn value(&self, i: usize, theta: f64) -> Result<f64> {
        self.plugin.xi(self.sample, i, theta)
    }

    fn linear_coefficients(&self, i: usize) -> Option<Result<(f64, f64)>> {
        Some(self.plugin.coefficients(self.sample, i))
    }
}

fn mean_value<E: EstimatingEquation + ?Sized>(eq: &E, theta: f64) -> Result<(f64, Vec<f64>)> {
    let values: Vec<Result<f64>> = (0..eq.len()).into_par_iter().map(|i| eq.value(i, theta)).collect();
    let values = values.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok((pairwise_mean(&values), values))
}

/// Solves `mean_i Ξ_i(θ) = 0`: exactly when every `Ξ_i` is affine, by
/// bisection on `bracket` otherwise.
pub fn solve_equation<E: EstimatingEquation + ?Sized>(eq: &E, bracket: (f64, f64)) -> Result<EstimateResult> {
    let n = eq.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    if eq.linear_coefficients(0).is_some() {
        let coefs: Vec<Result<(f64, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| eq.linear_coefficients(i).expect("affine equation"))
            .collect();
        return solve_linear(&coefs.into_iter().collect::<Result<Vec<_>>>()?);
    }

    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Solver(format!("empty bracket [{lo}, {hi}]")));
    }
    let tol = 1e-8f64.min(1.0 / n as f64);
    let (mut f_lo, _) = mean_value(eq, lo)?;
    let (f_hi, _) = mean_value(eq, hi)?;
    if f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        return Err(Error::Solver(format!("no sign change on [{lo}, {hi}]")));
    }
    let mut root = None;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (f_mid, values) = mean_value(eq, mid)?;
        if f_mid.abs() <= tol {
            root = Some((mid, f_mid, values));
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    let (theta, residual, values) =
        root.ok_or_else(|| Error::Solver(format!("bisection stalled on [{lo}, {hi}] above tolerance {tol:e}")))?;
    let h = 1e-5 * theta.abs().max(1.0);
    let slope = (mean_value(eq, theta + h)?.0 - mean_value(eq, theta - h)?.0) / (2.0 * h);
    EstimateResult::assemble(theta, &values, slope, residual)
}

/// Model-DR estimate from one sample and fixed nuisances.
pub fn solve_mdr(
    sample: &Sample,
    plugin: &EstimatingFunctionPlugin<'_>,
    bracket: (f64, f64),
) -> Result<EstimateResult> {
    solve_equation(&BoundPlugin { sample, plugin }, bracket)
}
