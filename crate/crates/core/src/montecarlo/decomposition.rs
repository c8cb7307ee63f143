use rayon::prelude::*;

use super::{EstimatorKind, ScenarioConfig};
use crate::crossfit::PluginTemplate;
use crate::dgp::{selection_probability, true_estimand, true_nuisance, DgpSpec, Sample, Scenario};
use crate::error::{Error, Result};
use crate::estimator::solve_linear;
use crate::nuisance::{NuisanceMode, NuisancePair};
use crate::numeric::pairwise_mean;

/// Largest tolerated reconstruction residual.
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;

/// `E[b_i]` under the true nuisances, the population slope of the
/// estimating equation up to sign.
pub fn limit_mean_slope(dgp: &DgpSpec) -> f64 {
    match dgp.scenario {
        Scenario::Censoring => 1.0,
        Scenario::Truncation => 1.0 / selection_probability(dgp),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionRow {
    pub rep: usize,
    pub n: usize,
    pub theta: f64,
    /// `T1 … T6`.
    pub terms: [f64; 6],
    /// `P_n Ξ(Ĥ, Q̂; θ)`.
    pub equation_value: f64,
    pub reconstruction_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    pub rows: Vec<DecompositionRow>,
}

impl DecompositionReport {
    /// Mean of `|√n · T_k|` over replications, for `k` in `1..=6`.
    pub fn mean_abs_scaled(&self, k: usize) -> f64 {
        let v: Vec<f64> = self
            .rows
            .iter()
            .map(|r| (r.n as f64).sqrt() * r.terms[k - 1].abs())
            .collect();
        pairwise_mean(&v)
    }
}

/// Six-term split of `P_n Ξ(Ĥ, Q̂; θ)` around the true nuisances `(H, Q)`:
///
/// - `T1 = P_n[Ξ(Ĥ,Q̂) − Ξ(Ĥ,Q) − Ξ(H,Q̂) + Ξ(H,Q)](θ)`, the cross term;
/// - `T2 = P_n[Ξ(Ĥ,Q) − Ξ(H,Q)](θ)` and `T3 = P_n[Ξ(H,Q̂) − Ξ(H,Q)](θ)`;
/// - `T4 = (P_n − P)[Ξ(H,Q;θ) − Ξ(H,Q;θ0)]`;
/// - `T5 = (P_n − P) Ξ(H,Q;θ0)`;
/// - `T6 = P Ξ(H,Q;θ)`.
///
/// The population terms use `P Ξ(H,Q;θ) = −(θ − θ0) · mean_slope`.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_terms(
    sample: &Sample,
    template: PluginTemplate,
    fitted: &NuisancePair,
    truth: &NuisancePair,
    theta: f64,
    theta0: f64,
    mean_slope: f64,
) -> Result<([f64; 6], f64, f64)> {
    let mixed_h = NuisancePair {
        event: fitted.event.clone(),
        coarsening: truth.coarsening.clone(),
    };
    let mixed_q = NuisancePair {
        event: truth.event.clone(),
        coarsening: fitted.coarsening.clone(),
    };
    let hat = template.build(fitted).all_coefficients(sample)?;
    let h_only = template.build(&mixed_h).all_coefficients(sample)?;
    let q_only = template.build(&mixed_q).all_coefficients(sample)?;
    let star = template.build(truth).all_coefficients(sample)?;
    let xi = |c: (f64, f64)| c.0 - c.1 * theta;
    let n = sample.len();
    let mean_of = |f: &dyn Fn(usize) -> f64| pairwise_mean(&(0..n).map(f).collect::<Vec<_>>());

    let t1 = mean_of(&|i| xi(hat[i]) - xi(h_only[i]) - xi(q_only[i]) + xi(star[i]));
    let t2 = mean_of(&|i| xi(h_only[i]) - xi(star[i]));
    let t3 = mean_of(&|i| xi(q_only[i]) - xi(star[i]));
    let mean_a = mean_of(&|i| star[i].0);
    let mean_b = mean_of(&|i| star[i].1);
    let t4 = -(theta - theta0) * (mean_b - mean_slope);
    let t5 = mean_a - theta0 * mean_b;
    let t6 = -(theta - theta0) * mean_slope;
    let terms = [t1, t2, t3, t4, t5, t6];
    let value = mean_of(&|i| xi(hat[i]));
    let residual = (terms.iter().sum::<f64>() - value).abs();
    if !(residual <= RECONSTRUCTION_TOLERANCE) {
        return Err(Error::Internal(format!(
            "decomposition residual {residual:e} exceeds {RECONSTRUCTION_TOLERANCE:e}"
        )));
    }
    Ok((terms, value, residual))
}

/// Decomposes every replication of a model-DR scenario at its estimate.
///
/// The nuisance limits must be the true hazards, so misspecified modes and
/// cross-fitting are rejected.
pub fn decomposition_study(config: &ScenarioConfig) -> Result<DecompositionReport> {
    config.validate()?;
    if config.estimator != EstimatorKind::Mdr {
        return Err(Error::Config(
            "the decomposition is defined for the model-DR estimator".into(),
        ));
    }
    for spec in [&config.event, &config.coarsening] {
        if spec.mode == NuisanceMode::FittedMisspecified {
            return Err(Error::Config(
                "the decomposition needs nuisances that converge to the truth".into(),
            ));
        }
    }
    let truth = true_nuisance(&config.dgp);
    let theta0 = true_estimand(&config.dgp);
    let mean_slope = limit_mean_slope(&config.dgp);
    let rows: Vec<Result<DecompositionRow>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let sample = config.replication_sample(rep)?;
            let fitted = config.realize(&sample)?;
            let estimate = solve_linear(&config.template().build(&fitted).all_coefficients(&sample)?)?;
            let (terms, equation_value, reconstruction_residual) = decomposition_terms(
                &sample,
                config.template(),
                &fitted,
                &truth,
                estimate.theta_hat,
                theta0,
                mean_slope,
            )?;
            Ok(DecompositionRow {
                rep,
                n: config.n,
                theta: estimate.theta_hat,
                terms,
                equation_value,
                reconstruction_residual,
            })
        })
        .collect();
    Ok(DecompositionReport {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, DgpSpec};

    #[test]
    fn oracle_terms_vanish() {
        for dgp in [DgpSpec::censoring_default(), DgpSpec::truncation_default()] {
            let report = decomposition_study(&ScenarioConfig::oracle(dgp, 150, 3, 8)).unwrap();
            for row in &report.rows {
                assert_eq!(&row.terms[..3], &[0.0, 0.0, 0.0]);
                assert!(row.reconstruction_residual <= RECONSTRUCTION_TOLERANCE);
            }
        }
    }

    #[test]
    fn drift_vanishes_at_the_truth() {
        let dgp = DgpSpec::truncation_default();
        let config =
            ScenarioConfig::oracle(dgp, 300, 1, 2).with_modes(NuisanceMode::FittedCorrect, NuisanceMode::FittedCorrect);
        let sample = generate(&dgp, 300, 5).unwrap();
        let fitted = config.realize(&sample).unwrap();
        let theta0 = true_estimand(&dgp);
        let (terms, _, residual) = decomposition_terms(
            &sample,
            config.template(),
            &fitted,
            &true_nuisance(&dgp),
            theta0,
            theta0,
            limit_mean_slope(&dgp),
        )
        .unwrap();
        assert_eq!(terms[5], 0.0);
        assert_eq!(terms[3], 0.0);
        assert!(residual <= RECONSTRUCTION_TOLERANCE);
        assert!(terms[0] != 0.0);
    }

    #[test]
    fn rejects_misspecified_limits() {
        let config = ScenarioConfig::oracle(DgpSpec::censoring_default(), 100, 1, 0)
            .with_modes(NuisanceMode::FittedMisspecified, NuisanceMode::Oracle);
        assert!(matches!(decomposition_study(&config), Err(Error::Config(_))));
    }
}
