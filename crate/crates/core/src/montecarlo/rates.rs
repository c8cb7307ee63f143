use rayon::prelude::*;

use crate::crossfit::PluginTemplate;
use crate::dgp::{generate, true_estimand, true_nuisance, DgpSpec, Sample};
use crate::error::{Error, Result};
use crate::estimator::solve_linear;
use crate::nuisance::{perturb_hazard, synthetic_epsilon, CoarseningModel, NuisancePair, SyntheticShape};
use crate::numeric::{pairwise_mean, replication_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct RateStudyConfig {
    pub dgp: DgpSpec,
    /// `(α_H, α_Q)` pairs.
    pub alphas: Vec<(f64, f64)>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub master_seed: u64,
    pub amplitude_event: f64,
    pub amplitude_coarsening: f64,
    pub shape_seed_event: u64,
    pub shape_seed_coarsening: u64,
    /// Sample size and perturbation scale for the one-off estimate of the
    /// mixed second derivative `κ`.
    pub kappa_n: usize,
    pub kappa_epsilon: f64,
    pub kappa_seed: u64,
}

impl RateStudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self
            .alphas
            .iter()
            .any(|&(h, q)| !(h > 0.0 && h < 1.0 && q > 0.0 && q < 1.0))
        {
            return Err(Error::Config("rate exponents must lie in (0, 1)".into()));
        }
        if self.replications == 0 || self.n_grid.iter().any(|&n| n < 50) {
            return Err(Error::Config("need R >= 1 and n >= 50".into()));
        }
        if !(self.amplitude_event >= 0.0 && self.amplitude_coarsening >= 0.0) {
            return Err(Error::Config("amplitudes must be nonnegative".into()));
        }
        if self.kappa_n < 50 || !(self.kappa_epsilon > 0.0) {
            return Err(Error::Config("need kappa_n >= 50 and kappa_epsilon > 0".into()));
        }
        Ok(())
    }

    fn shapes(&self) -> (SyntheticShape, SyntheticShape) {
        let tau = self.dgp.tau_max;
        (
            SyntheticShape::from_seed(self.shape_seed_event, tau),
            SyntheticShape::from_seed(self.shape_seed_coarsening, tau),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub alpha_event: f64,
    pub alpha_coarsening: f64,
    pub alpha_sum: f64,
    pub n: usize,
    /// `√n · mean(θ̂_synthetic − θ̂_oracle)` over replications.
    pub sqrtn_bias: f64,
    /// Monte Carlo standard error of `sqrtn_bias`.
    pub sqrtn_bias_mcse: f64,
    /// Mean cross term `P_n[Ξ(Ĥ,Q̂) − Ξ(Ĥ,Q) − Ξ(H,Q̂) + Ξ(H,Q)]` at the truth.
    pub cross_integral: f64,
    /// `κ · ε_H · ε_Q`.
    pub predicted_cross: f64,
    pub coverage: f64,
}

/// Coefficients of the four nuisance combinations `(Ĥ,Q̂), (Ĥ,Q), (H,Q̂), (H,Q)`.
fn combination_coefficients(
    sample: &Sample,
    template: PluginTemplate,
    fitted: &NuisancePair,
    truth: &NuisancePair,
) -> Result<[Vec<(f64, f64)>; 4]> {
    let mixed_h = NuisancePair {
        event: fitted.event.clone(),
        coarsening: truth.coarsening.clone(),
    };
    let mixed_q = NuisancePair {
        event: truth.event.clone(),
        coarsening: fitted.coarsening.clone(),
    };
    Ok([
        template.build(fitted).all_coefficients(sample)?,
        template.build(&mixed_h).all_coefficients(sample)?,
        template.build(&mixed_q).all_coefficients(sample)?,
        template.build(truth).all_coefficients(sample)?,
    ])
}

/// `P_n` of the doubly differenced estimating function at `theta`.
fn cross_term(sets: &[Vec<(f64, f64)>; 4], theta: f64) -> f64 {
    let xi = |c: (f64, f64)| c.0 - c.1 * theta;
    let per_obs: Vec<f64> = (0..sets[0].len())
        .map(|i| xi(sets[0][i]) - xi(sets[1][i]) - xi(sets[2][i]) + xi(sets[3][i]))
        .collect();
    pairwise_mean(&per_obs)
}

fn perturbed_pair(
    truth: &NuisancePair,
    shapes: &(SyntheticShape, SyntheticShape),
    eps: (f64, f64),
) -> Result<NuisancePair> {
    let coarsening = match &truth.coarsening {
        CoarseningModel::Hazard(m) => CoarseningModel::Hazard(perturb_hazard(m, eps.1, &shapes.1)?),
        CoarseningModel::Absent => return Err(Error::Config("the rate study needs a coarsening hazard".into())),
    };
    Ok(NuisancePair {
        event: perturb_hazard(&truth.event, eps.0, &shapes.0)?,
        coarsening,
    })
}

/// `κ = ∂²/∂ε_H∂ε_Q E[Ξ(H_ε, Q_ε)]` at zero, estimated once on a large
/// sample from the cross term at scale `kappa_epsilon` in both directions.
pub fn cross_integral_constant(config: &RateStudyConfig) -> Result<f64> {
    let truth = true_nuisance(&config.dgp);
    let template = PluginTemplate {
        scenario: config.dgp.scenario,
        horizon: config.dgp.horizon,
    };
    let sample = generate(&config.dgp, config.kappa_n, config.kappa_seed)?;
    let eps = config.kappa_epsilon;
    let fitted = perturbed_pair(&truth, &config.shapes(), (eps, eps))?;
    let sets = combination_coefficients(&sample, template, &fitted, &truth)?;
    Ok(cross_term(&sets, true_estimand(&config.dgp)) / (eps * eps))
}

struct RepOutcome {
    difference: f64,
    cross: f64,
    covered: bool,
}

/// Synthetic-rate nuisances at scales `c_H n^{−α_H}`, `c_Q n^{−α_Q}`.
///
/// Each replication's synthetic estimate is compared with the oracle
/// estimate on the same sample, which removes the common sampling noise
/// from the bias without changing its expectation.
pub fn rate_condition_study(config: &RateStudyConfig) -> Result<Vec<RateRow>> {
    config.validate()?;
    let truth = true_nuisance(&config.dgp);
    let theta0 = true_estimand(&config.dgp);
    let shapes = config.shapes();
    let kappa = cross_integral_constant(config)?;
    let template = PluginTemplate {
        scenario: config.dgp.scenario,
        horizon: config.dgp.horizon,
    };
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let scales: Vec<(f64, f64)> = config
            .alphas
            .iter()
            .map(|&(ah, aq)| {
                (
                    synthetic_epsilon(ah, config.amplitude_event, n),
                    synthetic_epsilon(aq, config.amplitude_coarsening, n),
                )
            })
            .collect();
        let pairs = scales
            .iter()
            .map(|&eps| perturbed_pair(&truth, &shapes, eps))
            .collect::<Result<Vec<_>>>()?;
        let per_rep: Vec<Result<Vec<RepOutcome>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let seed = replication_seed(config.master_seed, ((n as u64) << 32) ^ r as u64);
                let sample = generate(&config.dgp, n, seed)?;
                let oracle_coefs = template.build(&truth).all_coefficients(&sample)?;
                let oracle = solve_linear(&oracle_coefs)?;
                pairs
                    .iter()
                    .map(|fitted| {
                        let sets = combination_coefficients(&sample, template, fitted, &truth)?;
                        let synthetic = solve_linear(&sets[0])?;
                        Ok(RepOutcome {
                            difference: synthetic.theta_hat - oracle.theta_hat,
                            cross: cross_term(&sets, theta0),
                            covered: synthetic.covers(theta0),
                        })
                    })
                    .collect()
            })
            .collect();
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
        let root_n = (n as f64).sqrt();
        for (k, (&(ah, aq), &(eh, eq))) in config.alphas.iter().zip(&scales).enumerate() {
            let diffs: Vec<f64> = per_rep.iter().map(|v| v[k].difference).collect();
            let crosses: Vec<f64> = per_rep.iter().map(|v| v[k].cross).collect();
            let mean = pairwise_mean(&diffs);
            let r = diffs.len() as f64;
            let var = if diffs.len() > 1 {
                diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (r - 1.0)
            } else {
                f64::NAN
            };
            rows.push(RateRow {
                alpha_event: ah,
                alpha_coarsening: aq,
                alpha_sum: ah + aq,
                n,
                sqrtn_bias: root_n * mean,
                sqrtn_bias_mcse: root_n * (var / r).sqrt(),
                cross_integral: pairwise_mean(&crosses),
                predicted_cross: kappa * eh * eq,
                coverage: per_rep.iter().filter(|v| v[k].covered).count() as f64 / r,
            });
        }
    }
    Ok(rows)
}
