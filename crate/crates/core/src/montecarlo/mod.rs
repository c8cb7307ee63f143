//! Replication engine and the empirical checks built on it.
//!
//! Every replication derives its own seed from the master seed and its index,
//! so replications are independent of each other, of `R` and of the number of
//! worker threads; results are reduced in index order.

mod decomposition;
mod norms;
mod rates;

pub use decomposition::{
    decomposition_study, decomposition_terms, limit_mean_slope, DecompositionReport, DecompositionRow,
};
pub use norms::{norm_decay_study, tv_gap_smooth, tv_gap_study, NormDecayRow, TvGapRow};
pub use rates::{cross_integral_constant, rate_condition_study, RateRow, RateStudyConfig};

use rayon::prelude::*;

use crate::crossfit::{solve_rdr, PluginTemplate, SpecFitter};
use crate::dgp::{generate, true_estimand, true_nuisance, DgpSpec, Sample};
use crate::error::{Error, Result};
use crate::estimator::{solve_mdr, EstimateResult};
use crate::nuisance::{NuisanceMode, NuisancePair, NuisanceSpec, Target};
use crate::numeric::{pairwise_mean, replication_seed, splitmix64};

/// Largest tolerated fraction of failed replications.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Full-sample nuisances.
    Mdr,
    /// Cross-fitted with `folds` folds.
    Rdr { folds: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub dgp: DgpSpec,
    pub estimator: EstimatorKind,
    pub event: NuisanceSpec,
    pub coarsening: NuisanceSpec,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Oracle nuisances, model-DR estimator.
    pub fn oracle(dgp: DgpSpec, n: usize, replications: usize, master_seed: u64) -> Self {
        Self {
            dgp,
            estimator: EstimatorKind::Mdr,
            event: NuisanceSpec::new(Target::Event, NuisanceMode::Oracle),
            coarsening: NuisanceSpec::new(Target::Coarsening, NuisanceMode::Oracle),
            n,
            replications,
            master_seed,
        }
    }

    pub fn with_modes(mut self, event: NuisanceMode, coarsening: NuisanceMode) -> Self {
        self.event = NuisanceSpec::new(Target::Event, event);
        self.coarsening = NuisanceSpec::new(Target::Coarsening, coarsening);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replications < 1 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.n < 50 {
            return Err(Error::Config(format!("sample size {} below the minimum of 50", self.n)));
        }
        if self.event.target != Target::Event || self.coarsening.target != Target::Coarsening {
            return Err(Error::Config("nuisance specs target the wrong hazards".into()));
        }
        self.event.validate()?;
        self.coarsening.validate()?;
        if let EstimatorKind::Rdr { folds } = self.estimator {
            if folds < 2 || folds > self.n {
                return Err(Error::Config(format!("need 2 <= L <= n, got L = {folds}")));
            }
        }
        Ok(())
    }

    /// Cell label `"<event mode>-<coarsening mode>"`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.event.mode.name(), self.coarsening.mode.name())
    }

    pub fn template(&self) -> PluginTemplate {
        PluginTemplate {
            scenario: self.dgp.scenario,
            horizon: self.dgp.horizon,
        }
    }

    pub fn replication_sample(&self, r: usize) -> Result<Sample> {
        generate(&self.dgp, self.n, replication_seed(self.master_seed, r as u64))
    }

    /// Nuisances realized on a full sample.
    pub fn realize(&self, sample: &Sample) -> Result<NuisancePair> {
        NuisancePair::realize(
            &self.event,
            &self.coarsening,
            sample,
            &true_nuisance(&self.dgp),
            self.n,
            self.dgp.tau_max,
        )
    }
}

/// One replication: generate, fit, estimate.
pub fn run_replication(config: &ScenarioConfig, r: usize) -> Result<EstimateResult> {
    let sample = config.replication_sample(r)?;
    match config.estimator {
        EstimatorKind::Mdr => {
            let pair = config.realize(&sample)?;
            solve_mdr(&sample, &config.template().build(&pair), (0.0, 1.0))
        }
        EstimatorKind::Rdr { folds } => {
            let fitter = SpecFitter {
                event: config.event,
                coarsening: config.coarsening,
                truth: true_nuisance(&config.dgp),
                rate_n: config.n,
                tau_max: config.dgp.tau_max,
            };
            let fold_seed = splitmix64(replication_seed(config.master_seed, r as u64));
            solve_rdr(&sample, folds, &fitter, config.template(), fold_seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub label: String,
    pub n: usize,
    pub replications: usize,
    pub truth: f64,
    pub bias: f64,
    /// Empirical SD of `θ̂`; absent with fewer than two successes.
    pub sd: Option<f64>,
    pub mean_se: f64,
    pub coverage: f64,
    /// `sd / √R`.
    pub mcse: Option<f64>,
    pub failures: usize,
    pub outcomes: Vec<std::result::Result<EstimateResult, Error>>,
}

impl ScenarioReport {
    pub fn estimates(&self) -> impl Iterator<Item = &EstimateResult> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }
}

fn summarize(config: &ScenarioConfig, outcomes: Vec<Result<EstimateResult>>) -> Result<ScenarioReport> {
    let truth = true_estimand(&config.dgp);
    let failures = outcomes.iter().filter(|o| o.is_err()).count();
    let r = outcomes.len();
    if failures as f64 > MAX_FAILURE_FRACTION * r as f64 || failures == r {
        let first = outcomes.iter().find_map(|o| o.as_ref().err()).expect("failure present");
        return Err(Error::Scenario(format!(
            "{failures} of {r} replications failed in cell {} (first: {first})",
            config.label()
        )));
    }
    let ok: Vec<&EstimateResult> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let errors: Vec<f64> = ok.iter().map(|e| e.theta_hat - truth).collect();
    let bias = pairwise_mean(&errors);
    let sd = (ok.len() >= 2).then(|| {
        let dev: Vec<f64> = errors.iter().map(|e| (e - bias) * (e - bias)).collect();
        (dev.iter().sum::<f64>() / (ok.len() - 1) as f64).sqrt()
    });
    let ses: Vec<f64> = ok.iter().map(|e| e.se).collect();
    let hits = ok.iter().filter(|e| e.covers(truth)).count();
    Ok(ScenarioReport {
        label: config.label(),
        n: config.n,
        replications: r,
        truth,
        bias,
        sd,
        mean_se: pairwise_mean(&ses),
        coverage: hits as f64 / ok.len() as f64,
        mcse: sd.map(|s| s / (ok.len() as f64).sqrt()),
        failures,
        outcomes,
    })
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    config.validate()?;
    let outcomes: Vec<Result<EstimateResult>> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect();
    summarize(config, outcomes)
}

/// The four cells `{event correct, misspecified} × {coarsening correct,
/// misspecified}`, in that order with the event mode varying fastest.
pub fn dr_matrix(base: &ScenarioConfig) -> Result<Vec<ScenarioReport>> {
    use NuisanceMode::{FittedCorrect as C, FittedMisspecified as M};
    [(C, C), (M, C), (C, M), (M, M)]
        .into_iter()
        .map(|(e, c)| run_scenario(&base.with_modes(e, c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootNRow {
    pub n: usize,
    pub sd_sqrt_n: f64,
    pub coverage: f64,
    /// Mean sandwich SE over empirical SD.
    pub se_ratio: f64,
}

pub fn root_n_scaling_study(config: &ScenarioConfig, n_grid: &[usize]) -> Result<Vec<RootNRow>> {
    n_grid
        .iter()
        .map(|&n| {
            let report = run_scenario(&ScenarioConfig { n, ..*config })?;
            let sd = report
                .sd
                .ok_or_else(|| Error::Scenario("root-n study needs at least two replications".into()))?;
            Ok(RootNRow {
                n,
                sd_sqrt_n: sd * (n as f64).sqrt(),
                coverage: report.coverage,
                se_ratio: report.mean_se / sd,
            })
        })
        .collect()
}
