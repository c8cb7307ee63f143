//! Nuisance hazard estimators: parametric fits, stratified nonparametric
//! comparators, and controlled-rate synthetic perturbations of the truth.

mod fit;
mod model;
mod nonparametric;
mod synthetic;

pub use fit::{default_cutpoints, fit_piecewise_exponential, fit_risk_records, risk_records, RiskRecord};
pub use model::{ConditionalHazardModel, FitSummary};
pub use nonparametric::{nelson_aalen, nelson_aalen_stratified, StratifiedNPEstimate};
pub use synthetic::{perturb_hazard, synthetic_epsilon, synthetic_rate, SyntheticShape, SYNTHETIC_CELLS};

use crate::dgp::Sample;
use crate::error::{Error, Result};

/// Which hazard a nuisance estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// The event time `T`.
    Event,
    /// The censoring time `C` or the truncation time `Q`.
    Coarsening,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuisanceMode {
    /// The generating hazard.
    Oracle,
    /// Piecewise-exponential fit with the covariate.
    FittedCorrect,
    /// Piecewise-exponential fit omitting the covariate.
    FittedMisspecified,
    /// The truth perturbed at scale `amplitude · n^{−alpha}`.
    SyntheticRate {
        alpha: f64,
        amplitude: f64,
        shape_seed: u64,
    },
}

impl NuisanceMode {
    pub fn name(&self) -> &'static str {
        match self {
            NuisanceMode::Oracle => "oracle",
            NuisanceMode::FittedCorrect => "correct",
            NuisanceMode::FittedMisspecified => "misspecified",
            NuisanceMode::SyntheticRate { .. } => "synthetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceSpec {
    pub target: Target,
    pub mode: NuisanceMode,
}

impl NuisanceSpec {
    pub fn new(target: Target, mode: NuisanceMode) -> Self {
        Self { target, mode }
    }

    pub fn validate(&self) -> Result<()> {
        if let NuisanceMode::SyntheticRate { alpha, amplitude, .. } = self.mode {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config(format!("synthetic rate exponent {alpha} outside (0, 1)")));
            }
            if !(amplitude >= 0.0 && amplitude.is_finite()) {
                return Err(Error::Config(format!(
                    "synthetic amplitude {amplitude} must be nonnegative"
                )));
            }
        }
        Ok(())
    }

    /// The model this spec produces on `sample`.
    ///
    /// `truth` is the generating hazard of the target, `rate_n` the sample
    /// size that sets synthetic perturbation scales.
    pub fn realize(
        &self,
        sample: &Sample,
        truth: &ConditionalHazardModel,
        rate_n: usize,
        tau_max: f64,
    ) -> Result<ConditionalHazardModel> {
        match self.mode {
            NuisanceMode::Oracle => Ok(truth.clone()),
            NuisanceMode::FittedCorrect | NuisanceMode::FittedMisspecified => {
                let cuts = default_cutpoints(sample, self.target);
                fit_piecewise_exponential(sample, self.target, &cuts, self.mode == NuisanceMode::FittedCorrect)
            }
            NuisanceMode::SyntheticRate {
                alpha,
                amplitude,
                shape_seed,
            } => synthetic_rate(truth, alpha, amplitude, rate_n, shape_seed, tau_max),
        }
    }
}

/// The coarsening nuisance, or its absence (no censoring, no truncation).
#[derive(Debug, Clone, PartialEq)]
pub enum CoarseningModel {
    Hazard(ConditionalHazardModel),
    Absent,
}

impl CoarseningModel {
    pub fn hazard_model(&self) -> Option<&ConditionalHazardModel> {
        match self {
            CoarseningModel::Hazard(m) => Some(m),
            CoarseningModel::Absent => None,
        }
    }
}

/// Event and coarsening nuisances for one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisancePair {
    pub event: ConditionalHazardModel,
    pub coarsening: CoarseningModel,
}

impl NuisancePair {
    /// Realizes both specs against the generating pair `truth`.
    pub fn realize(
        event: &NuisanceSpec,
        coarsening: &NuisanceSpec,
        sample: &Sample,
        truth: &NuisancePair,
        rate_n: usize,
        tau_max: f64,
    ) -> Result<NuisancePair> {
        let event_model = event.realize(sample, &truth.event, rate_n, tau_max)?;
        let coarsening_model = match &truth.coarsening {
            CoarseningModel::Hazard(m) => CoarseningModel::Hazard(coarsening.realize(sample, m, rate_n, tau_max)?),
            CoarseningModel::Absent => CoarseningModel::Absent,
        };
        Ok(NuisancePair {
            event: event_model,
            coarsening: coarsening_model,
        })
    }
}
