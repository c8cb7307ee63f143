//! Continuous-time doubly robust estimating equations.
//!
//! Finite-variation path algebra with pathwise Riemann–Stieltjes integrals,
//! doubly robust estimators for right-censored and left-truncated survival
//! data, cross-fitting, and a Monte Carlo harness for their large-sample
//! behavior.

pub mod crossfit;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod montecarlo;
pub mod nuisance;
pub mod numeric;
pub mod stepfun;

pub use crossfit::{solve_rdr, split_folds, FoldAssignment, NuisanceFitter};
pub use dgp::{
    generate, true_estimand, true_nuisance, CensoringObservation, CovariateLaw, DgpSpec, HazardSpec, Sample, Scenario,
    TruncationObservation,
};
pub use error::{Error, Result};
pub use estimator::{solve_linear, solve_mdr, EstimateResult, EstimatingFunctionPlugin};
pub use montecarlo::{run_scenario, EstimatorKind, ScenarioConfig, ScenarioReport};
pub use nuisance::{
    CoarseningModel, ConditionalHazardModel, NuisanceMode, NuisancePair, NuisanceSpec, StratifiedNPEstimate, Target,
};
pub use stepfun::{
    product_limit, rs_integrate, sup_distance, total_variation, FiniteVariationPath, Horizon, NormReport, StepPath,
};
