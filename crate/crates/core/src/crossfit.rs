//! Sample splitting and the cross-fitted rate-DR estimator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dgp::{Sample, Scenario};
use crate::error::{Error, Result};
use crate::estimator::{solve_linear, EstimateResult, EstimatingFunctionPlugin};
use crate::nuisance::{NuisancePair, NuisanceSpec};

pub const DEFAULT_FOLDS: usize = 5;

/// Balanced random partition of `0..n` into `folds` folds, numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub n: usize,
    pub folds: usize,
    pub assignment: Vec<usize>,
    pub seed: u64,
}

impl FoldAssignment {
    /// Indices in fold `l`, increasing.
    pub fn fold(&self, l: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] == l).collect()
    }

    /// Indices outside fold `l`, increasing.
    pub fn out_of_fold(&self, l: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.assignment[i] != l).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.folds];
        for &l in &self.assignment {
            s[l - 1] += 1;
        }
        s
    }
}

pub fn split_folds(n: usize, folds: usize, seed: u64) -> Result<FoldAssignment> {
    if folds < 2 || folds > n {
        return Err(Error::InvalidInput(format!(
            "need 2 <= L <= n, got L = {folds}, n = {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n];
    for (position, &i) in order.iter().enumerate() {
        assignment[i] = position % folds + 1;
    }
    Ok(FoldAssignment {
        n,
        folds,
        assignment,
        seed,
    })
}

/// Produces both nuisances from the training observations of a sample.
pub trait NuisanceFitter: Sync {
    fn fit(&self, sample: &Sample, training: &[usize]) -> Result<NuisancePair>;
}

/// Returns fixed nuisances whatever the data.
#[derive(Debug, Clone)]
pub struct FixedFitter(pub NuisancePair);

impl NuisanceFitter for FixedFitter {
    fn fit(&self, _sample: &Sample, _training: &[usize]) -> Result<NuisancePair> {
        Ok(self.0.clone())
    }
}

/// Realizes a pair of nuisance specs on the training subsample.
#[derive(Debug, Clone)]
pub struct SpecFitter {
    pub event: NuisanceSpec,
    pub coarsening: NuisanceSpec,
    pub truth: NuisancePair,
    pub rate_n: usize,
    pub tau_max: f64,
}

impl NuisanceFitter for SpecFitter {
    fn fit(&self, sample: &Sample, training: &[usize]) -> Result<NuisancePair> {
        let sub = sample.subset(training);
        NuisancePair::realize(
            &self.event,
            &self.coarsening,
            &sub,
            &self.truth,
            self.rate_n,
            self.tau_max,
        )
    }
}

/// Problem and horizon shared by every fold's plugin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PluginTemplate {
    pub scenario: Scenario,
    pub horizon: f64,
}

impl PluginTemplate {
    pub fn build<'a>(&self, nuisances: &'a NuisancePair) -> EstimatingFunctionPlugin<'a> {
        EstimatingFunctionPlugin::new(self.scenario, nuisances, self.horizon)
    }
}

/// Cross-fitted estimate: each fold is evaluated against nuisances fitted on
/// the other folds, and the pooled affine equation is solved exactly.
pub fn solve_rdr(
    sample: &Sample,
    folds: usize,
    fitter: &dyn NuisanceFitter,
    template: PluginTemplate,
    seed: u64,
) -> Result<EstimateResult> {
    let split = split_folds(sample.len(), folds, seed)?;
    let mut coefficients = vec![(0.0, 0.0); sample.len()];
    for l in 1..=folds {
        let tag = |e: Error| Error::Fold {
            fold: l,
            source: Box::new(e),
        };
        let pair = fitter.fit(sample, &split.out_of_fold(l)).map_err(tag)?;
        let plugin = template.build(&pair);
        for i in split.fold(l) {
            coefficients[i] = plugin.coefficients(sample, i).map_err(tag)?;
        }
    }
    solve_linear(&coefficients)
}
