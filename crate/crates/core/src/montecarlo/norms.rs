use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dgp::{generate, CovariateLaw, DgpSpec};
use crate::error::{Error, Result};
use crate::nuisance::{
    default_cutpoints, fit_piecewise_exponential, nelson_aalen_stratified, synthetic_rate, ConditionalHazardModel,
    Target,
};
use crate::numeric::{pairwise_mean, replication_seed};
use crate::stepfun::{sup_distance, total_variation, FiniteVariationPath, Segment, StepPath};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvGapRow {
    pub n: usize,
    pub sup_err: f64,
    pub tv_err: f64,
}

/// Mean sup and TV distances between the ECDF of `n` draws from the uniform
/// law on `[low, high]` and its CDF.
pub fn tv_gap_study(
    n_grid: &[usize],
    low: f64,
    high: f64,
    replications: usize,
    master_seed: u64,
) -> Result<Vec<TvGapRow>> {
    if !(0.0 <= low && low < high && high.is_finite()) {
        return Err(Error::Config(format!("need 0 <= low < high, got [{low}, {high}]")));
    }
    if replications == 0 || n_grid.contains(&0) {
        return Err(Error::Config("need positive sample sizes and replications".into()));
    }
    let cdf = FiniteVariationPath::new(
        0.0,
        Vec::new(),
        vec![Segment {
            start: low,
            end: high,
            rate: 1.0 / (high - low),
        }],
    )?;
    n_grid
        .iter()
        .map(|&n| {
            let pairs: Vec<Result<(f64, f64)>> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let seed = replication_seed(master_seed, ((n as u64) << 32) ^ r as u64);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let draws: Vec<f64> = (0..n).map(|_| rng.random_range(low..high)).collect();
                    let ecdf = StepPath::ecdf(&draws)?;
                    Ok((sup_distance(&ecdf, &cdf), total_variation(&ecdf, Some(&cdf), true)))
                })
                .collect();
            let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
            let sups: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let tvs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            Ok(TvGapRow {
                n,
                sup_err: pairwise_mean(&sups),
                tv_err: pairwise_mean(&tvs),
            })
        })
        .collect()
}

/// Sup and TV distances on `[0, tau_max]` between the cumulative hazard of
/// `truth` at covariate `z` and its synthetic perturbation at each `n`.
pub fn tv_gap_smooth(
    truth: &ConditionalHazardModel,
    z: f64,
    alpha: f64,
    amplitude: f64,
    shape_seed: u64,
    tau_max: f64,
    n_grid: &[usize],
) -> Result<Vec<TvGapRow>> {
    let reference = truth.cumhaz_path(z, tau_max);
    n_grid
        .iter()
        .map(|&n| {
            let perturbed = synthetic_rate(truth, alpha, amplitude, n, shape_seed, tau_max)?.cumhaz_path(z, tau_max);
            Ok(TvGapRow {
                n,
                sup_err: sup_distance(&perturbed, &reference),
                tv_err: total_variation(&perturbed, Some(&reference), true),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormDecayRow {
    pub estimator: &'static str,
    pub n: usize,
    /// `L²(P_Z)` norm of `sup_{[0,upper]} |Λ̂(·|Z) − Λ(·|Z)|`, averaged over replications.
    pub sup_err: f64,
    /// `L²(P_Z)` norm of the total variation of the same difference.
    pub tv_err: f64,
}

pub const NORM_DECAY_ESTIMATORS: [&str; 3] = ["nelson_aalen", "fitted_correct", "fitted_misspecified"];

fn truncate_step(path: &StepPath, upper: f64) -> Result<StepPath> {
    let keep = path.jump_times().partition_point(|t| *t <= upper);
    StepPath::new(
        path.initial_value(),
        path.jump_times()[..keep].to_vec(),
        path.post_jump_values()[..keep].to_vec(),
    )
}

/// Event cumulative hazard errors on `[0, upper]` for a stratified
/// Nelson–Aalen estimate, the correct parametric fit and the covariate-free
/// fit, under a Bernoulli covariate so that strata match covariate values.
pub fn norm_decay_study(
    dgp: &DgpSpec,
    upper: f64,
    n_grid: &[usize],
    replications: usize,
    master_seed: u64,
) -> Result<Vec<NormDecayRow>> {
    dgp.validate()?;
    if !(upper > 0.0 && upper <= dgp.tau_max) {
        return Err(Error::Config(format!("norm horizon {upper} outside (0, tau_max]")));
    }
    let CovariateLaw::Bernoulli(p) = dgp.covariate else {
        return Err(Error::Config("the norm-decay study needs a Bernoulli covariate".into()));
    };
    if replications == 0 {
        return Err(Error::Config("need at least one replication".into()));
    }
    let tau = upper;
    let truth = ConditionalHazardModel::constant(dgp.event.rate, dgp.event.coefficient);
    let weights = [(0.0, 1.0 - p), (1.0, p)];
    let l2 = |d: &dyn Fn(f64) -> (f64, f64)| {
        let (mut s2, mut v2) = (0.0, 0.0);
        for (z, w) in weights {
            if w > 0.0 {
                let (s, v) = d(z);
                s2 += w * s * s;
                v2 += w * v * v;
            }
        }
        (s2.sqrt(), v2.sqrt())
    };
    let mut rows = Vec::new();
    for &n in n_grid {
        let per_rep: Vec<Result<[(f64, f64); 3]>> = (0..replications)
            .into_par_iter()
            .map(|r| {
                let seed = replication_seed(master_seed, ((n as u64) << 32) ^ r as u64);
                let sample = generate(dgp, n, seed)?;
                let na = nelson_aalen_stratified(&sample, Target::Event, &[0.5])?;
                let cuts = default_cutpoints(&sample, Target::Event);
                let correct = fit_piecewise_exponential(&sample, Target::Event, &cuts, true)?;
                let wrong = fit_piecewise_exponential(&sample, Target::Event, &cuts, false)?;
                let na_err = |z: f64| -> Result<(f64, f64)> {
                    let step = truncate_step(na.cumulative_hazard(z), tau)?;
                    let reference = truth.cumhaz_path(z, tau);
                    Ok((
                        sup_distance(&step, &reference),
                        total_variation(&step, Some(&reference), true),
                    ))
                };
                let model_err = |m: &ConditionalHazardModel, z: f64| {
                    let (a, b) = (m.cumhaz_path(z, tau), truth.cumhaz_path(z, tau));
                    (sup_distance(&a, &b), total_variation(&a, Some(&b), true))
                };
                let na_values = [na_err(0.0)?, na_err(1.0)?];
                Ok([
                    l2(&|z| na_values[z as usize]),
                    l2(&|z| model_err(&correct, z)),
                    l2(&|z| model_err(&wrong, z)),
                ])
            })
            .collect();
        let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;
        for (k, estimator) in NORM_DECAY_ESTIMATORS.into_iter().enumerate() {
            let sups: Vec<f64> = per_rep.iter().map(|v| v[k].0).collect();
            let tvs: Vec<f64> = per_rep.iter().map(|v| v[k].1).collect();
            rows.push(NormDecayRow {
                estimator,
                n,
                sup_err: pairwise_mean(&sups),
                tv_err: pairwise_mean(&tvs),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_tv_gap_is_two() {
        let rows = tv_gap_study(&[100], 0.0, 1.0, 1, 5).unwrap();
        assert!((rows[0].tv_err - 2.0).abs() < 1e-9);
        assert!(rows[0].sup_err > 0.02 && rows[0].sup_err < 0.3);
    }

    #[test]
    fn truth_against_truth_is_zero() {
        let truth = ConditionalHazardModel::constant(1.0, 0.5);
        let rows = tv_gap_smooth(&truth, 0.3, 0.4, 0.0, 1, 3.0, &[100]).unwrap();
        assert_eq!((rows[0].sup_err, rows[0].tv_err), (0.0, 0.0));
    }

    #[test]
    fn smooth_contrast_decays() {
        let truth = ConditionalHazardModel::constant(1.0, 0.5);
        let rows = tv_gap_smooth(&truth, 0.3, 0.5, 1.0, 1, 3.0, &[100, 10_000]).unwrap();
        let ratio = rows[0].tv_err / rows[1].tv_err;
        assert!((ratio - 10.0).abs() < 0.5, "{ratio}");
    }

    #[test]
    fn norm_decay_requires_binary_covariate() {
        assert!(norm_decay_study(&DgpSpec::censoring_default(), 0.5, &[100], 1, 0).is_err());
        let mut dgp = DgpSpec::censoring_default();
        dgp.covariate = CovariateLaw::Bernoulli(0.5);
        let rows = norm_decay_study(&dgp, 0.5, &[400], 2, 0).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].tv_err > rows[1].tv_err);
    }
}
