use ctdr_core::dgp::{
    generate, generate_detailed, true_estimand, true_nuisance, CovariateLaw, DgpSpec, HazardSpec, Sample,
};
use ctdr_core::montecarlo::run_replication;
use ctdr_core::nuisance::{
    nelson_aalen_stratified, synthetic_epsilon, synthetic_rate, CoarseningModel, ConditionalHazardModel, NuisanceMode,
    NuisancePair, Target,
};
use ctdr_core::numeric::{ols_slope, pairwise_mean, replication_seed, shape_moments};
use ctdr_core::stepfun::{sup_distance, total_variation, StepPath};
use ctdr_core::{run_scenario, EstimatingFunctionPlugin, EstimatorKind, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn latent_event_times_follow_the_generating_law() {
    let dgp = DgpSpec::censoring_default();
    let n = 40_000;
    let latent = generate_detailed(&dgp, n, 31, true).unwrap().latent.unwrap();
    for t in [0.1, 0.5, 1.0, 2.0] {
        let p = dgp.covariate_expectation(|z| (-dgp.event.at(z) * t).exp());
        let hat = latent.iter().filter(|l| l.event_time > t).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hat - p).abs() < 4.0 * se, "t = {t}: {hat} vs {p}");
    }
}

#[test]
fn estimand_matches_direct_quadrature() {
    let dgp = DgpSpec::censoring_default();
    let m = 200_000;
    let h = 1.0 / m as f64;
    let simpson: f64 = (0..=m)
        .map(|i| {
            let z = i as f64 * h;
            let w = if i == 0 || i == m {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * (-(1.5 * z).exp() * 0.5).exp()
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((true_estimand(&dgp) - simpson).abs() < 1e-12);
    assert!((true_estimand(&dgp) - 0.3497198616911219).abs() < 1e-12);
}

#[test]
fn estimand_matches_monte_carlo() {
    let dgp = DgpSpec {
        event: HazardSpec {
            rate: 1.0,
            coefficient: 1.0,
        },
        horizon: 1.0,
        ..DgpSpec::censoring_default()
    };
    let theta = true_estimand(&dgp);
    let m = 10_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut hits = 0usize;
    for _ in 0..m {
        let z: f64 = rng.random();
        let u: f64 = rng.random();
        if -(1.0 - u).ln() / z.exp() > 1.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / m as f64;
    let se = (p * (1.0 - p) / m as f64).sqrt();
    assert!((p - theta).abs() < 3.0 * se, "{p} vs {theta}, se {se}");
}

/// `sup_{t <= upper} |step(t) − rate · t|`.
fn sup_to_line(step: &StepPath, rate: f64, upper: f64) -> f64 {
    let mut sup = (step.value(upper) - rate * upper).abs();
    for &t in step.jump_times().iter().take_while(|&&t| t <= upper) {
        sup = sup
            .max((step.value(t) - rate * t).abs())
            .max((step.left_limit(t) - rate * t).abs());
    }
    sup
}

#[test]
fn nelson_aalen_sup_error_decays_at_root_n() {
    let mut dgp = DgpSpec::censoring_default();
    dgp.event.coefficient = 0.0;
    dgp.coarsening.coefficient = 0.0;
    let grid = [500usize, 2000, 8000];
    let errors: Vec<f64> = grid
        .iter()
        .map(|&n| {
            let sups: Vec<f64> = (0..40)
                .map(|r| {
                    let sample = generate(&dgp, n, replication_seed(91, ((n as u64) << 32) ^ r)).unwrap();
                    let na = nelson_aalen_stratified(&sample, Target::Event, &[]).unwrap();
                    sup_to_line(&na.cumulative_hazards[0], dgp.event.rate, 1.0)
                })
                .collect();
            pairwise_mean(&sups)
        })
        .collect();
    let x: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let slope = ols_slope(&x, &y);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}, errors {errors:?}");
}

#[test]
fn synthetic_error_is_of_the_stated_order() {
    let dgp = DgpSpec::censoring_default();
    let truth = true_nuisance(&dgp).event;
    let (alpha, tau) = (0.3, dgp.tau_max);
    let errors = |n: usize| {
        let synthetic = synthetic_rate(&truth, alpha, 1.0, n, 4, tau).unwrap();
        let log_sup = (0..3000)
            .map(|i| {
                let t = tau * (i as f64 + 0.5) / 3000.0;
                (synthetic.hazard(t, 0.5).ln() - truth.hazard(t, 0.5).ln()).abs()
            })
            .fold(0.0, f64::max);
        let (a, b) = (synthetic.cumhaz_path(0.5, tau), truth.cumhaz_path(0.5, tau));
        (log_sup, sup_distance(&a, &b), total_variation(&a, Some(&b), true))
    };
    let eps = synthetic_epsilon(alpha, 1.0, 10_000);
    let (log_sup, _, _) = errors(10_000);
    assert!(log_sup <= eps * (1.0 + 1e-9));
    assert!((eps / 3.0..=3.0 * eps).contains(&log_sup), "{log_sup} vs {eps}");

    let grid = [100usize, 1000, 10_000, 100_000];
    let x: Vec<f64> = grid.iter().map(|&n| (n as f64).ln()).collect();
    let (sups, tvs): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|&n| errors(n))
        .map(|(_, s, v)| (s.ln(), v.ln()))
        .unzip();
    for (name, y) in [("sup", sups), ("tv", tvs)] {
        let slope = ols_slope(&x, &y);
        assert!((slope + alpha).abs() < 0.02, "{name} slope {slope}");
    }
}

#[test]
fn oracle_estimate_is_consistent_at_large_n() {
    for (dgp, seed) in [(DgpSpec::censoring_default(), 41), (DgpSpec::truncation_default(), 42)] {
        let fit = run_replication(&ScenarioConfig::oracle(dgp, 100_000, 1, seed), 0).unwrap();
        let theta0 = true_estimand(&dgp);
        assert!(
            (fit.theta_hat - theta0).abs() < 4.0 * fit.se,
            "{} vs {theta0}",
            fit.theta_hat
        );
        assert!(fit.se < 0.005);
    }
}

#[test]
fn one_correct_nuisance_suffices_at_large_n() {
    use NuisanceMode::{FittedCorrect as C, FittedMisspecified as M};
    for (dgp, seed) in [(DgpSpec::censoring_default(), 51), (DgpSpec::truncation_default(), 52)] {
        let theta0 = true_estimand(&dgp);
        for (e, c) in [(C, C), (M, C), (C, M)] {
            let config = ScenarioConfig::oracle(dgp, 100_000, 1, seed).with_modes(e, c);
            let fit = run_replication(&config, 0).unwrap();
            assert!(
                (fit.theta_hat - theta0).abs() < 4.0 * fit.se,
                "{}: {} vs {theta0}",
                config.label(),
                fit.theta_hat
            );
        }
    }
}

#[test]
fn cross_fitted_estimates_look_normal() {
    let config = ScenarioConfig {
        estimator: EstimatorKind::Rdr { folds: 5 },
        ..ScenarioConfig::oracle(DgpSpec::censoring_default(), 4000, 500, 61)
    }
    .with_modes(NuisanceMode::FittedCorrect, NuisanceMode::FittedCorrect);
    let report = run_scenario(&config).unwrap();
    assert_eq!(report.failures, 0);
    let root_n = (config.n as f64).sqrt();
    let scaled: Vec<f64> = report
        .estimates()
        .map(|e| root_n * (e.theta_hat - report.truth))
        .collect();
    let (skew, kurt) = shape_moments(&scaled);
    assert!(skew.abs() < 0.2, "skewness {skew}");
    assert!(kurt.abs() < 0.5, "excess kurtosis {kurt}");
}

#[test]
fn oracle_harness_is_unbiased() {
    for (dgp, seed) in [(DgpSpec::censoring_default(), 71), (DgpSpec::truncation_default(), 72)] {
        let report = run_scenario(&ScenarioConfig::oracle(dgp, 2000, 200, seed)).unwrap();
        let mcse = report.mcse.unwrap();
        assert!(report.bias.abs() <= 3.0 * mcse, "bias {} mcse {mcse}", report.bias);
    }
}

/// Mean and Monte Carlo SE of `Ξ_i(θ0)` over one large sample.
fn mean_xi(sample: &Sample, dgp: &DgpSpec, pair: &NuisancePair) -> (f64, f64) {
    let theta0 = true_estimand(dgp);
    let plugin = EstimatingFunctionPlugin::new(dgp.scenario, pair, dgp.horizon);
    let xi: Vec<f64> = plugin
        .all_coefficients(sample)
        .unwrap()
        .iter()
        .map(|(a, b)| a - b * theta0)
        .collect();
    let mean = pairwise_mean(&xi);
    let var = xi.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xi.len() - 1) as f64;
    (mean, (var / xi.len() as f64).sqrt())
}

#[test]
fn population_double_robustness() {
    let wrong_event = [
        ConditionalHazardModel::new(vec![0.4, 1.2], vec![0.5f64.ln(), 2.5f64.ln(), 0.8f64.ln()], -0.6).unwrap(),
        ConditionalHazardModel::constant(0.0, 0.0),
    ];
    let wrong_coarsening = ConditionalHazardModel::new(vec![0.7], vec![0.9f64.ln(), 0.5f64.ln()], 0.3).unwrap();
    for (dgp, seed) in [(DgpSpec::censoring_default(), 81), (DgpSpec::truncation_default(), 82)] {
        let sample = generate(&dgp, 1_000_000, seed).unwrap();
        let truth = true_nuisance(&dgp);
        let mut pairs: Vec<(&str, NuisancePair)> = wrong_event
            .iter()
            .map(|event| {
                (
                    "wrong event",
                    NuisancePair {
                        event: event.clone(),
                        coarsening: truth.coarsening.clone(),
                    },
                )
            })
            .collect();
        pairs.push((
            "wrong coarsening",
            NuisancePair {
                event: truth.event.clone(),
                coarsening: CoarseningModel::Hazard(wrong_coarsening.clone()),
            },
        ));
        for (name, pair) in &pairs {
            let (mean, se) = mean_xi(&sample, &dgp, pair);
            assert!(
                mean.abs() <= 3.0 * se,
                "{} {name}: mean {mean:e}, se {se:e}",
                dgp.scenario.name()
            );
        }
    }
}

#[test]
fn bernoulli_covariate_estimand() {
    let mut dgp = DgpSpec::censoring_default();
    dgp.covariate = CovariateLaw::Bernoulli(0.25);
    let expected = 0.75 * (-0.5f64).exp() + 0.25 * (-(1.5f64).exp() * 0.5).exp();
    assert!((true_estimand(&dgp) - expected).abs() < 1e-14);
}
