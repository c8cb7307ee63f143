use nalgebra::{DMatrix, DVector};

use super::model::{ConditionalHazardModel, FitSummary};
use super::Target;
use crate::dgp::Sample;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const SCORE_TOLERANCE: f64 = 1e-10;

/// One subject's contribution to a hazard likelihood: at risk on
/// `(entry, exit]`, with an event of the target type at `exit` if `event`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskRecord {
    pub z: f64,
    pub entry: f64,
    pub exit: f64,
    pub event: bool,
}

/// Risk records for a Poisson-form fit of `target`.
///
/// Truncation-time models use a different likelihood and are not expressible
/// as risk records; asking for them is an input error.
pub fn risk_records(sample: &Sample, target: Target) -> Result<Vec<RiskRecord>> {
    match (sample, target) {
        (Sample::Censoring(d), Target::Event) => Ok(d
            .observations
            .iter()
            .map(|o| RiskRecord {
                z: o.z,
                entry: 0.0,
                exit: o.t_tilde,
                event: o.delta == 1,
            })
            .collect()),
        (Sample::Censoring(d), Target::Coarsening) => Ok(d
            .observations
            .iter()
            .map(|o| RiskRecord {
                z: o.z,
                entry: 0.0,
                exit: o.t_tilde,
                event: o.delta == 0 && o.t_tilde < d.admin_horizon,
            })
            .collect()),
        (Sample::Truncation(d), Target::Event) => Ok(d
            .observations
            .iter()
            .map(|o| RiskRecord {
                z: o.z,
                entry: o.q,
                exit: o.t,
                event: true,
            })
            .collect()),
        (Sample::Truncation(_), Target::Coarsening) => Err(Error::InvalidInput(
            "truncation times are not right-censored risk records".into(),
        )),
    }
}

/// Quartiles of the observed target event times, deduplicated and strictly
/// positive. The truncation-time model gets a single piece.
pub fn default_cutpoints(sample: &Sample, target: Target) -> Vec<f64> {
    let mut times: Vec<f64> = match (sample, target) {
        (Sample::Truncation(_), Target::Coarsening) => return Vec::new(),
        _ => risk_records(sample, target)
            .map(|r| r.into_iter().filter(|r| r.event).map(|r| r.exit).collect())
            .unwrap_or_default(),
    };
    if times.len() < 4 {
        return Vec::new();
    }
    times.sort_by(f64::total_cmp);
    let quantile = |p: f64| {
        let h = p * (times.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(times.len() - 1);
        times[lo] + (h - lo as f64) * (times[hi] - times[lo])
    };
    let mut cuts: Vec<f64> = [0.25, 0.5, 0.75]
        .iter()
        .map(|&p| quantile(p))
        .filter(|c| *c > 0.0)
        .collect();
    cuts.dedup();
    cuts
}

/// Maximum-likelihood piecewise-exponential proportional-hazards fit.
///
/// Censoring targets and the truncated event time use the Poisson-form
/// likelihood of their risk records. The truncation time `Q` uses the
/// conditional likelihood of `Q` given `Z` and `Q <= T`,
/// `Σ log g(q_i|z_i) − log G(t_i|z_i)`. Without the covariate the
/// coefficient is fixed at 0.
pub fn fit_piecewise_exponential(
    sample: &Sample,
    target: Target,
    cutpoints: &[f64],
    include_covariate: bool,
) -> Result<ConditionalHazardModel> {
    // Validate the cutpoints up front.
    ConditionalHazardModel::new(cutpoints.to_vec(), vec![0.0; cutpoints.len() + 1], 0.0)?;
    match (sample, target) {
        (Sample::Truncation(d), Target::Coarsening) => {
            let pairs: Vec<(f64, f64, f64)> = d.observations.iter().map(|o| (o.z, o.q, o.t)).collect();
            fit_truncation_time(&pairs, cutpoints, include_covariate)
        }
        _ => fit_risk_records(&risk_records(sample, target)?, cutpoints, include_covariate),
    }
}

/// Exposure of `(entry, exit]` within each piece, as a dense row.
fn exposure_row(cutpoints: &[f64], entry: f64, exit: f64, row: &mut [f64]) {
    for (k, slot) in row.iter_mut().enumerate() {
        let start = if k == 0 { 0.0 } else { cutpoints[k - 1] };
        let end = cutpoints.get(k).copied().unwrap_or(f64::INFINITY);
        *slot = (exit.min(end) - entry.max(start)).max(0.0);
    }
}

struct Objective {
    value: f64,
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

/// Poisson-form likelihood fit of right-censored, possibly left-truncated
/// risk records.
pub fn fit_risk_records(
    records: &[RiskRecord],
    cutpoints: &[f64],
    include_covariate: bool,
) -> Result<ConditionalHazardModel> {
    let k = cutpoints.len() + 1;
    let n = records.len();
    if n == 0 {
        return Err(Error::InvalidInput("no records to fit".into()));
    }
    let mut exposure = vec![0.0; n * k];
    let mut event_piece = vec![usize::MAX; n];
    let mut events = vec![0.0; k];
    let mut total_exposure = vec![0.0; k];
    for (i, r) in records.iter().enumerate() {
        if !(r.entry >= 0.0 && r.exit >= r.entry && r.exit.is_finite() && r.z.is_finite()) {
            return Err(Error::InvalidInput(format!("malformed record {i}: {r:?}")));
        }
        let row = &mut exposure[i * k..(i + 1) * k];
        exposure_row(cutpoints, r.entry, r.exit, row);
        for (acc, e) in total_exposure.iter_mut().zip(row.iter()) {
            *acc += e;
        }
        if r.event {
            let p = cutpoints.partition_point(|c| *c < r.exit);
            event_piece[i] = p;
            events[p] += 1.0;
        }
    }
    for p in 0..k {
        if total_exposure[p] <= 0.0 {
            return Err(Error::ZeroExposure { piece: p });
        }
        if events[p] == 0.0 {
            return Err(Error::NoEvents { piece: p });
        }
    }
    let dim = k + usize::from(include_covariate);
    let zd: f64 = records
        .iter()
        .zip(&event_piece)
        .filter(|(_, p)| **p != usize::MAX)
        .map(|(r, _)| r.z)
        .sum();

    let objective = |x: &DVector<f64>| -> Objective {
        let beta = if include_covariate { x[k] } else { 0.0 };
        let w: Vec<f64> = (0..k).map(|p| x[p].exp()).collect();
        let mut value = 0.0;
        let mut gradient = DVector::zeros(dim);
        let mut hessian = DMatrix::zeros(dim, dim);
        let mut weighted = vec![0.0; k];
        let mut weighted_z = vec![0.0; k];
        let (mut sz_cum, mut szz_cum) = (0.0, 0.0);
        for (i, r) in records.iter().enumerate() {
            let u = (beta * r.z).exp();
            let row = &exposure[i * k..(i + 1) * k];
            let mut cum = 0.0;
            for p in 0..k {
                weighted[p] += u * row[p];
                weighted_z[p] += r.z * u * row[p];
                cum += w[p] * row[p];
            }
            let cum = u * cum;
            value -= cum;
            if event_piece[i] != usize::MAX {
                value += x[event_piece[i]] + beta * r.z;
            }
            sz_cum += r.z * cum;
            szz_cum += r.z * r.z * cum;
        }
        for p in 0..k {
            gradient[p] = events[p] - w[p] * weighted[p];
            hessian[(p, p)] = -w[p] * weighted[p];
            if include_covariate {
                hessian[(p, k)] = -w[p] * weighted_z[p];
                hessian[(k, p)] = hessian[(p, k)];
            }
        }
        if include_covariate {
            gradient[k] = zd - sz_cum;
            hessian[(k, k)] = -szz_cum;
        }
        Objective {
            value,
            gradient,
            hessian,
        }
    };

    let mut start = DVector::zeros(dim);
    for p in 0..k {
        start[p] = (events[p] / total_exposure[p]).ln();
    }
    let (x, summary) = newton_maximize(start, n, objective)?;
    let beta = if include_covariate { x[k] } else { 0.0 };
    Ok(
        ConditionalHazardModel::new(cutpoints.to_vec(), x.rows(0, k).iter().copied().collect(), beta)?
            .with_fit(summary),
    )
}

/// `log(1 − e^{−x})` and its first two derivatives.
fn log_one_minus_exp_neg(x: f64) -> (f64, f64, f64) {
    let em1 = x.exp_m1();
    ((-(-x).exp_m1()).ln(), 1.0 / em1, -x.exp() / (em1 * em1))
}

/// Conditional likelihood fit of the truncation-time hazard from
/// `(z, q, t)` triples with `q <= t`.
fn fit_truncation_time(
    triples: &[(f64, f64, f64)],
    cutpoints: &[f64],
    include_covariate: bool,
) -> Result<ConditionalHazardModel> {
    let k = cutpoints.len() + 1;
    let n = triples.len();
    if n == 0 {
        return Err(Error::InvalidInput("no records to fit".into()));
    }
    let mut exp_q = vec![0.0; n * k];
    let mut exp_t = vec![0.0; n * k];
    let mut piece_q = vec![0; n];
    let mut events = vec![0.0; k];
    let mut total_exposure = vec![0.0; k];
    for (i, &(z, q, t)) in triples.iter().enumerate() {
        if !(q > 0.0 && t >= q && t.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput(format!("malformed truncation record {i}")));
        }
        exposure_row(cutpoints, 0.0, q, &mut exp_q[i * k..(i + 1) * k]);
        exposure_row(cutpoints, 0.0, t, &mut exp_t[i * k..(i + 1) * k]);
        piece_q[i] = cutpoints.partition_point(|c| *c < q);
        events[piece_q[i]] += 1.0;
        for p in 0..k {
            total_exposure[p] += exp_t[i * k + p];
        }
    }
    for p in 0..k {
        if total_exposure[p] <= 0.0 {
            return Err(Error::ZeroExposure { piece: p });
        }
        if events[p] == 0.0 {
            return Err(Error::NoEvents { piece: p });
        }
    }
    let dim = k + usize::from(include_covariate);

    let objective = |x: &DVector<f64>| -> Objective {
        let beta = if include_covariate { x[k] } else { 0.0 };
        let w: Vec<f64> = (0..k).map(|p| x[p].exp()).collect();
        let mut value = 0.0;
        let mut gradient = DVector::<f64>::zeros(dim);
        let mut hessian = DMatrix::<f64>::zeros(dim, dim);
        let mut grad_q = DVector::<f64>::zeros(dim);
        let mut grad_t = DVector::<f64>::zeros(dim);
        for (i, &(z, _, _)) in triples.iter().enumerate() {
            let u = (beta * z).exp();
            let (eq, et) = (&exp_q[i * k..(i + 1) * k], &exp_t[i * k..(i + 1) * k]);
            let mut lq = 0.0;
            let mut lt = 0.0;
            for p in 0..k {
                grad_q[p] = u * w[p] * eq[p];
                grad_t[p] = u * w[p] * et[p];
                lq += grad_q[p];
                lt += grad_t[p];
            }
            if include_covariate {
                grad_q[k] = z * lq;
                grad_t[k] = z * lt;
            }
            let (phi, d1, d2) = log_one_minus_exp_neg(lt);
            value += x[piece_q[i]] + beta * z - lq - phi;
            gradient[piece_q[i]] += 1.0;
            if include_covariate {
                gradient[k] += z;
            }
            gradient -= &grad_q;
            gradient.axpy(-d1, &grad_t, 1.0);
            hessian.ger(-d2, &grad_t, &grad_t, 1.0);
            // Second derivatives of L_q and L_t share one sparsity pattern.
            for p in 0..k {
                let s = grad_q[p] + d1 * grad_t[p];
                hessian[(p, p)] -= s;
                if include_covariate {
                    hessian[(p, k)] -= z * s;
                    hessian[(k, p)] -= z * s;
                }
            }
            if include_covariate {
                hessian[(k, k)] -= z * z * (lq + d1 * lt);
            }
        }
        Objective {
            value,
            gradient,
            hessian,
        }
    };

    // Start from the untruncated exponential rate; Newton handles the rest.
    let total_q: f64 = triples.iter().map(|t| t.1).sum();
    let mut start = DVector::zeros(dim);
    for p in 0..k {
        start[p] = (n as f64 / total_q).ln();
    }
    let (x, summary) = newton_maximize(start, n, objective)?;
    let beta = if include_covariate { x[k] } else { 0.0 };
    Ok(
        ConditionalHazardModel::new(cutpoints.to_vec(), x.rows(0, k).iter().copied().collect(), beta)?
            .with_fit(summary),
    )
}

/// Damped Newton ascent to a mean score of at most [`SCORE_TOLERANCE`].
fn newton_maximize(
    mut x: DVector<f64>,
    n: usize,
    objective: impl Fn(&DVector<f64>) -> Objective,
) -> Result<(DVector<f64>, FitSummary)> {
    let scale = n as f64;
    let mut trace = Vec::new();
    let mut current = objective(&x);
    for iteration in 0..=MAX_ITERATIONS {
        let score = current.gradient.amax() / scale;
        trace.push(score);
        if !score.is_finite() || !current.value.is_finite() {
            break;
        }
        if score <= SCORE_TOLERANCE {
            return Ok((
                x,
                FitSummary {
                    sample_size: n,
                    log_likelihood: current.value,
                    iterations: iteration,
                    score_trace: trace,
                },
            ));
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
        let direction = ascent_direction(&current);
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let candidate = &x + &direction * step;
            let next = objective(&candidate);
            let slack = 1e-12 * current.value.abs().max(1.0);
            if next.value.is_finite() && next.value >= current.value - slack {
                x = candidate;
                current = next;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: trace.len().saturating_sub(1),
        trace,
    })
}

/// Solves `(−H + μI) d = g`, raising `μ` until the system is positive
/// definite.
fn ascent_direction(obj: &Objective) -> DVector<f64> {
    let neg_h = -&obj.hessian;
    let dim = neg_h.nrows();
    let mut mu = 0.0;
    let base = neg_h.diagonal().amax().max(1e-12);
    loop {
        let mut m = neg_h.clone();
        for i in 0..dim {
            m[(i, i)] += mu;
        }
        if let Some(ch) = m.cholesky() {
            return ch.solve(&obj.gradient);
        }
        mu = if mu == 0.0 { 1e-8 * base } else { mu * 10.0 };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, CovariateLaw, DgpSpec};

    #[test]
    fn events_over_exposure() {
        let records: Vec<RiskRecord> = (0..10)
            .map(|i| RiskRecord {
                z: 0.0,
                entry: 0.0,
                exit: 1.0,
                event: i < 5,
            })
            .collect();
        let m = fit_risk_records(&records, &[], false).unwrap();
        assert!((m.baseline_rate(0) - 0.5).abs() < 1e-12);
        assert_eq!(m.covariate_coefficient(), 0.0);
    }

    #[test]
    fn zero_exposure_piece() {
        let records = vec![RiskRecord {
            z: 0.0,
            entry: 0.0,
            exit: 1.0,
            event: true,
        }];
        assert!(matches!(
            fit_risk_records(&records, &[2.0], false),
            Err(Error::ZeroExposure { piece: 1 })
        ));
        let records = vec![
            RiskRecord {
                z: 0.0,
                entry: 0.0,
                exit: 1.0,
                event: true,
            },
            RiskRecord {
                z: 0.0,
                entry: 0.0,
                exit: 3.0,
                event: false,
            },
        ];
        assert!(matches!(
            fit_risk_records(&records, &[2.0], false),
            Err(Error::NoEvents { piece: 1 })
        ));
    }

    #[test]
    fn covariate_effect_vanishes_when_absent() {
        let mut spec = DgpSpec::censoring_default();
        spec.event.coefficient = 0.0;
        let sample = generate(&spec, 10_000, 17).unwrap();
        let cuts = default_cutpoints(&sample, Target::Event);
        let m = fit_piecewise_exponential(&sample, Target::Event, &cuts, true).unwrap();
        assert!(m.covariate_coefficient().abs() < 0.1);
        let summary = m.fit_summary().unwrap();
        assert!(*summary.score_trace.last().unwrap() <= SCORE_TOLERANCE);
    }

    #[test]
    fn recovers_generating_coefficients() {
        let spec = DgpSpec::censoring_default();
        let sample = generate(&spec, 20_000, 3).unwrap();
        let ev = fit_piecewise_exponential(&sample, Target::Event, &[], true).unwrap();
        assert!((ev.covariate_coefficient() - spec.event.coefficient).abs() < 0.1);
        assert!((ev.baseline_rate(0) - spec.event.rate).abs() < 0.06);
        let ce = fit_piecewise_exponential(&sample, Target::Coarsening, &[], true).unwrap();
        assert!((ce.covariate_coefficient() - spec.coarsening.coefficient).abs() < 0.25);
    }

    #[test]
    fn truncated_fits_recover_truth() {
        let spec = DgpSpec::truncation_default();
        let sample = generate(&spec, 20_000, 8).unwrap();
        let ev = fit_piecewise_exponential(&sample, Target::Event, &[], true).unwrap();
        assert!((ev.covariate_coefficient() - spec.event.coefficient).abs() < 0.1);
        assert!((ev.baseline_rate(0) - spec.event.rate).abs() < 0.08);
        let g = fit_piecewise_exponential(&sample, Target::Coarsening, &[], true).unwrap();
        assert!((g.covariate_coefficient() - spec.coarsening.coefficient).abs() < 0.15);
        assert!((g.baseline_rate(0) - spec.coarsening.rate).abs() < 0.15);
        let with_cuts = fit_piecewise_exponential(&sample, Target::Coarsening, &[0.2, 0.5], true).unwrap();
        assert!(with_cuts.fit_summary().unwrap().iterations <= MAX_ITERATIONS);
    }

    #[test]
    fn truncation_gradient_matches_finite_differences() {
        let spec = DgpSpec {
            covariate: CovariateLaw::Bernoulli(0.4),
            ..DgpSpec::truncation_default()
        };
        let Sample::Truncation(d) = generate(&spec, 200, 2).unwrap() else {
            unreachable!()
        };
        let loglik = |a0: f64, a1: f64, b: f64| -> f64 {
            let m = ConditionalHazardModel::new(vec![0.3], vec![a0, a1], b).unwrap();
            d.observations
                .iter()
                .map(|o| {
                    m.hazard(o.q, o.z).ln()
                        - m.cumulative_hazard(o.q, o.z)
                        - (-(-m.cumulative_hazard(o.t, o.z)).exp_m1()).ln()
                })
                .sum()
        };
        let fit = fit_piecewise_exponential(&Sample::Truncation(d.clone()), Target::Coarsening, &[0.3], true).unwrap();
        let (a0, a1, b) = (
            fit.log_baseline()[0],
            fit.log_baseline()[1],
            fit.covariate_coefficient(),
        );
        let h = 1e-6;
        for g in [
            (loglik(a0 + h, a1, b) - loglik(a0 - h, a1, b)) / (2.0 * h),
            (loglik(a0, a1 + h, b) - loglik(a0, a1 - h, b)) / (2.0 * h),
            (loglik(a0, a1, b + h) - loglik(a0, a1, b - h)) / (2.0 * h),
        ] {
            assert!(g.abs() < 1e-5, "score {g}");
        }
    }
}
