use super::censoring::merged_breaks;
use super::{positivity, POSITIVITY_FLOOR};
use crate::dgp::TruncationObservation;
use crate::error::Result;
use crate::nuisance::{CoarseningModel, ConditionalHazardModel};
use crate::numeric::integrate_smooth;
use crate::stepfun::{product_limit, rs_integrate, FiniteVariationPath, FnPath, Jump, RsOptions, Segment};

const QUADRATURE_TOL: f64 = 1e-12;

/// `∫_lo^hi λ_T(t) e^{Λ_T(t)} / G(t) dt`, split at both models' breakpoints.
fn weighted_growth(f: &ConditionalHazardModel, g: &ConditionalHazardModel, z: f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return 0.0;
    }
    merged_breaks(&[f, g], lo, hi)
        .windows(2)
        .map(|w| {
            let rate = f.hazard(w[0], z);
            if rate == 0.0 {
                return 0.0;
            }
            integrate_smooth(
                |t| rate * f.cumulative_hazard(t, z).exp() / -(-g.cumulative_hazard(t, z)).exp_m1(),
                w[0],
                w[1],
                QUADRATURE_TOL,
            )
        })
        .sum()
}

/// Coefficients `(a, b)` with `Ξ(θ) = a − bθ` for
/// `Ξ = D(T)/G(T) + ∫_{[0,T)} m(t)/{1 − F(t)} dQ(t)`, where
/// `Q(t) = 1(q ≤ t)/G(t)` and `m(t) = E_F{1(T ≤ t) D}`.
///
/// The augmentation is integrated by parts against the continuous part of
/// `1/G`, which leaves one one-dimensional quadrature per observation.
pub fn truncation_coefficients(
    obs: &TruncationObservation,
    event: &ConditionalHazardModel,
    truncation: &CoarseningModel,
    horizon: f64,
) -> Result<(f64, f64)> {
    let indicator = f64::from(u8::from(obs.t > horizon));
    let Some(g) = truncation.hazard_model() else {
        return Ok((indicator, 1.0));
    };
    let z = obs.z;
    let big_g = |t: f64| -(-g.cumulative_hazard(t, z)).exp_m1();
    let g_q = big_g(obs.q);
    if !(g_q >= POSITIVITY_FLOOR) {
        return Err(positivity("truncation distribution", g_q, obs.q));
    }
    let lt = event.cumulative_hazard(obs.t, z);
    if !((-lt).exp() >= POSITIVITY_FLOOR) {
        return Err(positivity("event survival", (-lt).exp(), obs.t));
    }
    let g_t = big_g(obs.t);
    if obs.q >= obs.t {
        return Ok((indicator / g_t, 1.0 / g_t));
    }
    let boundary = lt.exp() / g_t;
    let split = obs.q.max(horizon).min(obs.t);
    let late = weighted_growth(event, g, z, split, obs.t);
    let early = weighted_growth(event, g, z, obs.q, split);
    let b = boundary - early - late;
    let a = if obs.t > horizon {
        (-event.cumulative_hazard(horizon, z)).exp() * (boundary - late)
    } else {
        0.0
    };
    Ok((a, b))
}

pub fn xi_truncation(
    obs: &TruncationObservation,
    event: &ConditionalHazardModel,
    truncation: &CoarseningModel,
    theta: f64,
    horizon: f64,
) -> Result<f64> {
    let (a, b) = truncation_coefficients(obs, event, truncation, horizon)?;
    Ok(a - b * theta)
}

/// The same estimating function assembled from paths: a jump of `1/G(q)` at
/// `q` and the density `−g/G²` on `[q, T)`, each integrated by the generic
/// Riemann–Stieltjes engine against `H(t)/1(T > t)`.
pub fn xi_truncation_generic(
    obs: &TruncationObservation,
    event: &ConditionalHazardModel,
    truncation: &CoarseningModel,
    theta: f64,
    horizon: f64,
) -> Result<f64> {
    let d = f64::from(u8::from(obs.t > horizon)) - theta;
    let Some(gm) = truncation.hazard_model() else {
        return Ok(d);
    };
    let z = obs.z;
    let cum_f = event.cumhaz_path(z, obs.t.max(horizon));
    let cum_g = gm.cumhaz_path(z, obs.t);
    let big_f = |t: f64| 1.0 - product_limit(&cum_f, t).unwrap_or(f64::NAN);
    let big_g = |t: f64| 1.0 - product_limit(&cum_g, t).unwrap_or(f64::NAN);
    let g_q = big_g(obs.q);
    if !(g_q >= POSITIVITY_FLOOR) {
        return Err(positivity("truncation distribution", g_q, obs.q));
    }
    let s_t = 1.0 - big_f(obs.t);
    if !(s_t >= POSITIVITY_FLOOR) {
        return Err(positivity("event survival", s_t, obs.t));
    }
    let main = d / big_g(obs.t);
    if obs.q >= obs.t {
        return Ok(main);
    }
    let f0 = big_f(horizon);
    let phi = |t: f64| {
        let ft = big_f(t);
        ((ft - f0).max(0.0) - theta * ft) / (1.0 - ft)
    };
    let mut kinks = vec![horizon];
    kinks.extend_from_slice(event.cutpoints());
    kinks.extend_from_slice(gm.cutpoints());

    let jump = FiniteVariationPath::new(
        0.0,
        vec![Jump {
            time: obs.q,
            size: 1.0 / g_q,
        }],
        Vec::new(),
    )?;
    let at_entry = rs_integrate(
        &FnPath::with_kinks(phi, kinks.clone()),
        &jump,
        obs.t,
        RsOptions::default(),
    )?;

    let density = |t: f64| {
        let gt = big_g(t);
        -gm.hazard(t, z) * (1.0 - gt) / (gt * gt)
    };
    let lebesgue = FiniteVariationPath::new(
        0.0,
        Vec::new(),
        vec![Segment {
            start: obs.q,
            end: obs.t,
            rate: 1.0,
        }],
    )?;
    let continuous = rs_integrate(
        &FnPath::with_kinks(|t| phi(t) * density(t), kinks),
        &lebesgue,
        obs.t,
        RsOptions::default(),
    )?;
    Ok(main + at_entry + continuous)
}
