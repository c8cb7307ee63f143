use super::{positivity, POSITIVITY_FLOOR};
use crate::dgp::CensoringObservation;
use crate::error::Result;
use crate::nuisance::{CoarseningModel, ConditionalHazardModel};
use crate::stepfun::{product_limit, rs_integrate, FiniteVariationPath, FnPath, Jump, RsOptions, Segment};

/// Sorted breakpoints of both models inside `[lo, hi]`, endpoints included.
pub(super) fn merged_breaks(models: &[&ConditionalHazardModel], lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![lo];
    for m in models {
        v.extend(m.cutpoints().iter().copied().filter(|c| *c > lo && *c < hi));
    }
    v.push(hi);
    crate::stepfun::sort_dedup(&mut v);
    v
}

/// Coefficients `(a, b)` with `Ξ(θ) = a − bθ`, by closed-form
/// piecewise-exponential antiderivatives.
///
/// The martingale integral is stopped at `min(t̃, t0)`: beyond `t0` the
/// integrand `h/K` tracks `1/K` and the integral telescopes against the main
/// term, so the result equals the unstopped expression pathwise.
pub fn censoring_coefficients(
    obs: &CensoringObservation,
    event: &ConditionalHazardModel,
    censoring: &CoarseningModel,
    horizon: f64,
) -> Result<(f64, f64)> {
    let z = obs.z;
    let tt = obs.t_tilde;
    let cens = censoring.hazard_model();
    let lc = |t: f64| cens.map_or(0.0, |m| m.cumulative_hazard(t, z));
    let k_tt = (-lc(tt)).exp();
    if k_tt < POSITIVITY_FLOOR {
        return Err(positivity("censoring survival", k_tt, tt));
    }
    let lt0 = event.cumulative_hazard(horizon, z);
    let u = tt.min(horizon);

    let (mut a, mut b) = if tt > horizon {
        let w = lc(horizon).exp();
        (w, w)
    } else if obs.delta == 1 {
        (0.0, lc(tt).exp())
    } else {
        let w = lc(tt).exp();
        ((event.cumulative_hazard(tt, z) - lt0).exp() * w, w)
    };

    let Some(cm) = cens else { return Ok((a, b)) };
    b -= lc(u).exp_m1();
    let breaks = merged_breaks(&[event, cm], 0.0, u);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let c = cm.hazard(lo, z);
        if c == 0.0 {
            continue;
        }
        let r = event.hazard(lo, z) + c;
        let scale = c * (event.cumulative_hazard(lo, z) - lt0 + cm.cumulative_hazard(lo, z)).exp();
        a -= scale * (r * (hi - lo)).exp_m1() / r;
    }
    Ok((a, b))
}

pub fn xi_censoring(
    obs: &CensoringObservation,
    event: &ConditionalHazardModel,
    censoring: &CoarseningModel,
    theta: f64,
    horizon: f64,
) -> Result<f64> {
    let (a, b) = censoring_coefficients(obs, event, censoring, horizon)?;
    Ok(a - b * theta)
}

/// `δ D(t̃)/K(t̃) + ∫_0^{t̃} h(t)/K(t) dM_C(t)`, assembled from paths and
/// integrated by the generic Riemann–Stieltjes engine.
pub fn xi_censoring_generic(
    obs: &CensoringObservation,
    event: &ConditionalHazardModel,
    censoring: &CoarseningModel,
    theta: f64,
    horizon: f64,
) -> Result<f64> {
    let z = obs.z;
    let tt = obs.t_tilde;
    let cum_c = match censoring.hazard_model() {
        Some(m) => m.cumhaz_path(z, tt),
        None => FiniteVariationPath::zero(),
    };
    let cum_t = event.cumhaz_path(z, tt.max(horizon));
    let k = |t: f64| product_limit(&cum_c, t).unwrap_or(f64::NAN);
    let s = |t: f64| product_limit(&cum_t, t).unwrap_or(f64::NAN);
    let k_tt = k(tt);
    if k_tt < POSITIVITY_FLOOR {
        return Err(positivity("censoring survival", k_tt, tt));
    }
    let d = f64::from(u8::from(tt > horizon)) - theta;
    let main = f64::from(obs.delta) * d / k_tt;

    let jumps = if obs.delta == 0 {
        vec![Jump { time: tt, size: 1.0 }]
    } else {
        Vec::new()
    };
    let compensator: Vec<Segment> = cum_c
        .segments()
        .iter()
        .map(|sg| Segment {
            start: sg.start,
            end: sg.end,
            rate: -sg.rate,
        })
        .collect();
    let martingale = FiniteVariationPath::new(0.0, jumps, compensator)?;

    let mut kinks = vec![horizon];
    kinks.extend_from_slice(event.cutpoints());
    if let Some(m) = censoring.hazard_model() {
        kinks.extend_from_slice(m.cutpoints());
    }
    let integrand = FnPath::with_kinks(|t: f64| (s(t.max(horizon)) / s(t) - theta) / k(t), kinks);
    let augmentation = rs_integrate(&integrand, &martingale, tt, RsOptions::default())?;
    Ok(main + augmentation)
}
