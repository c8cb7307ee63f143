//! Reproducible data-generating processes with known truth.
//!
//! Both scenarios use a scalar baseline covariate `Z` and exponential
//! conditional laws with log-linear covariate effects, so the estimand, the
//! nuisance hazards and every product-limit have closed forms.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::nuisance::{CoarseningModel, ConditionalHazardModel, NuisancePair};
use crate::numeric::{format_float, integrate_smooth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Right censoring with covariate-dependent censoring hazard.
    Censoring,
    /// Covariate-induced dependent left truncation.
    Truncation,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Censoring => "censoring",
            Scenario::Truncation => "truncation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateLaw {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Bernoulli with success probability `p`.
    Bernoulli(f64),
}

/// Hazard `rate · exp(coefficient · z)`, constant in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardSpec {
    pub rate: f64,
    pub coefficient: f64,
}

impl HazardSpec {
    pub fn at(&self, z: f64) -> f64 {
        self.rate * (self.coefficient * z).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSpec {
    pub scenario: Scenario,
    pub covariate: CovariateLaw,
    /// Hazard of the event time `T`.
    pub event: HazardSpec,
    /// Hazard of the censoring time `C` or the truncation time `Q`.
    pub coarsening: HazardSpec,
    /// Estimand horizon `t0`: the target is `P(T > t0)`.
    pub horizon: f64,
    /// Administrative censoring horizon.
    pub tau_max: f64,
}

impl DgpSpec {
    pub fn censoring_default() -> Self {
        Self {
            scenario: Scenario::Censoring,
            covariate: CovariateLaw::Uniform,
            event: HazardSpec {
                rate: 1.0,
                coefficient: 1.5,
            },
            coarsening: HazardSpec {
                rate: 0.4,
                coefficient: 1.5,
            },
            horizon: 0.5,
            tau_max: 3.0,
        }
    }

    pub fn truncation_default() -> Self {
        Self {
            scenario: Scenario::Truncation,
            covariate: CovariateLaw::Uniform,
            event: HazardSpec {
                rate: 1.0,
                coefficient: 1.5,
            },
            coarsening: HazardSpec {
                rate: 1.5,
                coefficient: 1.0,
            },
            horizon: 0.5,
            tau_max: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.event.rate > 0.0 && self.event.rate.is_finite()) {
            return bad(format!("event rate must be positive, got {}", self.event.rate));
        }
        let c = self.coarsening.rate;
        match self.scenario {
            Scenario::Censoring if !(c >= 0.0 && c.is_finite()) => {
                return bad(format!("censoring rate must be nonnegative, got {c}"));
            }
            Scenario::Truncation if !(c > 0.0 && c.is_finite()) => {
                return bad(format!("truncation rate must be positive, got {c}"));
            }
            _ => {}
        }
        if !self.event.coefficient.is_finite() || !self.coarsening.coefficient.is_finite() {
            return bad("covariate coefficients must be finite".into());
        }
        if let CovariateLaw::Bernoulli(p) = self.covariate {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("Bernoulli probability {p} outside [0, 1]"));
            }
        }
        if !(self.horizon > 0.0 && self.tau_max.is_finite() && self.horizon < self.tau_max) {
            return bad(format!(
                "need 0 < horizon < tau_max, got horizon {} and tau_max {}",
                self.horizon, self.tau_max
            ));
        }
        Ok(())
    }

    /// `E_Z[f(Z)]` under the covariate law.
    pub fn covariate_expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        match self.covariate {
            CovariateLaw::Bernoulli(p) => (1.0 - p) * f(0.0) + p * f(1.0),
            CovariateLaw::Uniform => integrate_smooth(f, 0.0, 1.0, 1e-12),
        }
    }

    fn draw_covariate<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.covariate {
            CovariateLaw::Uniform => u,
            CovariateLaw::Bernoulli(p) => f64::from(u8::from(u < p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringObservation {
    pub z: f64,
    /// `min(T, C, tau_max)`.
    pub t_tilde: f64,
    /// `1` when the event was observed.
    pub delta: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationObservation {
    pub z: f64,
    /// Truncation time.
    pub q: f64,
    /// Event time.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoringData {
    pub observations: Vec<CensoringObservation>,
    /// Observations with `t_tilde >= admin_horizon` were censored
    /// administratively, not by the censoring process.
    pub admin_horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationData {
    pub observations: Vec<TruncationObservation>,
}

/// A generated or loaded i.i.d. sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Censoring(CensoringData),
    Truncation(TruncationData),
}

impl Sample {
    pub fn len(&self) -> usize {
        match self {
            Sample::Censoring(d) => d.observations.len(),
            Sample::Truncation(d) => d.observations.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scenario(&self) -> Scenario {
        match self {
            Sample::Censoring(_) => Scenario::Censoring,
            Sample::Truncation(_) => Scenario::Truncation,
        }
    }

    pub fn covariate(&self, i: usize) -> f64 {
        match self {
            Sample::Censoring(d) => d.observations[i].z,
            Sample::Truncation(d) => d.observations[i].z,
        }
    }

    /// Observations at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Sample {
        match self {
            Sample::Censoring(d) => Sample::Censoring(CensoringData {
                observations: indices.iter().map(|&i| d.observations[i]).collect(),
                admin_horizon: d.admin_horizon,
            }),
            Sample::Truncation(d) => Sample::Truncation(TruncationData {
                observations: indices.iter().map(|&i| d.observations[i]).collect(),
            }),
        }
    }

    /// CSV with header `z,t_tilde,delta` or `z,q,t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        match self {
            Sample::Censoring(d) => {
                writeln!(w, "z,t_tilde,delta")?;
                for o in &d.observations {
                    writeln!(w, "{},{},{}", format_float(o.z), format_float(o.t_tilde), o.delta)?;
                }
            }
            Sample::Truncation(d) => {
                writeln!(w, "z,q,t")?;
                for o in &d.observations {
                    writeln!(w, "{},{},{}", format_float(o.z), format_float(o.q), format_float(o.t))?;
                }
            }
        }
        Ok(())
    }
}

/// Latent times behind one observation (debug output).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent {
    pub z: f64,
    pub event_time: f64,
    /// Censoring time `C` or truncation time `Q`.
    pub coarsening_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sample: Sample,
    pub latent: Option<Vec<Latent>>,
}

/// Rejection acceptance probability below which truncation is considered
/// too severe to sample.
pub const MIN_ACCEPTANCE: f64 = 0.01;

/// `n` i.i.d. observations, deterministic in `(spec, n, seed)`.
pub fn generate(spec: &DgpSpec, n: usize, seed: u64) -> Result<Sample> {
    Ok(generate_detailed(spec, n, seed, false)?.sample)
}

/// Like [`generate`], optionally also returning the latent times.
pub fn generate_detailed(spec: &DgpSpec, n: usize, seed: u64, keep_latent: bool) -> Result<Generated> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut latent = keep_latent.then(|| Vec::with_capacity(n));
    let sample = match spec.scenario {
        Scenario::Censoring => {
            let mut observations = Vec::with_capacity(n);
            for _ in 0..n {
                let z = spec.draw_covariate(&mut rng);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                let t = e1 / spec.event.at(z);
                let c = e2 / spec.coarsening.at(z);
                let first = t.min(c);
                let (t_tilde, delta) = if first >= spec.tau_max {
                    (spec.tau_max, 0)
                } else {
                    (first, u8::from(t <= c))
                };
                observations.push(CensoringObservation { z, t_tilde, delta });
                if let Some(l) = latent.as_mut() {
                    l.push(Latent {
                        z,
                        event_time: t,
                        coarsening_time: c,
                    });
                }
            }
            Sample::Censoring(CensoringData {
                observations,
                admin_horizon: spec.tau_max,
            })
        }
        Scenario::Truncation => {
            let p = selection_probability(spec);
            if p < MIN_ACCEPTANCE {
                return Err(Error::Config(format!(
                    "truncation too severe: acceptance probability {p:.3e} < {MIN_ACCEPTANCE}"
                )));
            }
            let mut observations = Vec::with_capacity(n);
            while observations.len() < n {
                let z = spec.draw_covariate(&mut rng);
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                let q = e1 / spec.coarsening.at(z);
                let t = e2 / spec.event.at(z);
                if q <= t {
                    observations.push(TruncationObservation { z, q, t });
                    if let Some(l) = latent.as_mut() {
                        l.push(Latent {
                            z,
                            event_time: t,
                            coarsening_time: q,
                        });
                    }
                }
            }
            Sample::Truncation(TruncationData { observations })
        }
    };
    Ok(Generated { sample, latent })
}

/// Target `θ = P(T > t0) = E_Z[exp(−λ_T e^{β_T Z} t0)]`.
pub fn true_estimand(spec: &DgpSpec) -> f64 {
    let t0 = spec.horizon;
    spec.covariate_expectation(|z| (-spec.event.at(z) * t0).exp())
}

/// `P(Q <= T)` in the untruncated population.
pub fn selection_probability(spec: &DgpSpec) -> f64 {
    spec.covariate_expectation(|z| {
        let rq = spec.coarsening.at(z);
        rq / (rq + spec.event.at(z))
    })
}

/// The generating hazards as model objects.
pub fn true_nuisance(spec: &DgpSpec) -> NuisancePair {
    let event = ConditionalHazardModel::constant(spec.event.rate, spec.event.coefficient);
    let coarsening = ConditionalHazardModel::constant(spec.coarsening.rate, spec.coarsening.coefficient);
    NuisancePair {
        event,
        coarsening: CoarseningModel::Hazard(coarsening),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfun::product_limit;

    #[test]
    fn no_censoring_gives_events_or_admin() {
        let mut spec = DgpSpec::censoring_default();
        spec.coarsening.rate = 0.0;
        let Sample::Censoring(d) = generate(&spec, 2000, 3).unwrap() else {
            unreachable!()
        };
        for o in &d.observations {
            assert!(o.delta == 1 || o.t_tilde == spec.tau_max);
        }
    }

    #[test]
    fn competing_exponentials_without_covariate_effect() {
        let mut spec = DgpSpec::censoring_default();
        spec.event = HazardSpec {
            rate: 1.0,
            coefficient: 0.0,
        };
        spec.coarsening = HazardSpec {
            rate: 0.5,
            coefficient: 0.0,
        };
        spec.tau_max = 50.0;
        let Sample::Censoring(d) = generate(&spec, 100_000, 11).unwrap() else {
            unreachable!()
        };
        let mean = d.observations.iter().map(|o| o.t_tilde).sum::<f64>() / 1e5;
        // mean of Exp(1.5) is 2/3, sd/sqrt(n) about 0.0021
        assert!((mean - 2.0 / 3.0).abs() < 4.0 * (2.0 / 3.0) / 1e5f64.sqrt());
        let events = d.observations.iter().filter(|o| o.delta == 1).count() as f64 / 1e5;
        assert!((events - 2.0 / 3.0).abs() < 0.006);
    }

    #[test]
    fn determinism() {
        let spec = DgpSpec::truncation_default();
        assert_eq!(generate(&spec, 300, 99).unwrap(), generate(&spec, 300, 99).unwrap());
        assert_ne!(generate(&spec, 300, 99).unwrap(), generate(&spec, 300, 100).unwrap());
    }

    #[test]
    fn truncation_keeps_only_q_le_t() {
        let Sample::Truncation(d) = generate(&DgpSpec::truncation_default(), 5000, 5).unwrap() else {
            unreachable!()
        };
        assert!(d.observations.iter().all(|o| o.q <= o.t));
    }

    #[test]
    fn severe_truncation_is_rejected() {
        let mut spec = DgpSpec::truncation_default();
        spec.coarsening = HazardSpec {
            rate: 0.001,
            coefficient: 0.0,
        };
        spec.event = HazardSpec {
            rate: 1.0,
            coefficient: 0.0,
        };
        assert!(matches!(generate(&spec, 10, 1), Err(Error::Config(_))));
    }

    #[test]
    fn estimand_closed_forms() {
        let mut spec = DgpSpec::censoring_default();
        spec.event = HazardSpec {
            rate: 1.0,
            coefficient: 0.0,
        };
        spec.horizon = std::f64::consts::LN_2;
        assert!((true_estimand(&spec) - 0.5).abs() < 1e-14);

        spec.covariate = CovariateLaw::Bernoulli(0.5);
        spec.event = HazardSpec {
            rate: 1.0,
            coefficient: std::f64::consts::LN_2,
        };
        spec.horizon = 1.0;
        let want = 0.5 * ((-1.0f64).exp() + (-2.0f64).exp());
        assert!((true_estimand(&spec) - want).abs() < 1e-15);
    }

    #[test]
    fn estimand_matches_product_limit_of_true_hazard() {
        let spec = DgpSpec::censoring_default();
        let pair = true_nuisance(&spec);
        let via_paths = spec
            .covariate_expectation(|z| product_limit(&pair.event.cumhaz_path(z, spec.horizon), spec.horizon).unwrap());
        assert!((via_paths - true_estimand(&spec)).abs() < 1e-12);
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        generate(&DgpSpec::censoring_default(), 2, 1)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("z,t_tilde,delta\n"));
        let mut buf = Vec::new();
        generate(&DgpSpec::truncation_default(), 2, 1)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("z,q,t\n"));
    }
}
