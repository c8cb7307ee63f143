use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::ConditionalHazardModel;
use crate::error::{Error, Result};
use crate::stepfun::sort_dedup;

/// Number of equal cells on `[0, tau_max]` carrying the perturbation.
pub const SYNTHETIC_CELLS: usize = 64;

/// Smooth bounded shape `ζ(t) = Σ_{j=1}^{3} a_j cos(jπt/τ) / s` with
/// `sup_{[0,τ]} |ζ| = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticShape {
    coefficients: [f64; 3],
    tau: f64,
}

impl SyntheticShape {
    pub fn from_seed(shape_seed: u64, tau: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(shape_seed);
        let mut coefficients = [0.0; 3];
        for a in &mut coefficients {
            *a = rng.random_range(-1.0..1.0);
        }
        let raw = Self { coefficients, tau };
        let grid = 20_000;
        let sup = (0..=grid)
            .map(|i| raw.zeta(tau * i as f64 / grid as f64).abs())
            .fold(0.0, f64::max);
        for a in &mut coefficients {
            *a /= sup;
        }
        Self { coefficients, tau }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn zeta(&self, t: f64) -> f64 {
        let w = std::f64::consts::PI * t / self.tau;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| a * ((j + 1) as f64 * w).cos())
            .sum()
    }

    /// `∫_0^t ζ`.
    pub fn antiderivative(&self, t: f64) -> f64 {
        let w = std::f64::consts::PI / self.tau;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(j, a)| {
                let k = (j + 1) as f64 * w;
                a * (k * t).sin() / k
            })
            .sum()
    }

    /// Average of `ζ` over grid cell `j` (cells beyond the last repeat it).
    pub fn cell_average(&self, j: usize) -> f64 {
        let j = j.min(SYNTHETIC_CELLS - 1);
        let h = self.tau / SYNTHETIC_CELLS as f64;
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        (self.antiderivative(b) - self.antiderivative(a)) / h
    }
}

/// Perturbation scale `c · n^{−α}`.
pub fn synthetic_epsilon(alpha: f64, amplitude: f64, n: usize) -> f64 {
    amplitude * (n as f64).powf(-alpha)
}

/// Hazard `λ(t|z) · exp(c n^{−α} ζ̄(t))`, where `ζ̄` is the cell average of
/// the smooth shape on a fine grid over `[0, tau_max]`.
///
/// The perturbation is a multiplicative time effect, so the result stays a
/// piecewise-exponential proportional-hazards model.
pub fn synthetic_rate(
    truth: &ConditionalHazardModel,
    alpha: f64,
    amplitude: f64,
    n: usize,
    shape_seed: u64,
    tau_max: f64,
) -> Result<ConditionalHazardModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rate exponent must lie in (0, 1), got {alpha}"
        )));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "amplitude must be nonnegative, got {amplitude}"
        )));
    }
    if n == 0 || !(tau_max > 0.0 && tau_max.is_finite()) {
        return Err(Error::InvalidInput("need n >= 1 and a finite positive tau_max".into()));
    }
    if amplitude == 0.0 {
        return Ok(truth.clone());
    }
    let shape = SyntheticShape::from_seed(shape_seed, tau_max);
    perturb_hazard(truth, synthetic_epsilon(alpha, amplitude, n), &shape)
}

/// Hazard `λ(t|z) · exp(eps · ζ̄(t))` for an explicit scale `eps`.
pub fn perturb_hazard(
    truth: &ConditionalHazardModel,
    eps: f64,
    shape: &SyntheticShape,
) -> Result<ConditionalHazardModel> {
    if eps == 0.0 {
        return Ok(truth.clone());
    }
    let h = shape.tau() / SYNTHETIC_CELLS as f64;
    let mut cuts: Vec<f64> = (1..=SYNTHETIC_CELLS).map(|j| j as f64 * h).collect();
    cuts.extend_from_slice(truth.cutpoints());
    sort_dedup(&mut cuts);
    let log_baseline = (0..=cuts.len())
        .map(|k| {
            let start = if k == 0 { 0.0 } else { cuts[k - 1] };
            let end = cuts.get(k).copied().unwrap_or(start + h);
            let mid = 0.5 * (start + end);
            let cell = (mid / h).floor() as usize;
            truth.log_baseline()[truth.piece_index(mid)] + eps * shape.cell_average(cell)
        })
        .collect();
    ConditionalHazardModel::new(cuts, log_baseline, truth.covariate_coefficient())
}
