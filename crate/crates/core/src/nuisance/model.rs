use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::stepfun::{FiniteVariationPath, Segment};

/// Diagnostics from a likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub sample_size: usize,
    pub log_likelihood: f64,
    pub iterations: usize,
    /// Max-norm of the mean score at each Newton iterate.
    pub score_trace: Vec<f64>,
}

/// Conditional hazard `λ(t | z) = w_k · exp(β z)` for `t` in piece `k`.
///
/// Pieces are `[0, c_1), [c_1, c_2), ..., [c_K, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHazardModel {
    cutpoints: Vec<f64>,
    log_baseline: Vec<f64>,
    covariate_coefficient: f64,
    cumulative_at_start: Vec<f64>,
    fit: Option<FitSummary>,
}

impl ConditionalHazardModel {
    pub fn new(cutpoints: Vec<f64>, log_baseline: Vec<f64>, covariate_coefficient: f64) -> Result<Self> {
        if cutpoints.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::InvalidInput("cutpoints must be finite and positive".into()));
        }
        if cutpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("cutpoints must be strictly increasing".into()));
        }
        if log_baseline.len() != cutpoints.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} cutpoints need {} baseline values, got {}",
                cutpoints.len(),
                cutpoints.len() + 1,
                log_baseline.len()
            )));
        }
        if log_baseline.iter().any(|a| a.is_nan() || *a == f64::INFINITY) {
            return Err(Error::InvalidInput("log baseline values must be < +inf".into()));
        }
        if !covariate_coefficient.is_finite() {
            return Err(Error::InvalidInput("covariate coefficient must be finite".into()));
        }
        let mut cumulative_at_start = Vec::with_capacity(log_baseline.len());
        let mut acc = 0.0;
        cumulative_at_start.push(0.0);
        for (k, c) in cutpoints.iter().enumerate() {
            let start = if k == 0 { 0.0 } else { cutpoints[k - 1] };
            acc += log_baseline[k].exp() * (c - start);
            cumulative_at_start.push(acc);
        }
        Ok(Self {
            cutpoints,
            log_baseline,
            covariate_coefficient,
            cumulative_at_start,
            fit: None,
        })
    }

    /// Time-constant hazard `rate · exp(coefficient · z)`.
    pub fn constant(rate: f64, coefficient: f64) -> Self {
        Self::new(Vec::new(), vec![rate.ln()], coefficient).expect("valid constant hazard")
    }

    pub(crate) fn with_fit(mut self, fit: FitSummary) -> Self {
        self.fit = Some(fit);
        self
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn log_baseline(&self) -> &[f64] {
        &self.log_baseline
    }

    pub fn covariate_coefficient(&self) -> f64 {
        self.covariate_coefficient
    }

    pub fn fit_summary(&self) -> Option<&FitSummary> {
        self.fit.as_ref()
    }

    pub fn piece_count(&self) -> usize {
        self.log_baseline.len()
    }

    pub fn piece_index(&self, t: f64) -> usize {
        self.cutpoints.partition_point(|c| *c <= t)
    }

    pub fn piece_start(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cutpoints[k - 1]
        }
    }

    pub fn piece_end(&self, k: usize) -> f64 {
        self.cutpoints.get(k).copied().unwrap_or(f64::INFINITY)
    }

    pub fn baseline_rate(&self, k: usize) -> f64 {
        self.log_baseline[k].exp()
    }

    pub fn covariate_factor(&self, z: f64) -> f64 {
        (self.covariate_coefficient * z).exp()
    }

    pub fn baseline_cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.piece_index(t);
        let rate = self.baseline_rate(k);
        let within = if rate == 0.0 {
            0.0
        } else {
            rate * (t - self.piece_start(k))
        };
        self.cumulative_at_start[k] + within
    }

    pub fn hazard(&self, t: f64, z: f64) -> f64 {
        self.baseline_rate(self.piece_index(t)) * self.covariate_factor(z)
    }

    pub fn cumulative_hazard(&self, t: f64, z: f64) -> f64 {
        self.baseline_cumulative(t) * self.covariate_factor(z)
    }

    pub fn survival(&self, t: f64, z: f64) -> f64 {
        (-self.cumulative_hazard(t, z)).exp()
    }

    /// `Λ(· | z)` on `[0, upper]` as a continuous finite-variation path.
    pub fn cumhaz_path(&self, z: f64, upper: f64) -> FiniteVariationPath {
        let factor = self.covariate_factor(z);
        let mut segments = Vec::new();
        for k in 0..self.piece_count() {
            let start = self.piece_start(k);
            if start >= upper {
                break;
            }
            let rate = self.baseline_rate(k) * factor;
            if rate > 0.0 {
                segments.push(Segment {
                    start,
                    end: self.piece_end(k).min(upper),
                    rate,
                });
            }
        }
        FiniteVariationPath::new(0.0, Vec::new(), segments).expect("ordered pieces")
    }
}

/// Model records are `key=value` lines with comma-separated vectors.
impl fmt::Display for ConditionalHazardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        writeln!(f, "cutpoints={}", join(&self.cutpoints))?;
        writeln!(f, "log_baseline={}", join(&self.log_baseline))?;
        writeln!(f, "covariate_coefficient={:?}", self.covariate_coefficient)
    }
}

impl FromStr for ConditionalHazardModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_vec = |v: &str| -> Result<Vec<f64>> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad number {x:?}: {e}")))
                })
                .collect()
        };
        let (mut cuts, mut base, mut coef) = (None, None, None);
        for line in s
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected key=value, got {line:?}")))?;
            match k.trim() {
                "cutpoints" => cuts = Some(parse_vec(v)?),
                "log_baseline" => base = Some(parse_vec(v)?),
                "covariate_coefficient" => coef = Some(parse_vec(v)?),
                other => return Err(Error::InvalidInput(format!("unknown model key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::InvalidInput(format!("model record lacks {k}"));
        let coef = coef.ok_or_else(|| missing("covariate_coefficient"))?;
        if coef.len() != 1 {
            return Err(Error::InvalidInput("covariate_coefficient must be a scalar".into()));
        }
        Self::new(
            cuts.ok_or_else(|| missing("cutpoints"))?,
            base.ok_or_else(|| missing("log_baseline"))?,
            coef[0],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepfun::product_limit;

    fn two_piece() -> ConditionalHazardModel {
        ConditionalHazardModel::new(vec![1.0], vec![0.5f64.ln(), 2.0f64.ln()], 0.3).unwrap()
    }

    #[test]
    fn cumulative_hazard_is_piecewise_linear() {
        let m = two_piece();
        assert!((m.baseline_cumulative(0.5) - 0.25).abs() < 1e-15);
        assert!((m.baseline_cumulative(1.0) - 0.5).abs() < 1e-15);
        assert!((m.baseline_cumulative(1.5) - 1.5).abs() < 1e-15);
        assert!((m.cumulative_hazard(1.5, 2.0) - 1.5 * 0.6f64.exp()).abs() < 1e-14);
        assert_eq!(m.hazard(1.0, 0.0), 2.0);
    }

    #[test]
    fn path_agrees_with_closed_form() {
        let m = two_piece();
        let p = m.cumhaz_path(0.7, 2.5);
        for t in [0.0, 0.3, 1.0, 2.0, 2.5] {
            assert!((p.value(t) - m.cumulative_hazard(t, 0.7)).abs() < 1e-14);
        }
        let s = product_limit(&p, 2.0).unwrap();
        assert!((s - m.survival(2.0, 0.7)).abs() < 1e-14);
    }

    #[test]
    fn zero_rate_piece() {
        let m = ConditionalHazardModel::new(vec![1.0], vec![f64::NEG_INFINITY, 0.0], 0.0).unwrap();
        assert_eq!(m.baseline_cumulative(0.5), 0.0);
        assert_eq!(m.baseline_cumulative(2.0), 1.0);
        assert_eq!(m.cumhaz_path(0.0, 3.0).segments().len(), 1);
    }

    #[test]
    fn record_round_trip() {
        let m = two_piece();
        let back: ConditionalHazardModel = m.to_string().parse().unwrap();
        assert_eq!(back, m);
        let c = ConditionalHazardModel::constant(0.0, 1.0);
        let back: ConditionalHazardModel = c.to_string().parse().unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ConditionalHazardModel::new(vec![1.0, 1.0], vec![0.0; 3], 0.0).is_err());
        assert!(ConditionalHazardModel::new(vec![1.0], vec![0.0], 0.0).is_err());
        assert!(ConditionalHazardModel::new(vec![], vec![f64::NAN], 0.0).is_err());
    }
}
