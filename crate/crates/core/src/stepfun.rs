//! Exact algebra for finite-variation càdlàg paths.
//!
//! Two carriers are provided. [`StepPath`] is a pure step function.
//! [`FiniteVariationPath`] adds piecewise-constant density segments to a jump
//! part, which is enough to represent cumulative hazards of piecewise
//! exponential models, empirical distribution functions and counting-process
//! martingale residuals exactly. Every path is constant after its last
//! breakpoint; [`Horizon::Infinity`] addresses that terminal value.
//!
//! Integrals against a [`FiniteVariationPath`] split into a jump sum and a
//! density part. The density part is exact for step and piecewise-linear
//! integrands and falls back to adaptive quadrature for general
//! [`Integrand`]s.

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::numeric::integrate_smooth;

/// Upper limit of an integral or evaluation point that may be "beyond all
/// breakpoints".
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinity,
}

impl Horizon {
    fn covers(self, t: f64) -> bool {
        match self {
            Horizon::Finite(u) => t <= u,
            Horizon::Infinity => true,
        }
    }

    fn clamp(self, t: f64) -> f64 {
        match self {
            Horizon::Finite(u) => t.min(u),
            Horizon::Infinity => t,
        }
    }
}

impl From<f64> for Horizon {
    fn from(t: f64) -> Self {
        if t == f64::INFINITY {
            Horizon::Infinity
        } else {
            Horizon::Finite(t)
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("evaluation time {t} is not finite")));
    }
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("evaluation time {t} is negative")));
    }
    Ok(())
}

fn check_horizon(h: Horizon) -> Result<()> {
    match h {
        Horizon::Finite(t) => check_time(t),
        Horizon::Infinity => Ok(()),
    }
}

/// Right-continuous step function with finitely many jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPath {
    initial: f64,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepPath {
    pub fn new(initial: f64, jump_times: Vec<f64>, post_jump_values: Vec<f64>) -> Result<Self> {
        if jump_times.len() != post_jump_values.len() {
            return Err(Error::InvariantViolation(format!(
                "{} jump times but {} post-jump values",
                jump_times.len(),
                post_jump_values.len()
            )));
        }
        if !initial.is_finite() || post_jump_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvariantViolation("step path values must be finite".into()));
        }
        check_increasing(&jump_times, "jump times")?;
        Ok(Self {
            initial,
            times: jump_times,
            values: post_jump_values,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            times: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Empirical distribution function of `sample` (ties merged).
    pub fn ecdf(sample: &[f64]) -> Result<Self> {
        let mut sorted = sample.to_vec();
        if sorted.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("ECDF sample must be finite and nonnegative".into()));
        }
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut times = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        for (i, &x) in sorted.iter().enumerate() {
            let v = (i + 1) as f64 / n;
            if times.last() == Some(&x) {
                *values.last_mut().unwrap() = v;
            } else {
                times.push(x);
                values.push(v);
            }
        }
        Self::new(0.0, times, values)
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    pub fn post_jump_values(&self) -> &[f64] {
        &self.values
    }

    /// Checked càdlàg evaluation.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.value(t))
    }

    pub fn at(&self, h: Horizon) -> f64 {
        match h {
            Horizon::Finite(t) => self.value(t),
            Horizon::Infinity => self.terminal_value(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            self.initial
        } else {
            self.values[k - 1]
        }
    }

    pub fn terminal_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Exact Lebesgue integral over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut total = 0.0;
        let mut left = a;
        let mut current = self.value(a);
        let start = self.times.partition_point(|&s| s <= a);
        for (&s, &v) in self.times[start..].iter().zip(&self.values[start..]) {
            if s >= b {
                break;
            }
            total += current * (s - left);
            left = s;
            current = v;
        }
        total + current * (b - left)
    }
}

/// Jump of a finite-variation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

/// Interval `[start, end]` on which the path grows at constant `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

/// Càdlàg path made of an initial value, a pure-jump part and a
/// piecewise-constant density part.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteVariationPath {
    initial: f64,
    jumps: Vec<Jump>,
    segments: Vec<Segment>,
    jump_prefix: Vec<f64>,
    segment_prefix: Vec<f64>,
}

impl FiniteVariationPath {
    pub fn new(initial: f64, jumps: Vec<Jump>, segments: Vec<Segment>) -> Result<Self> {
        if !initial.is_finite() {
            return Err(Error::InvariantViolation("initial value must be finite".into()));
        }
        let times: Vec<f64> = jumps.iter().map(|j| j.time).collect();
        check_increasing(&times, "jump times")?;
        if jumps.iter().any(|j| !j.size.is_finite()) {
            return Err(Error::InvariantViolation("jump sizes must be finite".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite() && s.rate.is_finite()) {
                return Err(Error::InvariantViolation(format!("segment {i} is not finite")));
            }
            if s.start < 0.0 || !(s.end > s.start) {
                return Err(Error::InvariantViolation(format!(
                    "segment {i} = [{}, {}] must satisfy 0 <= start < end",
                    s.start, s.end
                )));
            }
            if i > 0 && s.start < segments[i - 1].end {
                return Err(Error::InvariantViolation(format!(
                    "segment {i} starts at {} before segment {} ends at {}",
                    s.start,
                    i - 1,
                    segments[i - 1].end
                )));
            }
        }
        let mut jump_prefix = Vec::with_capacity(jumps.len() + 1);
        jump_prefix.push(0.0);
        for j in &jumps {
            jump_prefix.push(jump_prefix.last().unwrap() + j.size);
        }
        let mut segment_prefix = Vec::with_capacity(segments.len() + 1);
        segment_prefix.push(0.0);
        for s in &segments {
            segment_prefix.push(segment_prefix.last().unwrap() + s.rate * (s.end - s.start));
        }
        Ok(Self {
            initial,
            jumps,
            segments,
            jump_prefix,
            segment_prefix,
        })
    }

    pub fn zero() -> Self {
        Self::new(0.0, Vec::new(), Vec::new()).expect("empty path is valid")
    }

    pub fn initial_value(&self) -> f64 {
        self.initial
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.value(t))
    }

    pub fn at(&self, h: Horizon) -> f64 {
        match h {
            Horizon::Finite(t) => self.value(t),
            Horizon::Infinity => self.terminal_value(),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.time <= t);
        self.initial + self.jump_prefix[k] + self.density_mass(t)
    }

    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.time < t);
        self.initial + self.jump_prefix[k] + self.density_mass(t)
    }

    pub fn terminal_value(&self) -> f64 {
        self.initial + self.jump_prefix[self.jumps.len()] + self.segment_prefix[self.segments.len()]
    }

    /// Mass of the density part on `[0, t]`.
    fn density_mass(&self, t: f64) -> f64 {
        let k = self.segments.partition_point(|s| s.end <= t);
        let mut mass = self.segment_prefix[k];
        if let Some(s) = self.segments.get(k) {
            if s.start < t {
                mass += s.rate * (t - s.start);
            }
        }
        mass
    }

    /// Density rate at `t` (right-continuous in `t`).
    pub fn rate_at(&self, t: f64) -> f64 {
        let k = self.segments.partition_point(|s| s.end <= t);
        match self.segments.get(k) {
            Some(s) if s.start <= t => s.rate,
            _ => 0.0,
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.jumps.iter().all(|j| j.size >= 0.0) && self.segments.iter().all(|s| s.rate >= 0.0)
    }

    /// Breakpoints: jump times and segment boundaries, sorted and deduplicated.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.jumps.iter().map(|j| j.time).collect();
        for s in &self.segments {
            b.push(s.start);
            b.push(s.end);
        }
        sort_dedup(&mut b);
        b
    }

    /// `Σ coef · path` in canonical form: jumps at equal times merged and the
    /// density refined onto a common partition.
    pub fn linear_combination(terms: &[(f64, &FiniteVariationPath)]) -> Self {
        let initial = terms.iter().map(|(c, p)| c * p.initial).sum();

        let mut raw: Vec<Jump> = terms
            .iter()
            .flat_map(|(c, p)| {
                p.jumps.iter().map(move |j| Jump {
                    time: j.time,
                    size: c * j.size,
                })
            })
            .collect();
        raw.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut jumps: Vec<Jump> = Vec::with_capacity(raw.len());
        for j in raw {
            match jumps.last_mut() {
                Some(last) if last.time == j.time => last.size += j.size,
                _ => jumps.push(j),
            }
        }

        let mut cuts: Vec<f64> = terms
            .iter()
            .flat_map(|(_, p)| p.segments.iter().flat_map(|s| [s.start, s.end]))
            .collect();
        sort_dedup(&mut cuts);
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let rate: f64 = terms.iter().map(|(c, p)| c * p.rate_at(mid)).sum();
            if rate != 0.0 {
                segments.push(Segment {
                    start: w[0],
                    end: w[1],
                    rate,
                });
            }
        }
        Self::new(initial, jumps, segments).expect("linear combination of valid paths is valid")
    }

    pub fn difference(&self, other: &FiniteVariationPath) -> Self {
        Self::linear_combination(&[(1.0, self), (-1.0, other)])
    }

    /// Exact Lebesgue integral of the (piecewise linear) path over `[a, b]`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        let mut cuts = vec![a, b];
        cuts.extend(self.breakpoints().into_iter().filter(|&x| x > a && x < b));
        sort_dedup(&mut cuts);
        cuts.windows(2)
            .map(|w| 0.5 * (w[1] - w[0]) * (self.value(w[0]) + self.left_limit(w[1])))
            .sum()
    }
}

impl From<&StepPath> for FiniteVariationPath {
    fn from(p: &StepPath) -> Self {
        let mut previous = p.initial;
        let jumps = p
            .times
            .iter()
            .zip(&p.values)
            .map(|(&time, &v)| {
                let size = v - previous;
                previous = v;
                Jump { time, size }
            })
            .collect();
        FiniteVariationPath::new(p.initial, jumps, Vec::new()).expect("step path is a valid FV path")
    }
}

/// Paths that can be viewed as a [`FiniteVariationPath`].
pub trait AsFiniteVariation {
    fn as_finite_variation(&self) -> Cow<'_, FiniteVariationPath>;
}

impl AsFiniteVariation for FiniteVariationPath {
    fn as_finite_variation(&self) -> Cow<'_, FiniteVariationPath> {
        Cow::Borrowed(self)
    }
}

impl AsFiniteVariation for StepPath {
    fn as_finite_variation(&self) -> Cow<'_, FiniteVariationPath> {
        Cow::Owned(FiniteVariationPath::from(self))
    }
}

/// Anything that can be integrated against a finite-variation path.
pub trait Integrand {
    fn value(&self, t: f64) -> f64;

    fn left_limit(&self, t: f64) -> f64;

    /// Times at which the integrand may jump.
    fn discontinuities(&self) -> Vec<f64>;

    /// Points where the integrand is continuous but not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Exact `∫_a^b value(t) dt`, when available.
    fn exact_integral(&self, _a: f64, _b: f64) -> Option<f64> {
        None
    }
}

impl Integrand for StepPath {
    fn value(&self, t: f64) -> f64 {
        StepPath::value(self, t)
    }

    fn left_limit(&self, t: f64) -> f64 {
        StepPath::left_limit(self, t)
    }

    fn discontinuities(&self) -> Vec<f64> {
        let mut previous = self.initial;
        self.times
            .iter()
            .zip(&self.values)
            .filter_map(|(&t, &v)| {
                let jumps = v != previous;
                previous = v;
                jumps.then_some(t)
            })
            .collect()
    }

    fn exact_integral(&self, a: f64, b: f64) -> Option<f64> {
        Some(self.integral(a, b))
    }
}

impl Integrand for FiniteVariationPath {
    fn value(&self, t: f64) -> f64 {
        FiniteVariationPath::value(self, t)
    }

    fn left_limit(&self, t: f64) -> f64 {
        FiniteVariationPath::left_limit(self, t)
    }

    fn discontinuities(&self) -> Vec<f64> {
        self.jumps.iter().filter(|j| j.size != 0.0).map(|j| j.time).collect()
    }

    fn kinks(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|s| [s.start, s.end]).collect()
    }

    fn exact_integral(&self, a: f64, b: f64) -> Option<f64> {
        Some(self.integral(a, b))
    }
}

/// Continuous integrand given by a closure, smooth between `kinks`.
pub struct FnPath<F> {
    f: F,
    kinks: Vec<f64>,
}

impl<F: Fn(f64) -> f64> FnPath<F> {
    pub fn new(f: F) -> Self {
        Self { f, kinks: Vec::new() }
    }

    pub fn with_kinks(f: F, mut kinks: Vec<f64>) -> Self {
        sort_dedup(&mut kinks);
        Self { f, kinks }
    }
}

impl<F: Fn(f64) -> f64> Integrand for FnPath<F> {
    fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn left_limit(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    fn discontinuities(&self) -> Vec<f64> {
        Vec::new()
    }

    fn kinks(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// Options for [`rs_integrate`].
#[derive(Debug, Clone, Copy)]
pub struct RsOptions {
    /// Evaluate the integrand at left limits for jump contributions
    /// (predictable integrands). Ties with integrator jumps are only allowed
    /// when this is set.
    pub use_left_limits: bool,
    /// Relative tolerance of the quadrature fallback.
    pub rel_tol: f64,
}

impl Default for RsOptions {
    fn default() -> Self {
        Self {
            use_left_limits: false,
            rel_tol: 1e-10,
        }
    }
}

/// Pathwise Riemann–Stieltjes integral `∫_{[0, upper]} integrand dintegrator`.
pub fn rs_integrate<I: Integrand + ?Sized>(
    integrand: &I,
    integrator: &FiniteVariationPath,
    upper: impl Into<Horizon>,
    opts: RsOptions,
) -> Result<f64> {
    let upper = upper.into();
    check_horizon(upper)?;

    let mut discontinuities = integrand.discontinuities();
    sort_dedup(&mut discontinuities);

    let mut total = 0.0;
    for j in integrator.jumps.iter().take_while(|j| upper.covers(j.time)) {
        let g = if opts.use_left_limits {
            integrand.left_limit(j.time)
        } else {
            if j.size != 0.0 && discontinuities.binary_search_by(|x| x.total_cmp(&j.time)).is_ok() {
                return Err(Error::JumpTie { time: j.time });
            }
            integrand.value(j.time)
        };
        total += g * j.size;
    }

    let mut splits = discontinuities;
    splits.extend(integrand.kinks());
    sort_dedup(&mut splits);
    for s in &integrator.segments {
        let lo = s.start;
        let hi = upper.clamp(s.end);
        if !(hi > lo) || s.rate == 0.0 {
            continue;
        }
        let piece = match integrand.exact_integral(lo, hi) {
            Some(v) => v,
            None => {
                let mut cuts = vec![lo, hi];
                cuts.extend(splits.iter().copied().filter(|&x| x > lo && x < hi));
                sort_dedup(&mut cuts);
                cuts.windows(2)
                    .map(|w| integrate_smooth(|t| integrand.value(t), w[0], w[1], opts.rel_tol))
                    .sum()
            }
        };
        total += s.rate * piece;
    }
    Ok(total)
}

/// Product integral `Π_{[0,t]}(1 − dΛ)` of a nondecreasing cumulative hazard.
pub fn product_limit(cumhaz: &FiniteVariationPath, t: impl Into<Horizon>) -> Result<f64> {
    let t = t.into();
    check_horizon(t)?;
    if !cumhaz.is_nondecreasing() {
        return Err(Error::InvalidInput("cumulative hazard must be nondecreasing".into()));
    }
    let mut continuous = 0.0;
    for s in &cumhaz.segments {
        let hi = t.clamp(s.end);
        if hi > s.start {
            continuous += s.rate * (hi - s.start);
        }
    }
    let mut survival = (-continuous).exp();
    for j in cumhaz.jumps.iter().take_while(|j| t.covers(j.time)) {
        if j.size > 1.0 {
            return Err(Error::Domain(format!(
                "hazard jump {} at t = {} exceeds 1 (negative survival)",
                j.size, j.time
            )));
        }
        survival *= 1.0 - j.size;
    }
    Ok(survival)
}

/// `|f(0)| + sup_P Σ|f(t_{m+1}) − f(t_m)|` over `[0, ∞)`, for `f = path` or
/// `f = path − difference_of`. Computed exactly on the common refinement of
/// both paths' breakpoints.
pub fn total_variation(
    path: &dyn AsFiniteVariation,
    difference_of: Option<&dyn AsFiniteVariation>,
    include_initial: bool,
) -> f64 {
    let f = combined(path, difference_of);
    let at_zero = f.value(0.0).abs();
    let jumps: f64 = f.jumps.iter().filter(|j| j.time > 0.0).map(|j| j.size.abs()).sum();
    let density: f64 = f.segments.iter().map(|s| s.rate.abs() * (s.end - s.start)).sum();
    if include_initial {
        at_zero + jumps + density
    } else {
        jumps + density
    }
}

/// Exact `sup_t |a(t) − b(t)|` over `[0, ∞)`.
pub fn sup_distance(a: &dyn AsFiniteVariation, b: &dyn AsFiniteVariation) -> f64 {
    let f = combined(a, Some(b));
    let mut sup = f.value(0.0).abs().max(f.terminal_value().abs());
    for x in f.breakpoints() {
        sup = sup.max(f.value(x).abs()).max(f.left_limit(x).abs());
    }
    sup
}

fn combined(a: &dyn AsFiniteVariation, b: Option<&dyn AsFiniteVariation>) -> FiniteVariationPath {
    let a = a.as_finite_variation();
    match b {
        Some(b) => a.difference(&b.as_finite_variation()),
        None => FiniteVariationPath::linear_combination(&[(1.0, &a)]),
    }
}

/// Root-mean-square sup and TV norms over a collection of paths: the sample
/// analogues of the L² supremum and L² total-variation norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormReport {
    pub sup_norm: f64,
    pub tv_norm: f64,
    pub sample_size: usize,
}

impl NormReport {
    /// `pairs` yields per-path `(sup |f|, TV(f))`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let (mut s2, mut v2, mut n) = (0.0, 0.0, 0usize);
        for (s, v) in pairs {
            s2 += s * s;
            v2 += v * v;
            n += 1;
        }
        let n_f = n.max(1) as f64;
        Self {
            sup_norm: (s2 / n_f).sqrt(),
            tv_norm: (v2 / n_f).sqrt(),
            sample_size: n,
        }
    }
}

fn check_increasing(times: &[f64], what: &str) -> Result<()> {
    for (i, &t) in times.iter().enumerate() {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "{what}: entry {i} = {t} is not a finite nonnegative time"
            )));
        }
        if i > 0 && t <= times[i - 1] {
            return Err(Error::InvariantViolation(format!(
                "{what} must be strictly increasing (entry {i} = {t} after {})",
                times[i - 1]
            )));
        }
    }
    Ok(())
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}
