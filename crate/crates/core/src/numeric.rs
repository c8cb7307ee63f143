//! Small numerical helpers shared across modules.

/// Sums `values` by recursive halving in index order.
///
/// The result depends only on the input order, never on how the values were
/// produced, so reductions over parallel results stay bit-stable.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// One step of the splitmix64 generator.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-replication seed: the replication index XOR-folded into the master
/// seed, then mixed by one splitmix64 step.
pub fn replication_seed(master: u64, replication: u64) -> u64 {
    splitmix64(master ^ replication)
}

/// Adaptive integral of a smooth `f` over `[a, b]` to relative tolerance
/// `rel_tol` (double-exponential rule).
pub fn integrate_smooth<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    // Scale the absolute target by a cheap magnitude probe.
    let probe = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|u| f(a + u * (b - a)).abs())
        .fold(0.0_f64, f64::max);
    let scale = (probe * (b - a)).max(f64::MIN_POSITIVE);
    quadrature::integrate(&f, a, b, rel_tol * scale).integral
}

/// Scientific notation with 17 significant digits; non-finite values as `NA`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NA".to_string()
    }
}

/// Sample skewness and excess kurtosis.
pub fn shape_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let m2 = pairwise_sum(&centered.iter().map(|d| d * d).collect::<Vec<_>>()) / n;
    let m3 = pairwise_sum(&centered.iter().map(|d| d * d * d).collect::<Vec<_>>()) / n;
    let m4 = pairwise_sum(&centered.iter().map(|d| d * d * d * d).collect::<Vec<_>>()) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = pairwise_mean(x);
    let my = pairwise_mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
