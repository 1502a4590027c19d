//! Order-fixed reductions. Every sum in the reports goes through here so that
//! results do not depend on thread count.

/// Pairwise (cascade) summation over the slice in its given order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Root-mean-square and maximum absolute value.
///
/// Squares are sorted before summation, so the result is independent of the
/// order of `values`.
pub fn rms_and_max(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut squares: Vec<f64> = values.iter().map(|v| v * v).collect();
    squares.sort_by(f64::total_cmp);
    let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let rms = (pairwise_sum(&squares) / values.len() as f64).sqrt();
    // sqrt(mean) of equal squares can overshoot the max by an ulp
    (rms.min(max), max)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_err(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
