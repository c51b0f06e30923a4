//! Descriptive statistics shared by the preprocessing, diagnostics and ANOVA code.

use alloc::vec::Vec;

use crate::math;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` denominator; zero for a single value.
pub fn sample_variance(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            let m = mean(xs);
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
        }
    }
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    math::sqrt(sample_variance(xs))
}

/// Linear-interpolation quantile of already sorted data (Hyndman & Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
            let lo = h as usize;
            if lo + 1 >= n {
                return sorted[n - 1];
            }
            let frac = h - lo as f64;
            let q = sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
            // interpolation can undershoot the lower point by one ulp
            q.max(sorted[lo])
        }
    }
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Lag-1 sample autocorrelation about the mean; zero for constant or tiny inputs.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    if xs.len() < 3 {
        return 0.0;
    }
    let m = mean(xs);
    let denom: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    if denom <= 0.0 {
        return 0.0;
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / denom
}
