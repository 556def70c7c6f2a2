//! Small order-statistics and log-space helpers shared across the crate.

/// Empirical quantile with linear interpolation between order statistics,
/// i.e. the value at fractional index `q * (n - 1)` of the sorted sample.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let devs: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&devs)
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 points.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (ss / (n - 1) as f64).sqrt()
}

pub fn interquartile_range(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

/// log(mean(exp(values))) with max-shifting.
///
/// The inputs are sorted first, so the result is bit-identical under any
/// permutation of `values` (the estimator is exchangeable).
pub fn log_mean_exp(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NEG_INFINITY;
    }
    values.sort_by(f64::total_cmp);
    let max = *values.last().unwrap();
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln() - (values.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_uniform_grid() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 0.5), 50.0);
        assert_eq!(quantile(&v, 1.0), 100.0);
    }

    #[test]
    fn median_even_count_averages() {
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn log_mean_exp_is_exchangeable() {
        let mut a = vec![-3.0, -1.5, -2.25, -0.125, -7.5];
        let mut b = vec![-7.5, -0.125, -3.0, -2.25, -1.5];
        let va = log_mean_exp(&mut a);
        let vb = log_mean_exp(&mut b);
        assert_eq!(va.to_bits(), vb.to_bits());
    }

    #[test]
    fn log_mean_exp_handles_neg_infinity() {
        let mut v = vec![f64::NEG_INFINITY; 4];
        assert_eq!(log_mean_exp(&mut v), f64::NEG_INFINITY);
        let mut w = vec![f64::NEG_INFINITY, 0.0];
        let got = log_mean_exp(&mut w);
        assert!((got - (0.5f64).ln()).abs() < 1e-12);
    }
}
