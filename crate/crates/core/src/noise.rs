//! Contamination-robust residual density estimation: a Gaussian KDE fit after
//! discarding the fraction of points farthest from the median.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Points per unit bandwidth kept in the evaluation window. Kernels farther
/// than `WINDOW_BANDWIDTHS` bandwidths contribute less than exp(-50) of the
/// nearest kernel and are skipped.
const WINDOW_BANDWIDTHS: f64 = 10.0;
const MIN_WINDOW_POINTS: usize = 16;

/// Gaussian KDE over the retained residuals of one node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrimmedKde {
    /// Retained residuals, ascending.
    points: Vec<f64>,
    bandwidth: f64,
    trim_alpha: f64,
    #[serde(skip)]
    cached_peak: std::sync::OnceLock<f64>,
}

impl TrimmedKde {
    /// Drops the `ceil(alpha * n)` residuals farthest from the median
    /// (distance ties broken by ascending index, earlier indices retained
    /// first), then fits a Gaussian KDE with Silverman's rule on the rest:
    /// `h = 0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
    pub fn fit(residuals: &[f64], alpha: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&alpha) {
            return Err(Error::Input(format!(
                "trim fraction {alpha} outside [0, 0.5)"
            )));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("non-finite residual".into()));
        }
        let n = residuals.len();
        let drop = (alpha * n as f64).ceil() as usize;
        if n.saturating_sub(drop) < 10 {
            return Err(Error::Input(format!(
                "{} residuals survive trimming; need at least 10",
                n.saturating_sub(drop)
            )));
        }
        let med = stats::median(residuals);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let da = (residuals[a] - med).abs();
            let db = (residuals[b] - med).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let mut points: Vec<f64> = order[..n - drop].iter().map(|&i| residuals[i]).collect();
        points.sort_by(f64::total_cmp);

        let sd = stats::sample_sd(&points);
        let iqr = stats::interquartile_range(&points);
        let spread = sd.min(iqr / 1.34);
        let mut bandwidth = 0.9 * spread * (points.len() as f64).powf(-0.2);
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            log::warn!("residuals have zero spread after trimming; flooring bandwidth at 1e-9");
            bandwidth = 1e-9;
        }
        Ok(Self {
            points,
            bandwidth,
            trim_alpha: alpha,
            cached_peak: std::sync::OnceLock::new(),
        })
    }

    pub fn retained(&self) -> &[f64] {
        &self.points
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn trim_alpha(&self) -> f64 {
        self.trim_alpha
    }

    /// Log of the mixture density. Strictly finite for finite `x`.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::Input(format!("log_density at non-finite x = {x}")));
        }
        Ok(self.log_density_raw(x))
    }

    pub(crate) fn log_density_raw(&self, x: f64) -> f64 {
        let n = self.points.len();
        let h = self.bandwidth;
        // Restrict to kernels near x; pad the window so it never goes empty.
        let radius = WINDOW_BANDWIDTHS * h;
        let mut lo = self.points.partition_point(|&p| p < x - radius);
        let mut hi = self.points.partition_point(|&p| p <= x + radius);
        if hi - lo < MIN_WINDOW_POINTS {
            let pad = (MIN_WINDOW_POINTS - (hi - lo)).div_ceil(2);
            lo = lo.saturating_sub(pad);
            hi = (hi + pad).min(n);
        }
        let window = &self.points[lo..hi];

        // log-sum-exp over the squared exponents, shifted by the maximum.
        let mut max_e = f64::NEG_INFINITY;
        for &p in window {
            let t = (x - p) / h;
            let e = -0.5 * t * t;
            if e > max_e {
                max_e = e;
            }
        }
        let mut sum = 0.0;
        for &p in window {
            let t = (x - p) / h;
            sum += (-0.5 * t * t - max_e).exp();
        }
        max_e + sum.ln() - (n as f64).ln() - h.ln() - LN_SQRT_2PI
    }

    /// Upper bound on the log-density anywhere: the maximum over a 512-point
    /// grid spanning the retained residuals widened by three bandwidths, plus
    /// the between-grid-point slack `delta^2 / (8 h^2)`.
    ///
    /// The slack term makes the bound rigorous: the log-density of a Gaussian
    /// mixture has second derivative at least `-1/h^2`, so on a grid cell of
    /// width `delta` the function cannot exceed its endpoint maximum by more
    /// than `delta^2 / (8 h^2)`; outside the widened range the density is
    /// monotone away from the data. This serves as the "residual improves
    /// maximally" surrogate in optimistic gains.
    pub fn peak_log_density(&self) -> f64 {
        *self.cached_peak.get_or_init(|| {
            let lo = self.points[0] - 3.0 * self.bandwidth;
            let hi = self.points[self.points.len() - 1] + 3.0 * self.bandwidth;
            let mut best = f64::NEG_INFINITY;
            for i in 0..512 {
                let x = lo + (hi - lo) * i as f64 / 511.0;
                best = best.max(self.log_density_raw(x));
            }
            let delta = (hi - lo) / 511.0;
            let slack = delta * delta / (8.0 * self.bandwidth * self.bandwidth);
            best + slack
        })
    }

    /// One draw: a retained point chosen uniformly plus Gaussian noise of
    /// scale `bandwidth`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let idx = rng.gen_range(0..self.points.len());
        let z: f64 = rng.sample(StandardNormal);
        self.points[idx] + self.bandwidth * z
    }
}
