//! Robust per-node mechanism estimation: additive penalized cubic-spline
//! median regression.
//!
//! The pinball loss at q = 0.5 is minimized by iteratively reweighted least
//! squares on a smoothed surrogate `0.5 * sqrt(r^2 + h^2)`; the reweighting
//! is an exact majorize-minimize step, so the smoothed objective decreases
//! monotonically. Targets are standardized internally by median/MAD so the
//! fixed curvature penalty acts on a scale-free problem.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Knots-per-parent rule of thumb: `min(max(5, floor(n^(1/3) / 2)), 30)`.
pub fn knots_for(n_samples: usize) -> usize {
    assert!(n_samples >= 1, "knots_for needs at least one sample");
    let rule = ((n_samples as f64).cbrt() / 2.0 + 1e-9).floor() as usize;
    rule.clamp(5, 30)
}

/// `m` knots at the empirical quantiles `i / (m - 1)`. Duplicate quantile
/// values are jittered minimally to restore strict monotonicity.
pub fn place_knots(values: &[f64], m: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Input("cannot place knots on empty values".into()));
    }
    if m < 2 {
        return Err(Error::Input(format!("need at least 2 knots, got {m}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if range == 0.0 {
        return Err(Error::Degenerate(
            "all covariate values identical; cannot place knots".into(),
        ));
    }
    let mut knots: Vec<f64> = (0..m)
        .map(|i| stats::quantile_sorted(&sorted, i as f64 / (m - 1) as f64))
        .collect();
    let jitter = 1e-9 * range;
    for i in 1..m {
        if knots[i] <= knots[i - 1] {
            knots[i] = knots[i - 1] + jitter;
        }
    }
    Ok(knots)
}

// ---------------------------------------------------------------------------
// Cubic B-spline basis on a clamped knot vector.

/// Extended (clamped) knot vector: boundary knots repeated to multiplicity 4.
fn extend_knots(knots: &[f64]) -> Vec<f64> {
    let mut tau = Vec::with_capacity(knots.len() + 6);
    for _ in 0..3 {
        tau.push(knots[0]);
    }
    tau.extend_from_slice(knots);
    for _ in 0..3 {
        tau.push(knots[knots.len() - 1]);
    }
    tau
}

/// Index of the knot interval containing `x`, clamped to the boundary spans.
fn find_interval(knots: &[f64], x: f64) -> usize {
    let m = knots.len();
    let i = knots.partition_point(|&k| k <= x);
    i.saturating_sub(1).min(m - 2)
}

/// The four nonzero cubic basis values at `x`; `span = interval + 3` indexes
/// the extended knot vector. Basis `span - 3 + r` takes value `out[r]`.
fn basis_funs(tau: &[f64], span: usize, x: f64, degree: usize) -> [f64; 4] {
    let mut n = [0.0f64; 4];
    let mut left = [0.0f64; 4];
    let mut right = [0.0f64; 4];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - tau[span + 1 - j];
        right[j] = tau[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let temp = if den != 0.0 { n[r] / den } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// One additive component: a cubic spline in a single parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBlock {
    /// Which input slot this block reads.
    pub parent_slot: usize,
    /// Strictly increasing knots spanning the training range.
    pub knots: Vec<f64>,
    /// One coefficient per basis function (`knots.len() + 2` of them).
    pub coefficients: Vec<f64>,
}

impl SplineBlock {
    /// Spline value inside the knot range.
    fn eval_inside(&self, x: f64) -> f64 {
        let tau = extend_knots(&self.knots);
        let span = find_interval(&self.knots, x) + 3;
        let b = basis_funs(&tau, span, x, 3);
        (0..4).map(|r| b[r] * self.coefficients[span - 3 + r]).sum()
    }

    /// First derivative inside the knot range, via the degree-2 basis.
    fn deriv_inside(&self, x: f64) -> f64 {
        let tau = extend_knots(&self.knots);
        let span = find_interval(&self.knots, x) + 3;
        let quad = basis_funs(&tau, span, x, 2);
        // Quadratic basis k is nonzero for k in span-2 ..= span.
        let q = |k: usize| -> f64 {
            if k + 2 >= span && k <= span {
                quad[k + 2 - span]
            } else {
                0.0
            }
        };
        let mut out = 0.0;
        for i in (span - 3)..=span {
            let d1 = tau[i + 3] - tau[i];
            let d2 = tau[i + 4] - tau[i + 1];
            let mut deriv = 0.0;
            if d1 != 0.0 {
                deriv += q(i) / d1;
            }
            if d2 != 0.0 {
                deriv -= q(i + 1) / d2;
            }
            out += 3.0 * deriv * self.coefficients[i];
        }
        out
    }

    /// Value at `x`, extending linearly beyond the boundary knots.
    pub fn eval(&self, x: f64) -> f64 {
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        if x < lo {
            self.eval_inside(lo) + self.deriv_inside(lo) * (x - lo)
        } else if x > hi {
            self.eval_inside(hi) + self.deriv_inside(hi) * (x - hi)
        } else {
            self.eval_inside(x)
        }
    }
}

/// Fitted additive mechanism for one node: sum of per-parent splines plus an
/// intercept. Constant parents are dropped at fit time and contribute nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineMechanism {
    /// Expected input row length (the original parent count).
    pub input_len: usize,
    pub blocks: Vec<SplineBlock>,
    pub intercept: f64,
    /// Curvature penalty the mechanism was fitted with.
    pub lambda: f64,
}

impl SplineMechanism {
    /// Intercept-only mechanism (used for root nodes and degenerate fits).
    pub fn constant(input_len: usize, value: f64) -> Self {
        Self {
            input_len,
            blocks: Vec::new(),
            intercept: value,
            lambda: 0.0,
        }
    }

    pub fn predict(&self, parents_row: &[f64]) -> Result<f64> {
        if parents_row.len() != self.input_len {
            return Err(Error::Input(format!(
                "expected {} parent values, got {}",
                self.input_len,
                parents_row.len()
            )));
        }
        if parents_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite parent value".into()));
        }
        Ok(self.predict_unchecked(parents_row))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, parents_row: &[f64]) -> f64 {
        let mut out = self.intercept;
        for block in &self.blocks {
            out += block.eval(parents_row[block.parent_slot]);
        }
        out
    }
}

/// Exact penalized pinball objective of a mechanism on data:
/// `sum(pinball_0.5(y - f(x))) + lambda * ||second differences of coefs||^2`.
pub fn penalized_objective(
    mech: &SplineMechanism,
    parent_columns: &[Vec<f64>],
    target: &[f64],
) -> f64 {
    let n = target.len();
    let mut loss = 0.0;
    let mut row = vec![0.0; mech.input_len];
    for i in 0..n {
        for (k, col) in parent_columns.iter().enumerate() {
            row[k] = col[i];
        }
        let r = target[i] - mech.predict_unchecked(&row);
        loss += 0.5 * r.abs();
    }
    let mut penalty = 0.0;
    for block in &mech.blocks {
        let c = &block.coefficients;
        for i in 0..c.len() - 2 {
            let d = c[i] - 2.0 * c[i + 1] + c[i + 2];
            penalty += d * d;
        }
    }
    loss + mech.lambda * penalty
}

const MAX_ITERATIONS: usize = 200;
const RELATIVE_TOLERANCE: f64 = 1e-8;
const COEFFICIENT_RIDGE: f64 = 1e-9;

/// Fits the additive cubic-spline median regression of `target` on the given
/// parent columns.
///
/// Rows are reordered into a canonical sort before fitting, so the result is
/// invariant (bit-exact) under permutations of the samples.
pub fn fit_median(
    parent_columns: &[Vec<f64>],
    target: &[f64],
    lambda: f64,
) -> Result<SplineMechanism> {
    let n = target.len();
    let k = parent_columns.len();
    if k == 0 {
        return Err(Error::Input("fit_median needs at least one parent".into()));
    }
    if n < 10 {
        return Err(Error::Input(format!("need at least 10 samples, got {n}")));
    }
    if parent_columns.iter().any(|c| c.len() != n) {
        return Err(Error::Input("parent column length mismatch".into()));
    }
    let finite = |v: &f64| v.is_finite();
    if !target.iter().all(finite) || !parent_columns.iter().all(|c| c.iter().all(finite)) {
        return Err(Error::Input(
            "non-finite entries in regression inputs".into(),
        ));
    }
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::Input(format!(
            "penalty {lambda} must be nonnegative"
        )));
    }

    // Canonical row order: lexicographic in (parents, target).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        for col in parent_columns {
            match col[a].total_cmp(&col[b]) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        target[a].total_cmp(&target[b])
    });
    let y_raw: Vec<f64> = order.iter().map(|&i| target[i]).collect();
    let cols: Vec<Vec<f64>> = parent_columns
        .iter()
        .map(|c| order.iter().map(|&i| c[i]).collect())
        .collect();

    // Standardize the target by median/MAD so lambda acts scale-free.
    let med_y = stats::median(&y_raw);
    let mad_y = stats::mad(&y_raw);
    let scale = if mad_y > 0.0 {
        mad_y
    } else {
        stats::sample_sd(&y_raw)
    };
    if scale == 0.0 {
        return Ok(SplineMechanism::constant(k, med_y));
    }
    let y: Vec<f64> = y_raw.iter().map(|v| (v - med_y) / scale).collect();
    let smoothing = f64::max(1e-4 * mad_y, 1e-8) / scale;

    // Knot placement; constant parents are dropped.
    let m = knots_for(n);
    let mut blocks: Vec<(usize, Vec<f64>)> = Vec::new();
    for (slot, col) in cols.iter().enumerate() {
        match place_knots(col, m) {
            Ok(knots) => blocks.push((slot, knots)),
            Err(Error::Degenerate(_)) => {
                log::warn!("parent {slot} is constant; dropping it from the additive model");
            }
            Err(e) => return Err(e),
        }
    }
    if blocks.is_empty() {
        let median_mech = SplineMechanism::constant(k, stats::median(&y_raw));
        return Ok(median_mech);
    }

    // Sparse design rows: intercept at column 0, then per-block bases.
    let per_block = m + 2;
    let p = 1 + blocks.len() * per_block;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(1 + 4 * blocks.len()); n];
    for (i, row) in rows.iter_mut().enumerate() {
        row.push((0, 1.0));
        for (b, (slot, knots)) in blocks.iter().enumerate() {
            let x = cols[*slot][i];
            let tau = extend_knots(knots);
            let span = find_interval(knots, x) + 3;
            let vals = basis_funs(&tau, span, x, 3);
            let base = 1 + b * per_block + (span - 3);
            for (r, &v) in vals.iter().enumerate() {
                row.push((base + r, v));
            }
        }
    }

    // Penalty: second differences of each block's coefficients, plus a tiny
    // ridge to pin the split between the intercept and block constants.
    let mut penalty = DMatrix::<f64>::zeros(p, p);
    for b in 0..blocks.len() {
        let off = 1 + b * per_block;
        for i in 0..per_block - 2 {
            let idx = [off + i, off + i + 1, off + i + 2];
            let w = [1.0, -2.0, 1.0];
            for a in 0..3 {
                for c in 0..3 {
                    penalty[(idx[a], idx[c])] += lambda * w[a] * w[c];
                }
            }
        }
    }
    for j in 1..p {
        penalty[(j, j)] += COEFFICIENT_RIDGE;
    }

    let smoothed_objective = |beta: &DVector<f64>| -> f64 {
        let mut obj = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let pred: f64 = row.iter().map(|&(j, v)| v * beta[j]).sum();
            let r = y[i] - pred;
            obj += 0.5 * (r * r + smoothing * smoothing).sqrt();
        }
        let pb = beta.transpose() * &penalty * beta;
        obj + pb[(0, 0)]
    };

    let mut beta = DVector::<f64>::zeros(p);
    let mut prev_obj = smoothed_objective(&beta);
    for _ in 0..MAX_ITERATIONS {
        // Weighted normal equations with w_i = 0.25 / sqrt(r^2 + h^2).
        let mut a = penalty.clone();
        let mut rhs = DVector::<f64>::zeros(p);
        for (i, row) in rows.iter().enumerate() {
            let pred: f64 = row.iter().map(|&(j, v)| v * beta[j]).sum();
            let r = y[i] - pred;
            let w = 0.25 / (r * r + smoothing * smoothing).sqrt();
            for &(j1, v1) in row {
                rhs[j1] += w * v1 * y[i];
                for &(j2, v2) in row {
                    if j2 >= j1 {
                        a[(j1, j2)] += w * v1 * v2;
                    }
                }
            }
        }
        for j1 in 0..p {
            for j2 in 0..j1 {
                a[(j1, j2)] = a[(j2, j1)];
            }
        }
        let chol = match Cholesky::new(a) {
            Some(c) => c,
            None => return Err(Error::Solver("singular system in median spline fit".into())),
        };
        beta = chol.solve(&rhs);
        let obj = smoothed_objective(&beta);
        let rel = (prev_obj - obj).abs() / prev_obj.abs().max(1.0);
        prev_obj = obj;
        if rel < RELATIVE_TOLERANCE {
            break;
        }
    }

    // Exact intercept polish: with the spline part fixed, the optimal
    // intercept is the median of the partial residuals.
    let partial: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let spline: f64 = row
                .iter()
                .filter(|&&(j, _)| j > 0)
                .map(|&(j, v)| v * beta[j])
                .sum();
            y[i] - spline
        })
        .collect();
    beta[0] = stats::median(&partial);

    // De-standardize back to target units.
    let mechanism = SplineMechanism {
        input_len: k,
        blocks: blocks
            .iter()
            .enumerate()
            .map(|(b, (slot, knots))| SplineBlock {
                parent_slot: *slot,
                knots: knots.clone(),
                coefficients: (0..per_block)
                    .map(|r| scale * beta[1 + b * per_block + r])
                    .collect(),
            })
            .collect(),
        intercept: scale * beta[0] + med_y,
        lambda,
    };
    Ok(mechanism)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn knot_rule_matches_hand_computed_values() {
        assert_eq!(knots_for(2000), 6);
        assert_eq!(knots_for(8), 5);
        assert_eq!(knots_for(1_000_000), 30);
        assert_eq!(knots_for(1), 5);
    }

    #[test]
    fn knots_at_uniform_quantiles() {
        let values: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(place_knots(&values, 3).unwrap(), vec![0.0, 50.0, 100.0]);
    }

    #[test]
    fn knots_strictly_increasing_within_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let knots = place_knots(&values, 5).unwrap();
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        for w in knots.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(knots[0] >= lo && knots[4] <= hi);
    }

    #[test]
    fn identical_values_are_degenerate() {
        assert!(matches!(
            place_knots(&[5.0, 5.0, 5.0], 3),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn duplicated_quantiles_get_jittered() {
        // Heavy ties at 1.0 make several interior quantiles collide.
        let mut values = vec![1.0; 80];
        values.extend([0.0, 2.0, 3.0, 4.0]);
        let knots = place_knots(&values, 7).unwrap();
        for w in knots.windows(2) {
            assert!(w[0] < w[1], "knots {knots:?} not strictly increasing");
        }
    }

    fn fit_single(xs: &[f64], ys: &[f64]) -> SplineMechanism {
        fit_median(&[xs.to_vec()], ys, 1.0).unwrap()
    }

    #[test]
    fn noiseless_linear_target_is_interpolated() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..300).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let mech = fit_single(&xs, &ys);
        for (x, y) in xs.iter().zip(&ys) {
            let pred = mech.predict(&[*x]).unwrap();
            assert!(
                (pred - y).abs() < 1e-3,
                "prediction {pred} vs target {y} at x={x}"
            );
        }
    }

    #[test]
    fn constant_target_yields_constant_fit() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys = vec![3.25; 50];
        let mech = fit_single(&xs, &ys);
        for x in [-10.0, 0.0, 25.0, 80.0] {
            assert!((mech.predict(&[x]).unwrap() - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn median_fit_resists_contamination_where_least_squares_fails() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 400;
        let xs: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>()).collect();
        let mut ys: Vec<f64> = xs
            .iter()
            .map(|x| x + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        for i in 0..n / 20 {
            ys[i * 20] += 100.0;
        }
        let mech = fit_single(&xs, &ys);
        let mad_truth: f64 = xs
            .iter()
            .map(|&x| (mech.predict(&[x]).unwrap() - x).abs())
            .sum::<f64>()
            / n as f64;
        assert!(mad_truth < 0.1, "median fit deviation {mad_truth}");

        // Unpenalized least-squares oracle on the same basis for contrast.
        let m = knots_for(n);
        let knots = place_knots(&xs, m).unwrap();
        let tau = extend_knots(&knots);
        let p = m + 3;
        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut b = DVector::<f64>::zeros(p);
        for (i, &x) in xs.iter().enumerate() {
            let span = find_interval(&knots, x) + 3;
            let vals = basis_funs(&tau, span, x, 3);
            let mut row = vec![(0usize, 1.0)];
            for (r, &v) in vals.iter().enumerate() {
                row.push((1 + span - 3 + r, v));
            }
            for &(j1, v1) in &row {
                b[j1] += v1 * ys[i];
                for &(j2, v2) in &row {
                    a[(j1, j2)] += v1 * v2;
                }
            }
        }
        for j in 0..p {
            a[(j, j)] += 1e-9;
        }
        let beta = Cholesky::new(a).unwrap().solve(&b);
        let ls_dev: f64 = xs
            .iter()
            .map(|&x| {
                let span = find_interval(&knots, x) + 3;
                let vals = basis_funs(&tau, span, x, 3);
                let pred: f64 = beta[0]
                    + (0..4)
                        .map(|r| vals[r] * beta[1 + span - 3 + r])
                        .sum::<f64>();
                (pred - x).abs()
            })
            .sum::<f64>()
            / n as f64;
        assert!(
            ls_dev > mad_truth,
            "least squares ({ls_dev}) should deviate more than the median fit ({mad_truth})"
        );
        assert!(ls_dev > 0.1);
    }

    #[test]
    fn intercept_only_prediction_is_intercept() {
        let mech = SplineMechanism::constant(2, 7.5);
        assert_eq!(mech.predict(&[1.0, 2.0]).unwrap(), 7.5);
    }

    #[test]
    fn extrapolation_is_linear_with_boundary_slope() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        let mech = fit_single(&xs, &ys);
        let hi = mech.blocks[0].knots.last().copied().unwrap();
        let f_hi = mech.predict(&[hi]).unwrap();
        let slope = (mech.predict(&[hi + 1.0]).unwrap() - f_hi) / 1.0;
        let far = mech.predict(&[hi + 500.0]).unwrap();
        assert!(far.is_finite());
        assert!(
            (far - (f_hi + slope * 500.0)).abs() < 1e-6,
            "extrapolation bends: {far}"
        );
    }

    #[test]
    fn predict_rejects_bad_rows() {
        let mech = SplineMechanism::constant(1, 0.0);
        assert!(mech.predict(&[]).is_err());
        assert!(mech.predict(&[f64::NAN]).is_err());
    }

    #[test]
    fn intercept_perturbation_never_improves_the_objective() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..250).map(|_| rng.gen::<f64>() * 4.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (x - 1.5).powi(2) + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cols = vec![xs.clone()];
        let mech = fit_median(&cols, &ys, 1.0).unwrap();
        let base = penalized_objective(&mech, &cols, &ys);
        for eps in [1e-3, -1e-3] {
            let mut shifted = mech.clone();
            shifted.intercept += eps;
            let perturbed = penalized_objective(&shifted, &cols, &ys);
            assert!(
                perturbed >= base - 1e-12,
                "intercept shift {eps} lowered the objective: {perturbed} < {base}"
            );
        }
    }

    #[test]
    fn about_half_of_residuals_are_nonpositive() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let n = 500;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.sin() + 0.2 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mech = fit_single(&xs, &ys);
        let nonpos = xs
            .iter()
            .zip(&ys)
            .filter(|(x, y)| **y - mech.predict(&[**x]).unwrap() <= 0.0)
            .count();
        let frac = nonpos as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.05, "nonpositive fraction {frac}");
    }

    #[test]
    fn sample_order_does_not_change_the_fit() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 120;
        let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x * x + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mech = fit_median(std::slice::from_ref(&xs), &ys, 1.0).unwrap();

        // Rotate the samples: same multiset, different order.
        let rot = n / 3;
        let xs2: Vec<f64> = xs.iter().cycle().skip(rot).take(n).copied().collect();
        let ys2: Vec<f64> = ys.iter().cycle().skip(rot).take(n).copied().collect();
        let mech2 = fit_median(&[xs2], &ys2, 1.0).unwrap();
        assert_eq!(mech, mech2);
    }

    #[test]
    fn fit_is_affine_equivariant_in_the_target() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen::<f64>() * 3.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| x.cos() + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (a, b) = (-2.5, 4.0);
        let ys_t: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let mech = fit_median(std::slice::from_ref(&xs), &ys, 1.0).unwrap();
        let mech_t = fit_median(std::slice::from_ref(&xs), &ys_t, 1.0).unwrap();
        for x in xs.iter().step_by(7) {
            let lhs = mech_t.predict(&[*x]).unwrap();
            let rhs = a * mech.predict(&[*x]).unwrap() + b;
            assert!((lhs - rhs).abs() < 1e-6, "at {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn constant_parent_is_dropped_with_surviving_fit() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let xs: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let constant = vec![2.0; 100];
        let ys: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        let mech = fit_median(&[constant, xs.clone()], &ys, 1.0).unwrap();
        assert_eq!(mech.blocks.len(), 1);
        assert_eq!(mech.blocks[0].parent_slot, 1);
        assert_eq!(mech.input_len, 2);
        let pred = mech.predict(&[2.0, 0.5]).unwrap();
        assert!((pred - 1.5).abs() < 1e-3);
    }

    #[test]
    fn too_few_samples_is_an_input_error() {
        let xs = vec![1.0; 5];
        let ys = vec![1.0; 5];
        assert!(fit_median(&[xs], &ys, 1.0).is_err());
    }
}
