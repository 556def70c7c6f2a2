//! Joint likelihood of a sample under an arbitrary outlier assignment:
//! uniform outlier priors, Monte-Carlo marginalization over latent clean
//! values for measurement outliers, Bernoulli rate terms, and the binomial
//! code-length increment used by the greedy search.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InterventionPattern;
use crate::rng::completion_stream;
use crate::scm::FittedScm;
use crate::stats::log_mean_exp;

/// Per-node uniform outlier densities over the observed feature ranges,
/// shared by the mechanistic and measurement priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierPriors {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl OutlierPriors {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Input("prior bound lengths differ".into()));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if h.is_nan() || l.is_nan() || h <= l {
                return Err(Error::Input(format!("prior support [{l}, {h}] is empty")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Per-column `[min, max]`, widened by `1e-9 * range` on each side.
    pub fn from_data(columns: &[Vec<f64>]) -> Result<Self> {
        let mut lo = Vec::with_capacity(columns.len());
        let mut hi = Vec::with_capacity(columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() < 2 {
                return Err(Error::Input("need at least 2 samples for priors".into()));
            }
            let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in col {
                if !v.is_finite() {
                    return Err(Error::Input("non-finite value in prior data".into()));
                }
                mn = mn.min(v);
                mx = mx.max(v);
            }
            let range = mx - mn;
            if range == 0.0 {
                return Err(Error::Degenerate(format!(
                    "column {j} is constant; uniform prior is degenerate"
                )));
            }
            lo.push(mn - 1e-9 * range);
            hi.push(mx + 1e-9 * range);
        }
        Ok(Self { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn support(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Log-density of the uniform prior at `x`. A value outside the stored
    /// support does not return negative infinity: the support is extended to
    /// cover the queried value for that evaluation, with a warning.
    pub fn log_density(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        if x < lo || x > hi {
            log::warn!("value {x} outside prior support [{lo}, {hi}] of node {j}; extending");
            return -(hi.max(x) - lo.min(x)).ln();
        }
        -(hi - lo).ln()
    }

    pub fn sample<R: Rng>(&self, j: usize, rng: &mut R) -> f64 {
        rng.gen_range(self.lo[j]..self.hi[j])
    }
}

/// Global outlier rates, one Bernoulli parameter per node and kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub mech: Vec<f64>,
    pub meas: Vec<f64>,
}

impl Rates {
    pub fn new(mech: Vec<f64>, meas: Vec<f64>) -> Result<Self> {
        if mech.len() != meas.len() {
            return Err(Error::Input("rate vector lengths differ".into()));
        }
        if mech.iter().chain(&meas).any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Input("rates must lie in [0, 1]".into()));
        }
        Ok(Self { mech, meas })
    }

    pub fn zero(d: usize) -> Self {
        Self {
            mech: vec![0.0; d],
            meas: vec![0.0; d],
        }
    }
}

/// `log Bern(u; rate)`, with a `-inf` sentinel for impossible events.
pub fn bernoulli_log(indicator: bool, rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Input(format!("rate {rate} outside [0, 1]")));
    }
    Ok(bernoulli_log_raw(indicator, rate))
}

#[inline]
pub(crate) fn bernoulli_log_raw(indicator: bool, rate: f64) -> f64 {
    let p = if indicator { rate } else { 1.0 - rate };
    if p == 0.0 {
        f64::NEG_INFINITY
    } else {
        p.ln()
    }
}

/// Code-length increase for admitting one more outlier at a node:
/// `log C(n, k+1) - log C(n, k) = log((n - k) / (k + 1))`.
pub fn binom_increment(n: usize, k: usize) -> Result<f64> {
    if k >= n {
        return Err(Error::Input(format!(
            "cannot admit outlier {} of {n}",
            k + 1
        )));
    }
    Ok(((n - k) as f64 / (k + 1) as f64).ln())
}

/// Monte-Carlo evaluator for `log p(x | pattern)` under a fitted model.
///
/// Latent completions draw from per-`(sample, node, replicate)` streams, so
/// likelihoods are reproducible regardless of evaluation order, and two
/// patterns evaluated for the same sample share their randomness (common
/// random numbers).
#[derive(Debug, Clone, Copy)]
pub struct MarginalEvaluator<'a> {
    pub scm: &'a FittedScm,
    pub priors: &'a OutlierPriors,
    pub mc_samples: usize,
    pub seed: u64,
}

impl<'a> MarginalEvaluator<'a> {
    pub fn new(
        scm: &'a FittedScm,
        priors: &'a OutlierPriors,
        mc_samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            scm,
            priors,
            mc_samples,
            seed,
        }
    }

    /// `log p(x)` for the given pattern. `clean_ll[k]` must hold the clean
    /// residual log-density of node `k` for this row.
    ///
    /// Accumulation order is fixed: clean terms in node order, then one
    /// prior term per intervened node in node order (mechanistic and
    /// measurement priors share their density, and a doubly-marked node is
    /// scored once, by the measurement prior), then the Monte-Carlo term.
    /// Patterns that differ only in the kind of a sink intervention
    /// therefore produce bit-equal values.
    pub fn log_marginal(
        &self,
        sample_index: usize,
        row: &[f64],
        clean_ll: &[f64],
        pattern: &InterventionPattern,
    ) -> f64 {
        let d = self.scm.dag.node_count();
        debug_assert_eq!(pattern.len(), d);
        let z = &pattern.mech;
        let w = &pattern.meas;

        // Nodes whose clean term varies across completions: not intervened
        // themselves, but with at least one measurement-outlier parent.
        let mut varying = vec![false; d];
        for k in 0..d {
            if !z[k] && !w[k] {
                varying[k] = self.scm.dag.parents(k).iter().any(|&p| w[p]);
            }
        }

        let mut clean_const = 0.0;
        let mut prior_sum = 0.0;
        for k in 0..d {
            if z[k] || w[k] {
                prior_sum += self.priors.log_density(k, row[k]);
            } else if !varying[k] {
                clean_const += clean_ll[k];
            }
        }

        let mc_term = self.mc_term(sample_index, row, z, w, &varying);
        clean_const + prior_sum + mc_term
    }

    fn mc_term(
        &self,
        sample_index: usize,
        row: &[f64],
        z: &[bool],
        w: &[bool],
        varying: &[bool],
    ) -> f64 {
        let d = row.len();
        if !varying.iter().any(|&v| v) {
            return 0.0;
        }

        // Only measurement nodes whose completed value feeds a scored term
        // need to be drawn; found by walking the topological order backwards.
        let mut needed = vec![false; d];
        for &j in self.scm.dag.topo_order().iter().rev() {
            if !w[j] {
                continue;
            }
            needed[j] = self
                .scm
                .dag
                .children(j)
                .iter()
                .any(|&c| varying[c] || (w[c] && !z[c] && needed[c]));
        }
        let draw_order: Vec<usize> = self
            .scm
            .dag
            .topo_order()
            .iter()
            .copied()
            .filter(|&j| needed[j])
            .collect();
        let scored: Vec<usize> = (0..d).filter(|&k| varying[k]).collect();

        let mut values = Vec::with_capacity(self.mc_samples);
        let mut completed = row.to_vec();
        for m in 0..self.mc_samples {
            completed.copy_from_slice(row);
            for &j in &draw_order {
                let mut stream = completion_stream(self.seed, sample_index, j, m);
                completed[j] = if z[j] {
                    self.priors.sample(j, &mut stream)
                } else {
                    let pred = self.scm.predict_node(j, &completed);
                    pred + self.scm.nodes[j].kde.sample(&mut stream)
                };
            }
            let mut total = 0.0;
            for &k in &scored {
                let residual = row[k] - self.scm.predict_node(k, &completed);
                total += self.scm.nodes[k].kde.log_density_raw(residual);
            }
            values.push(total);
        }
        log_mean_exp(&mut values)
    }

    /// Joint log-likelihood: `log p(x)` plus the Bernoulli indicator terms.
    pub fn log_joint(
        &self,
        sample_index: usize,
        row: &[f64],
        clean_ll: &[f64],
        pattern: &InterventionPattern,
        rates: &Rates,
    ) -> f64 {
        let marginal = self.log_marginal(sample_index, row, clean_ll, pattern);
        let mut bern = 0.0;
        for j in 0..pattern.len() {
            bern += bernoulli_log_raw(pattern.mech[j], rates.mech[j])
                + bernoulli_log_raw(pattern.meas[j], rates.meas[j]);
        }
        marginal + bern
    }
}

/// One-shot form of [`MarginalEvaluator::log_joint`] that computes the clean
/// residual densities itself.
#[allow(clippy::too_many_arguments)]
pub fn log_joint(
    scm: &FittedScm,
    sample_index: usize,
    row: &[f64],
    pattern: &InterventionPattern,
    priors: &OutlierPriors,
    rates: &Rates,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if row.len() != scm.dag.node_count() {
        return Err(Error::Input(format!(
            "row length {} does not match node count {}",
            row.len(),
            scm.dag.node_count()
        )));
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite sample value".into()));
    }
    if pattern.len() != scm.dag.node_count() {
        return Err(Error::Input("pattern length mismatch".into()));
    }
    if mc_samples == 0 {
        return Err(Error::Input("need at least one Monte-Carlo sample".into()));
    }
    let clean_ll = scm.clean_log_densities(row)?;
    let eval = MarginalEvaluator::new(scm, priors, mc_samples, seed);
    Ok(eval.log_joint(sample_index, row, &clean_ll, pattern, rates))
}
