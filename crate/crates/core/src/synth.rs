//! Synthetic benchmark generator: random ER DAGs, additive polynomial
//! mechanisms normalized to [0, 1], Gaussian noise, and ground-truth outlier
//! injection with shifted-marginal draws.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Dag;
use crate::io::Dataset;
use crate::rng::{stream, tag};
use crate::stats;

/// Generator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub d: usize,
    pub n: usize,
    pub edge_prob: f64,
    pub noise_sd: f64,
    pub poly_len: usize,
    /// Outlier shift in clean-column standard deviations.
    pub strength: f64,
    /// Fraction of samples that should carry at least one outlier.
    pub target_contamination: f64,
    /// When set, each shifted draw randomly picks its sign; the default
    /// shifts in the positive direction only.
    pub signed_shifts: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            d: 15,
            n: 2000,
            edge_prob: 0.3,
            noise_sd: 0.1,
            poly_len: 2,
            strength: 3.0,
            target_contamination: 0.10,
            signed_shifts: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 || self.n < 1 {
            return Err(Error::Input("need d >= 1 and n >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.edge_prob) {
            return Err(Error::Input("edge_prob must lie in [0, 1]".into()));
        }
        if self.noise_sd.is_nan() || self.noise_sd <= 0.0 {
            return Err(Error::Input("noise_sd must be positive".into()));
        }
        if self.poly_len < 1 {
            return Err(Error::Input("poly_len must be at least 1".into()));
        }
        if self.strength.is_nan() || self.strength < 0.0 {
            return Err(Error::Input("strength must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.target_contamination) {
            return Err(Error::Input(
                "target_contamination must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Kind of an injected outlier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierKind {
    Mechanistic,
    Measurement,
}

impl OutlierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutlierKind::Mechanistic => "mech",
            OutlierKind::Measurement => "meas",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mech" => Ok(OutlierKind::Mechanistic),
            "meas" => Ok(OutlierKind::Measurement),
            other => Err(Error::Parse(format!("unknown outlier kind `{other}`"))),
        }
    }
}

/// One univariate polynomial term `a * (x - b)^e`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coefficient: f64,
    pub shift: f64,
    pub exponent: u32,
}

/// The generating mechanism of one node: per-parent polynomial term lists and
/// the min/max normalization fixed from the clean evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeMechanismSpec {
    pub parents: Vec<usize>,
    /// `terms[k]` applies to `parents[k]`.
    pub terms: Vec<Vec<PolyTerm>>,
    pub norm_min: f64,
    pub norm_max: f64,
}

impl NodeMechanismSpec {
    /// Raw (unnormalized) polynomial value on a full latent row.
    fn raw(&self, row: &[f64]) -> f64 {
        let mut out = 0.0;
        for (k, &p) in self.parents.iter().enumerate() {
            let x = row[p];
            for term in &self.terms[k] {
                out += term.coefficient * (x - term.shift).powi(term.exponent as i32);
            }
        }
        out
    }

    /// Normalized mechanism value on a full latent row.
    pub fn eval(&self, row: &[f64]) -> f64 {
        if self.parents.is_empty() {
            return 0.0;
        }
        (self.raw(row) - self.norm_min) / (self.norm_max - self.norm_min)
    }
}

/// True indicator matrices of the injected outliers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub mech: Vec<Vec<bool>>,
    pub meas: Vec<Vec<bool>>,
}

impl GroundTruth {
    pub fn n_samples(&self) -> usize {
        self.mech.len()
    }

    pub fn is_anomalous(&self, i: usize) -> bool {
        self.mech[i].iter().chain(self.meas[i].iter()).any(|&b| b)
    }

    /// Features carrying any indicator in sample `i`, ascending.
    pub fn root_features(&self, i: usize) -> Vec<usize> {
        (0..self.mech[i].len())
            .filter(|&j| self.mech[i][j] || self.meas[i][j])
            .collect()
    }

    pub fn anomalous_samples(&self) -> Vec<usize> {
        (0..self.n_samples())
            .filter(|&i| self.is_anomalous(i))
            .collect()
    }
}

/// Everything one synthetic run produces.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dag: Dag,
    /// Clean observed data (equal to the latents under faithful measurement).
    pub clean: Dataset,
    /// Contaminated observed data.
    pub data: Dataset,
    pub truth: GroundTruth,
    pub mechanisms: Vec<NodeMechanismSpec>,
}

/// Per-node, per-kind Bernoulli rate giving the target sample contamination:
/// `1 - (1 - c)^(1 / (2 d))`.
pub fn default_rates(d: usize, target_contamination: f64) -> f64 {
    assert!(d >= 1);
    1.0 - (1.0 - target_contamination).powf(1.0 / (2.0 * d as f64))
}

/// Lower-triangular Erdos-Renyi DAG: each forward edge (i, j), i < j, is
/// included independently with `edge_prob`.
pub fn gen_dag(spec: &SynthSpec) -> Result<Dag> {
    spec.validate()?;
    let mut rng = stream(spec.seed, tag::SYNTH_DAG, 0, 0);
    let mut edges = Vec::new();
    for i in 0..spec.d {
        for j in (i + 1)..spec.d {
            if rng.gen::<f64>() < spec.edge_prob {
                edges.push((i, j));
            }
        }
    }
    Dag::new(spec.d, edges)
}

/// Per-parent polynomial term lists: coefficients uniform on
/// [-1, -0.1] u [0.1, 1], shifts uniform on [-3, 3], exponents in {2, 3}.
fn gen_terms(dag: &Dag, spec: &SynthSpec) -> Vec<Vec<Vec<PolyTerm>>> {
    (0..spec.d)
        .map(|j| {
            dag.parents(j)
                .iter()
                .map(|&p| {
                    let mut rng = stream(spec.seed, tag::SYNTH_MECH, j as u64, p as u64);
                    (0..spec.poly_len)
                        .map(|_| {
                            let magnitude = rng.gen_range(0.1..1.0);
                            let negative = rng.gen::<bool>();
                            let shift = rng.gen_range(-3.0..3.0);
                            let exponent = if rng.gen::<bool>() { 2 } else { 3 };
                            PolyTerm {
                                coefficient: if negative { -magnitude } else { magnitude },
                                shift,
                                exponent,
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn noise(spec: &SynthSpec, i: usize, j: usize) -> f64 {
    let mut rng = stream(spec.seed, tag::SYNTH_NOISE, i as u64, j as u64);
    spec.noise_sd * rng.sample::<f64, _>(StandardNormal)
}

/// Ancestral sampling of the clean process; finalizes the per-node min/max
/// normalization constants from the clean evaluation.
pub fn sample_clean(dag: &Dag, spec: &SynthSpec) -> Result<(Dataset, Vec<NodeMechanismSpec>)> {
    spec.validate()?;
    let terms = gen_terms(dag, spec);
    let d = spec.d;
    let n = spec.n;
    let mut values = vec![0.0; n * d];
    let mut mechanisms: Vec<NodeMechanismSpec> = (0..d)
        .map(|j| NodeMechanismSpec {
            parents: dag.parents(j).to_vec(),
            terms: terms[j].clone(),
            norm_min: 0.0,
            norm_max: 1.0,
        })
        .collect();

    for &j in dag.topo_order() {
        if mechanisms[j].parents.is_empty() {
            for i in 0..n {
                values[i * d + j] = noise(spec, i, j);
            }
            continue;
        }
        let raw: Vec<f64> = (0..n)
            .map(|i| mechanisms[j].raw(&values[i * d..(i + 1) * d]))
            .collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &raw {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi <= lo || !(hi - lo).is_finite() {
            // Degenerate polynomial (numerically constant); keep the raw value.
            lo = 0.0;
            hi = 1.0;
        }
        mechanisms[j].norm_min = lo;
        mechanisms[j].norm_max = hi;
        for i in 0..n {
            values[i * d + j] = (raw[i] - lo) / (hi - lo) + noise(spec, i, j);
        }
    }
    let clean = Dataset::with_default_names(d, n, values)?;
    Ok((clean, mechanisms))
}

fn shifted_draw(
    spec: &SynthSpec,
    clean: &Dataset,
    column_sd: &[f64],
    i: usize,
    j: usize,
    kind: OutlierKind,
) -> f64 {
    let kind_bit = match kind {
        OutlierKind::Mechanistic => 0u64,
        OutlierKind::Measurement => 1u64,
    };
    let mut rng = stream(
        spec.seed,
        tag::SYNTH_SHIFT,
        i as u64,
        (j as u64) << 1 | kind_bit,
    );
    let idx = rng.gen_range(0..clean.n_rows());
    let base = clean.get(idx, j);
    let sign = if spec.signed_shifts {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    } else {
        1.0
    };
    base + sign * spec.strength * column_sd[j]
}

/// Flips independent per-cell indicators at the default rates, replaces
/// measurement cells by shifted-marginal draws (latents untouched), replaces
/// mechanistic cells in the latents and re-simulates all downstream nodes
/// with fresh noise.
pub fn inject_outliers(
    clean: &Dataset,
    dag: &Dag,
    mechanisms: &[NodeMechanismSpec],
    spec: &SynthSpec,
) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let d = spec.d;
    let n = spec.n;
    let rate = default_rates(d, spec.target_contamination);
    let column_sd: Vec<f64> = (0..d).map(|j| stats::sample_sd(&clean.column(j))).collect();

    let mut mech = vec![vec![false; d]; n];
    let mut meas = vec![vec![false; d]; n];
    for (i, (zrow, wrow)) in mech.iter_mut().zip(meas.iter_mut()).enumerate() {
        for j in 0..d {
            let mut rng = stream(spec.seed, tag::SYNTH_FLIP, i as u64, j as u64);
            zrow[j] = rng.gen::<f64>() < rate;
            wrow[j] = rng.gen::<f64>() < rate;
        }
    }

    let mut values = vec![0.0; n * d];
    for i in 0..n {
        let mut latent: Vec<f64> = clean.row(i).to_vec();
        let mut dirty = vec![false; d];
        for &j in dag.topo_order() {
            if mech[i][j] {
                latent[j] = shifted_draw(spec, clean, &column_sd, i, j, OutlierKind::Mechanistic);
                dirty[j] = true;
            } else if dag.parents(j).iter().any(|&p| dirty[p]) {
                let mut rng = stream(spec.seed, tag::SYNTH_RESIM, i as u64, j as u64);
                latent[j] = mechanisms[j].eval(&latent)
                    + spec.noise_sd * rng.sample::<f64, _>(StandardNormal);
                dirty[j] = true;
            }
        }
        let mut observed = latent;
        for (j, cell) in observed.iter_mut().enumerate() {
            if meas[i][j] {
                *cell = shifted_draw(spec, clean, &column_sd, i, j, OutlierKind::Measurement);
            }
        }
        values[i * d..(i + 1) * d].copy_from_slice(&observed);
    }

    let data = Dataset::with_default_names(d, n, values)?;
    Ok((data, GroundTruth { mech, meas }))
}

/// Full pipeline: DAG, clean sample, contamination.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    let dag = gen_dag(spec)?;
    let (clean, mechanisms) = sample_clean(&dag, spec)?;
    let (data, truth) = inject_outliers(&clean, &dag, &mechanisms, spec)?;
    Ok(SynthOutput {
        dag,
        clean,
        data,
        truth,
        mechanisms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, n: usize, seed: u64) -> SynthSpec {
        SynthSpec {
            d,
            n,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn edge_prob_extremes() {
        let empty = gen_dag(&SynthSpec {
            edge_prob: 0.0,
            ..spec(6, 10, 1)
        })
        .unwrap();
        assert!(empty.edges().is_empty());
        let full = gen_dag(&SynthSpec {
            edge_prob: 1.0,
            ..spec(3, 10, 1)
        })
        .unwrap();
        assert_eq!(full.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn edge_count_matches_binomial_mean() {
        let mut total = 0usize;
        let draws = 1000;
        for seed in 0..draws {
            let dag = gen_dag(&spec(15, 10, seed)).unwrap();
            total += dag.edges().len();
        }
        let mean = total as f64 / draws as f64;
        // Binomial(105, 0.3): mean 31.5, sd ~4.7; 3 standard errors of the
        // 1000-draw average is ~0.45.
        assert!(
            (mean - 31.5).abs() < 0.45,
            "mean edge count {mean} too far from 31.5"
        );
    }

    #[test]
    fn polynomial_terms_respect_the_stated_laws() {
        let s = spec(8, 50, 3);
        let dag = gen_dag(&s).unwrap();
        let (_, mechanisms) = sample_clean(&dag, &s).unwrap();
        let mut saw_any = false;
        for (j, m) in mechanisms.iter().enumerate() {
            if m.parents.is_empty() {
                assert!(m.terms.is_empty());
                continue;
            }
            for per_parent in &m.terms {
                assert_eq!(per_parent.len(), 2);
                for t in per_parent {
                    saw_any = true;
                    let a = t.coefficient.abs();
                    assert!((0.1..=1.0).contains(&a), "bad coefficient at node {j}");
                    assert!((-3.0..=3.0).contains(&t.shift));
                    assert!(t.exponent == 2 || t.exponent == 3);
                }
            }
        }
        assert!(saw_any);
    }

    #[test]
    fn normalized_outputs_live_in_unit_interval() {
        let s = spec(10, 300, 4);
        let dag = gen_dag(&s).unwrap();
        let (clean, mechanisms) = sample_clean(&dag, &s).unwrap();
        for mechanism in mechanisms.iter().filter(|m| !m.parents.is_empty()) {
            for i in 0..s.n {
                let f = mechanism.eval(clean.row(i));
                assert!((-1e-9..=1.0 + 1e-9).contains(&f), "f = {f}");
            }
        }
    }

    #[test]
    fn root_only_graph_is_pure_noise() {
        let s = SynthSpec {
            edge_prob: 0.0,
            ..spec(2, 100_000, 5)
        };
        let dag = gen_dag(&s).unwrap();
        let (clean, _) = sample_clean(&dag, &s).unwrap();
        for j in 0..2 {
            let col = clean.column(j);
            let sd = stats::sample_sd(&col);
            assert!((sd - 0.1).abs() < 0.005, "sd {sd}");
            assert!(stats::median(&col).abs() < 0.005);
        }
    }

    #[test]
    fn zero_noise_limit_sits_on_the_polynomial_surface() {
        let s = SynthSpec {
            noise_sd: 1e-12,
            edge_prob: 1.0,
            ..spec(3, 50, 6)
        };
        let dag = gen_dag(&s).unwrap();
        let (clean, mechanisms) = sample_clean(&dag, &s).unwrap();
        for i in 0..s.n {
            let row = clean.row(i);
            for j in 0..3 {
                if mechanisms[j].parents.is_empty() {
                    continue;
                }
                let f = mechanisms[j].eval(row);
                assert!((row[j] - f).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let s = spec(6, 200, 7);
        let a = generate(&s).unwrap();
        let b = generate(&s).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn default_rates_match_closed_form() {
        assert!((default_rates(15, 0.10) - 0.0035066).abs() < 0.5e-4);
        assert_eq!(default_rates(1, 0.0), 0.0);
        assert!((default_rates(5, 0.10) - 0.010480).abs() < 1e-5);
    }

    #[test]
    fn zero_strength_zero_rates_leaves_data_unchanged() {
        let s = SynthSpec {
            strength: 0.0,
            target_contamination: 0.0,
            ..spec(5, 150, 8)
        };
        let out = generate(&s).unwrap();
        assert_eq!(out.data, out.clean);
        assert!(out.truth.anomalous_samples().is_empty());
    }

    #[test]
    fn measurement_outliers_leave_descendants_untouched() {
        let s = SynthSpec {
            target_contamination: 0.4,
            strength: 5.0,
            ..spec(6, 300, 9)
        };
        let out = generate(&s).unwrap();
        let mut checked = 0;
        for i in 0..s.n {
            for j in 0..s.d {
                if out.truth.meas[i][j] && !out.truth.mech[i][j] {
                    // All cells except measurement-outlier cells and cells
                    // downstream of a mechanistic outlier must match clean.
                    for &c in out.dag.children(j) {
                        let downstream_of_mech = out.truth.mech[i]
                            .iter()
                            .enumerate()
                            .any(|(k, &z)| z && (k == c || out.dag.descendants(k).contains(&c)));
                        if !downstream_of_mech && !out.truth.meas[i][c] {
                            assert_eq!(out.data.get(i, c).to_bits(), out.clean.get(i, c).to_bits());
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 0, "test fixture produced no measurement outliers");
    }

    #[test]
    fn mechanistic_outliers_perturb_descendants() {
        let s = SynthSpec {
            target_contamination: 0.4,
            strength: 5.0,
            ..spec(6, 300, 10)
        };
        let out = generate(&s).unwrap();
        let mut checked = 0;
        for i in 0..s.n {
            for j in 0..s.d {
                if out.truth.mech[i][j] && !out.dag.children(j).is_empty() {
                    let changed = out
                        .dag
                        .descendants(j)
                        .iter()
                        .any(|&c| out.data.get(i, c) != out.clean.get(i, c));
                    assert!(changed, "no descendant of ({i}, {j}) changed");
                    checked += 1;
                }
            }
        }
        assert!(checked > 0, "test fixture produced no mechanistic outliers");
    }

    #[test]
    fn shifted_draws_have_shifted_means() {
        let s = SynthSpec {
            strength: 3.0,
            ..spec(4, 4000, 11)
        };
        let dag = gen_dag(&s).unwrap();
        let (clean, _) = sample_clean(&dag, &s).unwrap();
        let sds: Vec<f64> = (0..4).map(|j| stats::sample_sd(&clean.column(j))).collect();
        for j in 0..4 {
            let col = clean.column(j);
            let col_mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
            let m = 4000;
            let mean: f64 = (0..m)
                .map(|i| shifted_draw(&s, &clean, &sds, i, j, OutlierKind::Measurement))
                .sum::<f64>()
                / m as f64;
            assert!(
                mean >= col_mean + (s.strength - 1.0) * sds[j],
                "column {j}: shifted mean {mean} vs base {col_mean}"
            );
        }
    }

    #[test]
    fn contamination_fraction_matches_target() {
        let mut fractions = Vec::new();
        for seed in 0..20 {
            let s = spec(15, 2000, 100 + seed);
            let out = generate(&s).unwrap();
            fractions.push(out.truth.anomalous_samples().len() as f64 / s.n as f64);
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!(
            (mean - 0.10).abs() <= 0.02,
            "mean contaminated fraction {mean}"
        );
    }
}
