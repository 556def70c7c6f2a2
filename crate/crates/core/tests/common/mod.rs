//! Shared fixtures for the integration suites: small synthetic worlds with
//! controlled single-outlier injection.
//!
//! Each test binary uses its own subset of these helpers.
#![allow(dead_code)]

use causalout::graph::Dag;
use causalout::io::Dataset;
use causalout::rng;
use causalout::scm::FittedScm;
use causalout::stats;
use causalout::synth::{self, NodeMechanismSpec, OutlierKind, SynthSpec};

/// Injection bookkeeping for one planted outlier.
#[derive(Debug, Clone, Copy)]
pub struct Planted {
    pub sample: usize,
    pub feature: usize,
    pub kind: OutlierKind,
}

/// A generated world plus exactly one planted outlier.
pub struct SingleOutlierCase {
    pub dag: Dag,
    pub clean: Dataset,
    pub data: Dataset,
    pub mechanisms: Vec<NodeMechanismSpec>,
    pub planted: Planted,
}

const INJECT_TAG: u64 = 0x7e57;

/// Samples a clean dataset over `dag` and plants exactly one outlier of the
/// requested kind, shifting a seeded cell by `strength` clean standard
/// deviations. `cell` fixes the (sample, feature) if given, otherwise both
/// are drawn from the seed. Mechanistic injections recompute descendants
/// with fresh noise, mirroring the generator's semantics.
pub fn single_outlier_case(
    dag: &Dag,
    spec: &SynthSpec,
    kind: OutlierKind,
    strength: f64,
    cell: Option<(usize, usize)>,
) -> SingleOutlierCase {
    use rand::Rng;
    assert_eq!(dag.node_count(), spec.d);
    let (clean, mechanisms) = synth::sample_clean(dag, spec).expect("clean sample");
    let mut rng = rng::stream(spec.seed, INJECT_TAG, 0, 0);
    let drawn = (rng.gen_range(0..spec.n), rng.gen_range(0..spec.d));
    let (sample, feature) = cell.unwrap_or(drawn);

    let mut data = clean.clone();
    let sd = stats::sample_sd(&clean.column(feature));
    let idx = rng.gen_range(0..spec.n);
    let shifted = clean.get(idx, feature) + strength * sd;
    data.set(sample, feature, shifted);
    if kind == OutlierKind::Mechanistic {
        resimulate_descendants(&mut data, dag, &mechanisms, spec, sample, feature);
    }
    SingleOutlierCase {
        dag: dag.clone(),
        clean,
        data,
        mechanisms,
        planted: Planted {
            sample,
            feature,
            kind,
        },
    }
}

fn resimulate_descendants(
    data: &mut Dataset,
    dag: &Dag,
    mechanisms: &[NodeMechanismSpec],
    spec: &SynthSpec,
    sample: usize,
    feature: usize,
) {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut dirty = vec![false; dag.node_count()];
    dirty[feature] = true;
    let mut row: Vec<f64> = data.row(sample).to_vec();
    for &j in dag.topo_order() {
        if !dirty[j] && dag.parents(j).iter().any(|&p| dirty[p]) {
            let mut noise_rng = rng::stream(spec.seed, INJECT_TAG + 1, sample as u64, j as u64);
            row[j] = mechanisms[j].eval(&row)
                + spec.noise_sd * noise_rng.sample::<f64, _>(StandardNormal);
            dirty[j] = true;
        }
    }
    for (j, &value) in row.iter().enumerate() {
        data.set(sample, j, value);
    }
}

pub fn fit_default(data: &Dataset, dag: &Dag) -> FittedScm {
    FittedScm::fit(data, dag, 0.01, 1.0).expect("fit")
}

/// Clean bivariate chain world (moderate noise scale), fitted and probed at
/// a seeded clean row. The wide conditionals keep the Monte-Carlo
/// coefficient of variation small, so tolerance checks diagnose estimator
/// bias rather than sampling luck.
pub fn chain2_fixture(seed: u64, probe_row: usize) -> (FittedScm, Vec<f64>) {
    let dag = Dag::new(2, [(0, 1)]).expect("chain dag");
    let spec = SynthSpec {
        noise_sd: 0.4,
        ..spec_for(2, 300, seed)
    };
    let (clean, _) = synth::sample_clean(&dag, &spec).expect("clean sample");
    let scm = fit_default(&clean, &dag);
    let row = clean.row(probe_row).to_vec();
    (scm, row)
}

/// Dense trapezoid quadrature for the chain 0 -> 1 with a measurement
/// outlier at node 0: integrates the latent clean value of node 0 out of
/// p(x1 | t) p_clean(t), then multiplies by the measurement prior at x0.
pub fn chain2_quadrature_oracle(scm: &FittedScm, row: &[f64]) -> f64 {
    let kde0 = &scm.nodes[0].kde;
    let kde1 = &scm.nodes[1].kde;
    let center = scm.nodes[0].mechanism.intercept;
    let h0 = kde0.bandwidth();
    let lo = center + kde0.retained().first().unwrap() - 8.0 * h0;
    let hi = center + kde0.retained().last().unwrap() + 8.0 * h0;
    let steps = 40_000;
    let dx = (hi - lo) / steps as f64;
    let mut integral = 0.0;
    for s in 0..=steps {
        let t = lo + s as f64 * dx;
        let w = if s == 0 || s == steps { 0.5 } else { 1.0 };
        let latent_density = kde0.log_density(t - center).unwrap().exp();
        let child_pred = scm.predict_node(1, &[t, 0.0]);
        let child_density = kde1.log_density(row[1] - child_pred).unwrap().exp();
        integral += w * latent_density * child_density * dx;
    }
    integral.ln() + scm.priors.log_density(0, row[0])
}

pub fn chain3() -> Dag {
    Dag::new(3, [(0, 1), (1, 2)]).expect("chain dag")
}

pub fn spec_for(d: usize, n: usize, seed: u64) -> SynthSpec {
    SynthSpec {
        d,
        n,
        seed,
        ..SynthSpec::default()
    }
}
