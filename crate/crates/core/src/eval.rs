//! Evaluation metrics (dynamic top-k recall, per-sample AP/AUC averaging,
//! classification accuracy) and the marginal-outlierness classification
//! baseline.

use serde::{Deserialize, Serialize};

use crate::assign::OutlierClass;
use crate::error::Result;
use crate::graph::Dag;
use crate::io::Dataset;
use crate::noise::TrimmedKde;
use crate::synth::GroundTruth;

/// Feature ranking for one sample: indices sorted by score descending, ties
/// by ascending feature index.
fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Mean over anomalous samples of |top-k ∩ true roots| / k, with k set per
/// sample to the number of true root features. Samples with no true roots
/// are skipped.
pub fn top_k_recall(scores: &[Vec<f64>], truth: &GroundTruth) -> f64 {
    recall_impl(scores, truth, None)
}

/// Recall at a fixed k: |top-k ∩ true roots| / |true roots|.
pub fn fixed_k_recall(scores: &[Vec<f64>], truth: &GroundTruth, k: usize) -> f64 {
    recall_impl(scores, truth, Some(k))
}

fn recall_impl(scores: &[Vec<f64>], truth: &GroundTruth, fixed_k: Option<usize>) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for i in truth.anomalous_samples() {
        let roots = truth.root_features(i);
        if roots.is_empty() {
            continue;
        }
        let k = fixed_k.unwrap_or(roots.len());
        let ranked = ranking(&scores[i]);
        let hits = ranked.iter().take(k).filter(|j| roots.contains(j)).count();
        total += hits as f64 / roots.len() as f64;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Average precision and ROC-AUC of the per-feature scores against the
/// binary root-cause labels, computed per anomalous sample and averaged.
/// Samples where every feature (or no feature) is a root are skipped for
/// AUC.
pub fn per_sample_ap_auc(scores: &[Vec<f64>], truth: &GroundTruth) -> (f64, f64) {
    let mut ap_sum = 0.0;
    let mut ap_count = 0usize;
    let mut auc_sum = 0.0;
    let mut auc_count = 0usize;
    for i in truth.anomalous_samples() {
        let roots = truth.root_features(i);
        let d = scores[i].len();
        if roots.is_empty() {
            continue;
        }
        let ranked = ranking(&scores[i]);
        let mut hits = 0usize;
        let mut precision_sum = 0.0;
        for (rank, &j) in ranked.iter().enumerate() {
            if roots.contains(&j) {
                hits += 1;
                precision_sum += hits as f64 / (rank + 1) as f64;
            }
        }
        ap_sum += precision_sum / roots.len() as f64;
        ap_count += 1;

        if roots.len() < d {
            let mut pairs = 0.0;
            let mut wins = 0.0;
            for &pos in &roots {
                for neg in 0..d {
                    if roots.contains(&neg) {
                        continue;
                    }
                    pairs += 1.0;
                    if scores[i][pos] > scores[i][neg] {
                        wins += 1.0;
                    } else if scores[i][pos] == scores[i][neg] {
                        wins += 0.5;
                    }
                }
            }
            auc_sum += wins / pairs;
            auc_count += 1;
        }
    }
    (
        if ap_count == 0 {
            0.0
        } else {
            ap_sum / ap_count as f64
        },
        if auc_count == 0 {
            0.0
        } else {
            auc_sum / auc_count as f64
        },
    )
}

/// A detected root cause with its reported class.
pub type DetectedRoot = (usize, usize, OutlierClass);

fn matches_truth(truth: &GroundTruth, i: usize, j: usize, class: OutlierClass) -> bool {
    match class {
        OutlierClass::Mechanistic => truth.mech[i][j],
        OutlierClass::Measurement => truth.meas[i][j],
        OutlierClass::None => false,
    }
}

/// Among detected cells that are true roots, the fraction whose class
/// matches the injected kind. `None` when nothing detected is a true root.
pub fn classification_accuracy(detected: &[DetectedRoot], truth: &GroundTruth) -> Option<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for &(i, j, class) in detected {
        if class == OutlierClass::None {
            continue;
        }
        if truth.mech[i][j] || truth.meas[i][j] {
            total += 1;
            if matches_truth(truth, i, j, class) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        None
    } else {
        Some(correct as f64 / total as f64)
    }
}

/// Binary F1 over detected true roots, treating the mechanistic class as the
/// positive label.
pub fn f1_mechanistic(detected: &[DetectedRoot], truth: &GroundTruth) -> Option<f64> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut any = false;
    for &(i, j, class) in detected {
        if class == OutlierClass::None || !(truth.mech[i][j] || truth.meas[i][j]) {
            continue;
        }
        any = true;
        let truly_mech = truth.mech[i][j];
        match (class == OutlierClass::Mechanistic, truly_mech) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if !any || (tp + fp == 0 && tp + fn_ == 0) {
        return None;
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return None;
    }
    Some(2.0 * tp as f64 / denom as f64)
}

/// Marginal-outlierness classification baseline: a detected root is labeled
/// mechanistic iff some child value is marginally significant at the
/// multiplicity-corrected level, measurement otherwise (sinks always
/// measurement).
///
/// Outlierness of a child value is its one-sided empirical p-value of
/// density lowness under an untrimmed per-column Gaussian KDE; the
/// correction across children is `1 - (1 - alpha)^(1/m)`, which equals
/// `alpha` for one child and `alpha / m` to first order.
pub fn marg_classify(
    data: &Dataset,
    dag: &Dag,
    roots: &[(usize, usize)],
    alpha: f64,
) -> Result<Vec<OutlierClass>> {
    let n = data.n_rows();
    // Columns that appear as children of any queried root.
    let mut wanted = vec![false; data.n_cols()];
    for &(_, j) in roots {
        for &c in dag.children(j) {
            wanted[c] = true;
        }
    }
    // Per wanted column: each row's density and the sorted density list.
    let mut densities: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; data.n_cols()];
    for (c, slot) in densities.iter_mut().enumerate() {
        if !wanted[c] {
            continue;
        }
        let col = data.column(c);
        let kde = TrimmedKde::fit(&col, 0.0)?;
        let dens: Vec<f64> = col.iter().map(|&v| kde.log_density_raw(v)).collect();
        let mut sorted = dens.clone();
        sorted.sort_by(f64::total_cmp);
        *slot = Some((dens, sorted));
    }

    let classes = roots
        .iter()
        .map(|&(i, j)| {
            let children = dag.children(j);
            if children.is_empty() {
                return OutlierClass::Measurement;
            }
            let m = children.len() as f64;
            let threshold = 1.0 - (1.0 - alpha).powf(1.0 / m);
            let significant = children.iter().any(|&c| {
                let (dens, sorted) = densities[c].as_ref().expect("density cached");
                let count_le = sorted.partition_point(|&v| v <= dens[i]);
                let p = count_le as f64 / n as f64;
                p <= threshold
            });
            if significant {
                OutlierClass::Mechanistic
            } else {
                OutlierClass::Measurement
            }
        })
        .collect();
    Ok(classes)
}

/// One run's metric values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSuite {
    pub top_k_recall: f64,
    pub top_3: f64,
    pub top_5: f64,
    pub average_precision: f64,
    pub auc: f64,
    pub classification_accuracy: Option<f64>,
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marg_classification_accuracy: Option<f64>,
    pub n_anomalous: usize,
    pub seed: u64,
}

impl MetricSuite {
    pub fn compute(
        scores: &[Vec<f64>],
        detected: &[DetectedRoot],
        truth: &GroundTruth,
        seed: u64,
    ) -> Self {
        let (ap, auc) = per_sample_ap_auc(scores, truth);
        Self {
            top_k_recall: top_k_recall(scores, truth),
            top_3: fixed_k_recall(scores, truth, 3),
            top_5: fixed_k_recall(scores, truth, 5),
            average_precision: ap,
            auc,
            classification_accuracy: classification_accuracy(detected, truth),
            f1: f1_mechanistic(detected, truth),
            marg_classification_accuracy: None,
            n_anomalous: truth.anomalous_samples().len(),
            seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric serialization cannot fail")
    }
}

/// Mean and normal-approximation 95% confidence half-width.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub ci95: f64,
    pub n_runs: usize,
}

fn aggregate_values(values: &[f64]) -> Aggregate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = crate::stats::sample_sd(values);
    Aggregate {
        mean,
        ci95: if n > 1 {
            1.96 * sd / (n as f64).sqrt()
        } else {
            0.0
        },
        n_runs: n,
    }
}

/// Aggregates metric suites across seeds (mean plus 95% CI per metric).
pub fn aggregate_runs(runs: &[MetricSuite]) -> serde_json::Value {
    let mut out = serde_json::Map::new();
    let collect = |get: &dyn Fn(&MetricSuite) -> Option<f64>| -> Vec<f64> {
        runs.iter().filter_map(get).collect()
    };
    let mut put = |name: &str, values: Vec<f64>| {
        if !values.is_empty() {
            out.insert(
                name.to_string(),
                serde_json::to_value(aggregate_values(&values)).unwrap(),
            );
        }
    };
    put("top_k_recall", collect(&|m| Some(m.top_k_recall)));
    put("top_3", collect(&|m| Some(m.top_3)));
    put("top_5", collect(&|m| Some(m.top_5)));
    put("average_precision", collect(&|m| Some(m.average_precision)));
    put("auc", collect(&|m| Some(m.auc)));
    put(
        "classification_accuracy",
        collect(&|m| m.classification_accuracy),
    );
    put("f1", collect(&|m| m.f1));
    put(
        "marg_classification_accuracy",
        collect(&|m| m.marg_classification_accuracy),
    );
    serde_json::Value::Object(out)
}
