//! Command-line surface: fit a model on data plus a DAG, explain a dataset,
//! generate synthetic benchmarks, evaluate reports against ground truth, and
//! check observational equivalence of intervention patterns.
//!
//! Exit codes: 0 on success, 2 for input problems, 3 for computational
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use causalout::assign::{explain, AssignConfig, OutlierClass};
use causalout::config::RunConfig;
use causalout::eval::{self, MetricSuite};
use causalout::graph::{Dag, InterventionPattern, DESK_SCALE_LIMIT};
use causalout::io;
use causalout::scm::FittedScm;
use causalout::stats;
use causalout::synth::{self, SynthSpec};
use causalout::{Error, Result};

#[derive(Parser)]
#[command(
    name = "causalout",
    version,
    about = "Fit structural causal models on contaminated data, localize per-feature root causes, and classify them as measurement or mechanism failures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by fit/explain; each overrides the config file, which
/// overrides the built-in defaults.
#[derive(Args, Debug, Clone)]
struct ConfigFlags {
    /// JSON config file with RunConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo samples per marginalization.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Residual trim fraction for the noise densities.
    #[arg(long)]
    trim_alpha: Option<f64>,
    /// Spline curvature penalty.
    #[arg(long)]
    lambda: Option<f64>,
    /// Residual log-density percentile feeding the candidate pool.
    #[arg(long)]
    candidate_percentile: Option<f64>,
    /// Worker threads for the explain stage (output-invariant).
    #[arg(long)]
    workers: Option<usize>,
}

impl ConfigFlags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.mc_samples {
            cfg.mc_samples = v;
        }
        if let Some(v) = self.trim_alpha {
            cfg.trim_alpha = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.candidate_percentile {
            cfg.candidate_percentile = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-node mechanisms and residual densities; write the model JSON.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        dag: Option<PathBuf>,
        /// Model JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Run the greedy outlier assignment plus scoring on a dataset.
    Explain {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report CSV (one row per sample and feature).
        #[arg(long)]
        report: Option<PathBuf>,
        /// JSON summary with rates and the objective trace.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Generate a synthetic benchmark with known ground truth.
    Synth {
        /// Output prefix; writes `<prefix>-data.csv`, `<prefix>-dag.txt`
        /// and `<prefix>-truth.csv`.
        #[arg(long)]
        out_prefix: PathBuf,
        #[arg(long, default_value_t = 15)]
        d: usize,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        edge_prob: f64,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        #[arg(long, default_value_t = 2)]
        poly_len: usize,
        #[arg(long, default_value_t = 3.0)]
        strength: f64,
        #[arg(long, default_value_t = 0.10)]
        contamination: f64,
        /// Draw the sign of each shift at random instead of shifting up.
        #[arg(long, default_value_t = false)]
        signed_shifts: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score a report against ground truth, or aggregate prior metric files.
    Eval {
        #[arg(long, required_unless_present = "aggregate")]
        report: Option<PathBuf>,
        #[arg(long, required_unless_present = "aggregate")]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also classify the report's detected roots with the named
        /// baseline (only `marg` is available); requires --data and --dag.
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        dag: Option<PathBuf>,
        /// Significance level of the baseline's outlierness test.
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Metric JSON files to aggregate into mean and 95% CI per metric.
        #[arg(long, num_args = 1.., value_name = "METRICS_JSON")]
        aggregate: Option<Vec<PathBuf>>,
    },
    /// Partition intervention patterns by observational equivalence.
    Equiv {
        #[arg(long)]
        dag: PathBuf,
        /// Pattern file, one `<mech-bits> <meas-bits>` line each.
        #[arg(long)]
        patterns: Option<PathBuf>,
        /// Enumerate all 2^(2d) patterns (d <= 6).
        #[arg(long, default_value_t = false)]
        all: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit {
            data,
            dag,
            out,
            config,
        } => {
            let cfg = config.resolve()?;
            let data = resolve_path("--data", data, &cfg.data)?;
            let dag = resolve_path("--dag", dag, &cfg.dag)?;
            let out = resolve_path("--out", out, &cfg.model)?;
            cmd_fit(&data, &dag, &out, &cfg)
        }
        Command::Explain {
            data,
            model,
            report,
            summary,
            config,
        } => {
            let cfg = config.resolve()?;
            let data = resolve_path("--data", data, &cfg.data)?;
            let model = resolve_path("--model", model, &cfg.model)?;
            let report = resolve_path("--report", report, &cfg.report)?;
            let summary = resolve_path("--summary", summary, &cfg.summary)?;
            cmd_explain(&data, &model, &report, &summary, &cfg)
        }
        Command::Synth {
            out_prefix,
            d,
            n,
            edge_prob,
            noise_sd,
            poly_len,
            strength,
            contamination,
            signed_shifts,
            seed,
        } => {
            let spec = SynthSpec {
                d,
                n,
                edge_prob,
                noise_sd,
                poly_len,
                strength,
                target_contamination: contamination,
                signed_shifts,
                seed,
            };
            cmd_synth(&out_prefix, &spec)
        }
        Command::Eval {
            report,
            truth,
            out,
            baseline,
            data,
            dag,
            alpha,
            seed,
            aggregate,
        } => {
            if let Some(files) = aggregate {
                return cmd_aggregate(&files, out.as_deref());
            }
            let report = report.expect("clap enforces --report");
            let truth = truth.expect("clap enforces --truth");
            cmd_eval(
                &report,
                &truth,
                out.as_deref(),
                baseline.as_deref(),
                data.as_deref(),
                dag.as_deref(),
                alpha,
                seed.unwrap_or(0),
            )
        }
        Command::Equiv { dag, patterns, all } => cmd_equiv(&dag, patterns.as_deref(), all),
    }
}

/// Flag value if given, else the config file's path, else an input error.
fn resolve_path(flag: &str, cli: Option<PathBuf>, file: &Option<PathBuf>) -> Result<PathBuf> {
    cli.or_else(|| file.clone())
        .ok_or_else(|| Error::Input(format!("{flag} is required (flag or config file)")))
}

fn cmd_fit(data_path: &Path, dag_path: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let data = io::read_data_csv(data_path)?;
    let dag = Dag::parse(&std::fs::read_to_string(dag_path)?)?;
    let scm = FittedScm::fit(&data, &dag, cfg.trim_alpha, cfg.lambda)?;
    for (j, node) in scm.nodes.iter().enumerate() {
        let residual_sd = {
            let r: Vec<f64> = (0..data.n_rows())
                .map(|i| scm.residual(j, data.row(i)))
                .collect();
            stats::sample_sd(&r)
        };
        let knots = node
            .mechanism
            .blocks
            .first()
            .map(|b| b.knots.len().to_string())
            .unwrap_or_else(|| "-".into());
        println!(
            "node {j} ({name}): parents={parents} knots={knots} residual_sd={sd}",
            name = scm.feature_names[j],
            parents = node.parents.len(),
            sd = io::fmt_nats(residual_sd),
        );
    }
    std::fs::write(out, scm.to_json())?;
    println!("model written to {}", out.display());
    Ok(())
}

fn cmd_explain(
    data_path: &Path,
    model_path: &Path,
    report_path: &Path,
    summary_path: &Path,
    cfg: &RunConfig,
) -> Result<()> {
    let data = io::read_data_csv(data_path)?;
    let scm = FittedScm::from_json(&std::fs::read_to_string(model_path)?)?;
    let assign_cfg = AssignConfig {
        mc_samples: cfg.mc_samples,
        seed: cfg.seed,
        candidate_percentile: cfg.candidate_percentile,
    };
    let run = || explain(&data, &scm, &assign_cfg);
    let (assignment, report) = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    }?;
    io::write_report_csv(report_path, &report)?;
    std::fs::write(summary_path, report.summary_json(&assignment))?;
    let n_anom = (0..data.n_rows())
        .filter(|&i| assignment.sample_is_anomalous(i))
        .count();
    println!(
        "assigned {} root-cause cells across {} samples; report written to {}",
        assignment.n_cells(),
        n_anom,
        report_path.display()
    );
    Ok(())
}

fn cmd_synth(prefix: &Path, spec: &SynthSpec) -> Result<()> {
    let out = synth::generate(spec)?;
    let with_suffix = |suffix: &str| -> PathBuf {
        let mut name = prefix.file_name().map(|s| s.to_owned()).unwrap_or_default();
        name.push(suffix);
        prefix.with_file_name(name)
    };
    let data_path = with_suffix("-data.csv");
    let dag_path = with_suffix("-dag.txt");
    let truth_path = with_suffix("-truth.csv");
    io::write_data_csv(&data_path, &out.data)?;
    std::fs::write(&dag_path, out.dag.to_text())?;
    let mut rows = Vec::new();
    for i in 0..spec.n {
        for j in 0..spec.d {
            if out.truth.mech[i][j] {
                rows.push(io::TruthRow {
                    sample: i,
                    feature: j,
                    kind: synth::OutlierKind::Mechanistic,
                });
            }
            if out.truth.meas[i][j] {
                rows.push(io::TruthRow {
                    sample: i,
                    feature: j,
                    kind: synth::OutlierKind::Measurement,
                });
            }
        }
    }
    io::write_truth_csv(&truth_path, &rows)?;
    println!(
        "wrote {}, {}, {} ({} anomalous samples)",
        data_path.display(),
        dag_path.display(),
        truth_path.display(),
        out.truth.anomalous_samples().len()
    );
    Ok(())
}

fn truth_from_rows(rows: &[io::TruthRow], n: usize, d: usize) -> synth::GroundTruth {
    let mut mech = vec![vec![false; d]; n];
    let mut meas = vec![vec![false; d]; n];
    for row in rows {
        match row.kind {
            synth::OutlierKind::Mechanistic => mech[row.sample][row.feature] = true,
            synth::OutlierKind::Measurement => meas[row.sample][row.feature] = true,
        }
    }
    synth::GroundTruth { mech, meas }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    report_path: &Path,
    truth_path: &Path,
    out: Option<&Path>,
    baseline: Option<&str>,
    data_path: Option<&Path>,
    dag_path: Option<&Path>,
    alpha: f64,
    seed: u64,
) -> Result<()> {
    let rows = io::read_report_csv(report_path)?;
    if rows.is_empty() {
        return Err(Error::Input("report is empty".into()));
    }
    let truth_rows = io::read_truth_csv(truth_path)?;
    let n = rows.iter().map(|r| r.sample).max().unwrap() + 1;
    let d = rows.iter().map(|r| r.feature).max().unwrap() + 1;
    if truth_rows.iter().any(|r| r.sample >= n || r.feature >= d) {
        return Err(Error::Input(
            "truth refers to samples or features outside the report".into(),
        ));
    }
    let truth = truth_from_rows(&truth_rows, n, d);

    let mut scores = vec![vec![f64::NEG_INFINITY; d]; n];
    let mut detected = Vec::new();
    for r in &rows {
        scores[r.sample][r.feature] = r.delta;
        if r.class != OutlierClass::None {
            detected.push((r.sample, r.feature, r.class));
        }
    }
    let mut metrics = MetricSuite::compute(&scores, &detected, &truth, seed);

    if let Some(name) = baseline {
        if name != "marg" {
            return Err(Error::Input(format!("unknown baseline `{name}`")));
        }
        let (data_path, dag_path) = match (data_path, dag_path) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Input(
                    "--baseline marg requires --data and --dag".into(),
                ))
            }
        };
        let data = io::read_data_csv(data_path)?;
        let dag = Dag::parse(&std::fs::read_to_string(dag_path)?)?;
        let root_cells: Vec<(usize, usize)> = detected.iter().map(|&(i, j, _)| (i, j)).collect();
        let classes = eval::marg_classify(&data, &dag, &root_cells, alpha)?;
        let marg_detected: Vec<(usize, usize, OutlierClass)> = root_cells
            .iter()
            .zip(&classes)
            .map(|(&(i, j), &c)| (i, j, c))
            .collect();
        metrics.marg_classification_accuracy =
            eval::classification_accuracy(&marg_detected, &truth);
    }

    let json = metrics.to_json();
    match out {
        Some(path) => std::fs::write(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_aggregate(files: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let mut runs = Vec::new();
    for file in files {
        let text = std::fs::read_to_string(file)?;
        let suite: MetricSuite = serde_json::from_str(&text)?;
        runs.push(suite);
    }
    if runs.is_empty() {
        return Err(Error::Input("nothing to aggregate".into()));
    }
    let json = serde_json::to_string_pretty(&eval::aggregate_runs(&runs))?;
    match out {
        Some(path) => std::fs::write(path, &json)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_equiv(dag_path: &Path, patterns: Option<&Path>, all: bool) -> Result<()> {
    let dag = Dag::parse(&std::fs::read_to_string(dag_path)?)?;
    let d = dag.node_count();
    if d > DESK_SCALE_LIMIT {
        return Err(Error::DeskScale(format!(
            "equivalence checking enumerates conditioning sets; d = {d} exceeds {DESK_SCALE_LIMIT}"
        )));
    }
    let patterns: Vec<InterventionPattern> = match (patterns, all) {
        (Some(path), _) => std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(InterventionPattern::parse)
            .collect::<Result<_>>()?,
        (None, true) => {
            if d > 6 {
                return Err(Error::Input(
                    "--all enumerates 4^d patterns; use --patterns for d > 6".into(),
                ));
            }
            let mut out = Vec::new();
            for bits in 0u64..(1 << (2 * d)) {
                let mech = (0..d).map(|j| bits >> j & 1 == 1).collect();
                let meas = (0..d).map(|j| bits >> (d + j) & 1 == 1).collect();
                out.push(InterventionPattern::new(mech, meas)?);
            }
            out
        }
        (None, false) => {
            return Err(Error::Input(
                "provide --patterns FILE or --all to choose the patterns".into(),
            ))
        }
    };
    for p in &patterns {
        if p.len() != d {
            return Err(Error::Input(format!(
                "pattern `{}` does not match the {d}-node DAG",
                p.render()
            )));
        }
    }
    let classes = dag.equivalence_classes(&patterns)?;
    let rendered: Vec<Vec<String>> = classes
        .iter()
        .map(|class| class.iter().map(|&i| patterns[i].render()).collect())
        .collect();
    let payload = serde_json::json!({
        "nodes": d,
        "n_patterns": patterns.len(),
        "classes": rendered,
    });
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}
