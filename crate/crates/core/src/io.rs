//! Tabular data container and the file formats shared by the CLI: data CSV,
//! report CSV, ground-truth CSV and metrics JSON.

use std::path::Path;

use crate::assign::{OutlierClass, Report};
use crate::error::{Error, Result};
use crate::synth::OutlierKind;

/// Row-major numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Input("dataset needs at least one column".into()));
        }
        if values.len() != n_rows * names.len() {
            return Err(Error::Input(format!(
                "value count {} does not match {} rows x {} columns",
                values.len(),
                n_rows,
                names.len()
            )));
        }
        Ok(Self {
            names,
            n_rows,
            values,
        })
    }

    /// Default column names `x0..x{d-1}`.
    pub fn with_default_names(n_cols: usize, n_rows: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(
            (0..n_cols).map(|j| format!("x{j}")).collect(),
            n_rows,
            values,
        )
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let d = self.n_cols();
        self.values[i * d + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.n_cols()).map(|j| self.column(j)).collect()
    }

    pub fn has_finite_values(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Reads a data CSV: header row of column names, numeric body.
pub fn read_data_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let names: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
    let mut values = Vec::new();
    let mut n_rows = 0;
    for record in reader.records() {
        let record = record?;
        if record.len() != names.len() {
            return Err(Error::Parse(format!(
                "row {} has {} cells, expected {}",
                n_rows + 1,
                record.len(),
                names.len()
            )));
        }
        for cell in record.iter() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("non-numeric cell `{cell}`")))?;
            values.push(v);
        }
        n_rows += 1;
    }
    Dataset::new(names, n_rows, values)
}

pub fn write_data_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(data.names())?;
    for i in 0..data.n_rows() {
        let row: Vec<String> = data.row(i).iter().map(|v| fmt_float(*v)).collect();
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal representation that round-trips the f64 exactly
/// (`{}` on f64 prints the shortest string that parses back to the same
/// bits). Negative zero is normalized away.
pub fn fmt_float(v: f64) -> String {
    let repr = format!("{v}");
    if repr == "-0" {
        "0".into()
    } else {
        repr
    }
}

/// Log-likelihood quantities are printed with nine significant digits.
pub fn fmt_nats(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.8e}")
    } else {
        format!("{v}")
    }
}

pub fn write_report_csv(path: &Path, report: &Report) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "sample_index",
        "feature",
        "delta_nats",
        "confidence_nats",
        "class",
    ])?;
    for row in &report.rows {
        writer.write_record([
            row.sample.to_string(),
            row.feature.to_string(),
            fmt_nats(row.delta),
            fmt_nats(row.confidence),
            row.class.as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A parsed report row (for `eval`, which consumes report files).
#[derive(Debug, Clone)]
pub struct ReportFileRow {
    pub sample: usize,
    pub feature: usize,
    pub delta: f64,
    pub confidence: f64,
    pub class: OutlierClass,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportFileRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        if r.len() != 5 {
            return Err(Error::Parse("report rows need 5 columns".into()));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad index `{s}`")))
        };
        let parse_f64 = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        };
        rows.push(ReportFileRow {
            sample: parse_usize(&r[0])?,
            feature: parse_usize(&r[1])?,
            delta: parse_f64(&r[2])?,
            confidence: parse_f64(&r[3])?,
            class: OutlierClass::parse(&r[4])?,
        });
    }
    Ok(rows)
}

/// One ground-truth root cause: a cell plus its outlier kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthRow {
    pub sample: usize,
    pub feature: usize,
    pub kind: OutlierKind,
}

pub fn write_truth_csv(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["sample_index", "feature", "kind"])?;
    for row in rows {
        writer.write_record([
            row.sample.to_string(),
            row.feature.to_string(),
            row.kind.as_str().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        if r.len() != 3 {
            return Err(Error::Parse("truth rows need 3 columns".into()));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad index `{s}`")))
        };
        rows.push(TruthRow {
            sample: parse_usize(&r[0])?,
            feature: parse_usize(&r[1])?,
            kind: OutlierKind::parse(&r[2])?,
        });
    }
    Ok(rows)
}
