//! Run configuration shared by the CLI subcommands. Precedence is
//! flags > config file > defaults; the file is JSON with the same field
//! names, so a config file doubles as a reproducible experiment manifest
//! (numeric knobs plus the file paths of a run).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Monte-Carlo samples per marginalization.
    pub mc_samples: usize,
    /// Fraction of residuals trimmed before density estimation.
    pub trim_alpha: f64,
    /// Spline curvature penalty.
    pub lambda: f64,
    /// Residual log-density percentile feeding the candidate pool.
    pub candidate_percentile: f64,
    /// Worker threads for the explain stage; `None` uses the available
    /// parallelism. Outputs do not depend on this value.
    pub workers: Option<usize>,
    /// Default file locations, used when the corresponding flag is absent.
    pub data: Option<PathBuf>,
    pub dag: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mc_samples: 100,
            trim_alpha: 0.01,
            lambda: 1.0,
            candidate_percentile: 10.0,
            workers: None,
            data: None,
            dag: None,
            model: None,
            report: None,
            summary: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 {
            return Err(Error::Input("mc_samples must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.trim_alpha) {
            return Err(Error::Input("trim_alpha must lie in [0, 0.5)".into()));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::Input("lambda must be nonnegative".into()));
        }
        if !(0.0..=100.0).contains(&self.candidate_percentile) {
            return Err(Error::Input(
                "candidate_percentile must lie in [0, 100]".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::Input("workers must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.mc_samples, 100);
        assert_eq!(c.trim_alpha, 0.01);
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.candidate_percentile, 10.0);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let bad_trim = RunConfig {
            trim_alpha: 0.5,
            ..RunConfig::default()
        };
        assert!(bad_trim.validate().is_err());
        let bad_mc = RunConfig {
            mc_samples: 0,
            ..RunConfig::default()
        };
        assert!(bad_mc.validate().is_err());
    }
}
