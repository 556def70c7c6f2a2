//! Causal characterization of anomalies in tabular data.
//!
//! Given a causal DAG over `d` features, this crate fits a contaminated
//! structural causal model (robust spline mechanisms plus trimmed residual
//! densities), searches for the per-sample outlier assignment that maximizes
//! a joint likelihood, and reports per-feature root-cause scores together
//! with a classification of each root cause as a *measurement* outlier (the
//! recorded value is wrong, downstream values are untouched) or a
//! *mechanistic* outlier (the generating process changed, perturbing all
//! descendants).
//!
//! See the `book/` guide for a walk-through of each stage.

pub mod assign;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod likelihood;
pub mod noise;
pub mod regress;
pub mod rng;
pub mod scm;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
