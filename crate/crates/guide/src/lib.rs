//! Compiled form of the book under `book/`: every fenced Rust block in the
//! chapters runs as a doctest of this crate, so `cargo test --workspace`
//! fails whenever the guide drifts from the library.
//!
//! mdBook itself cannot execute snippets against external crates; including
//! the chapters as rustdoc pages gives `rustdoc --test` semantics with this
//! crate's dependencies in scope. One module per chapter keeps failures
//! attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/causal-graphs.md")]
pub mod causal_graphs {}

#[doc = include_str!("../../../book/src/fitting-mechanisms.md")]
pub mod fitting_mechanisms {}

#[doc = include_str!("../../../book/src/residual-densities.md")]
pub mod residual_densities {}

#[doc = include_str!("../../../book/src/likelihood.md")]
pub mod likelihood {}

#[doc = include_str!("../../../book/src/assignment.md")]
pub mod assignment {}

#[doc = include_str!("../../../book/src/synthetic-benchmarks.md")]
pub mod synthetic_benchmarks {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
