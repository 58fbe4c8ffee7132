//! Rank-based identification and evaluation of trial-level surrogate
//! markers among many candidates.
//!
//! The treatment effect on a variable is measured on the probability scale,
//! U = P(X¹ > X⁰) + ½ P(X¹ = X⁰), and a candidate S is a good surrogate for a
//! response Y when δ = U_Y − U_S is small. The crate provides:
//!
//! - [`rankstats`]: U estimators for independent-arm and paired designs, and
//!   the Gaussian functions used by the tests.
//! - [`variance`]: standard errors of δ̂ and null variances of Û.
//! - [`surrogate`]: non-inferiority and two one-sided tests with fixed or
//!   power-driven margins.
//! - [`mtc`]: Bonferroni, Benjamini-Hochberg and Benjamini-Yekutieli.
//! - [`pipeline`]: sample splitting, screening, weighted combination of the
//!   selected candidates and evaluation on held-out data.
//! - [`simgen`]: the simulation designs used to study operating
//!   characteristics.
//! - [`io`]: delimited-text ingestion, configuration files and report tables.

pub mod error;
pub mod io;
pub mod mtc;
pub mod pipeline;
pub mod rankstats;
pub mod simgen;
pub mod surrogate;
pub mod variance;

pub use error::{Error, ErrorKind, Result};
pub use mtc::Correction;
pub use pipeline::{Candidate, Dataset};
pub use rankstats::{Design, PairedSample, TwoArmSample, UEstimate, Variable};
pub use surrogate::{EpsilonMode, SurrogateTestResult, TestConfig, TestMode};
