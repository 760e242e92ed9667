//! Estimators of the asymptotic covariance matrix of Markov chain Monte Carlo
//! output.
//!
//! Given `n` draws `Y_1, ..., Y_n` of a `p`-dimensional functional of a Markov
//! chain, the central limit theorem `sqrt(n) (Ybar_n - theta) -> N_p(0, Sigma)`
//! involves the long-run covariance
//!
//! ```text
//! Sigma = Var(Y_1) + sum_{k >= 1} [ Cov(Y_1, Y_{1+k}) + Cov(Y_1, Y_{1+k})^T ].
//! ```
//!
//! This crate estimates `Sigma` with batch means, overlapping batch means,
//! spectral variance (lag-window) estimators and weighted batch means. The
//! weighted batch means family reuses the lag windows of spectral variance
//! estimators but is built from non-overlapping batches, so windows whose
//! second difference is sparse (Bartlett, Bartlett flat top) collapse to one or
//! two ordinary batch means computations.
//!
//! Modules:
//!
//! - [`windows`]: lag windows, finite differences and consistency-condition checks.
//! - [`estimators`]: the estimators themselves plus batch-size schedules.
//! - [`streaming`]: an `O(a)`-memory online estimator with a doubling batch size.
//! - [`chains`]: AR(1) and VAR(1) reference chains with known `Sigma`.
//! - [`diagnostics`]: effective sample size, confidence regions, stopping rules.
//! - [`experiment`]: paired replication runs used by the benchmark harness.
//! - [`chainio`]: CSV and packed binary chain files.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chainio;
pub mod chains;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod experiment;
mod linalg;
pub mod streaming;
pub mod windows;

pub use chains::{Ar1Model, Var1Model};
pub use diagnostics::{RegionSpec, StoppingConfig};
pub use error::{Error, Result};
pub use estimators::{BatchSchedule, ChainMatrix, CovEstimate, Estimator, Method};
pub use streaming::StreamState;
pub use windows::{ConditionReport, LagWindow};
