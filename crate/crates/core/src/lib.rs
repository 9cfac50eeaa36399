//! Active feature selection for the mutual-information criterion.
//!
//! Given an unlabeled, quantized table and a label budget, the algorithms in
//! this crate decide which examples to label so that the `k` features with the
//! smallest conditional entropy `H(Y | X(j))` (equivalently, the largest mutual
//! information with the binary label) can be identified from few labels.
//!
//! Module map:
//!
//! - [`dataset`]: CSV ingestion, quantization, empirical marginals and label oracles.
//! - [`confbounds`]: Hoeffding, empirical Bernstein and Clopper-Pearson intervals,
//!   plus confidence envelopes of the binary-entropy–shaped functions.
//! - [`single_feature`]: static-allocation strategies for estimating one feature's
//!   conditional entropy.
//! - [`afs`]: the full active feature selection loop.
//! - [`baselines`]: RANDOM and CORESET example selection and the shared ranking step.
//! - [`harness`]: replicated benchmarks, student-t intervals and CSV reports.

pub mod afs;
pub mod baselines;
pub mod confbounds;
pub mod dataset;
mod error;
pub mod harness;
pub mod single_feature;
pub mod stats;

pub use error::{Error, Result};
