//! Posterior dispersion indices for Bayesian model criticism.
//!
//! Given posterior draws of a model, [`pdi`] turns the matrix of pointwise
//! log-likelihoods into per-datapoint dispersion estimates (WAPDI, the PDI
//! ratio, WAIC terms) and a ranked mismatch report. The remaining modules
//! produce such matrices for a handful of built-in models and check the
//! first-order approximation of WAPDI.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod math;
pub mod model;
pub mod models;
pub mod pdi;
pub mod sampler;
pub mod transform;
