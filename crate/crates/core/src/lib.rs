//! Adapting probabilistic classifier outputs to a change of class priors
//! between training and test time.
//!
//! * [`correction`]: re-weight posteriors for known new priors.
//! * [`estimation`]: estimate unknown test priors from unlabeled posteriors by
//!   maximum likelihood (EM or projected gradient ascent) or by maximum a
//!   posteriori under a symmetric Dirichlet.
//! * [`online`]: the same, for a stream, using only already-seen rows.
//! * [`evaluation`]: accuracy, per-class errors and prior distances.
//! * [`synthesis`]: exactly calibrated synthetic data with a known prior shift.
//! * [`cli`]: the `priorshift` command-line tool.

// Checks written as `!(x >= bound)` are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correction;
pub mod data;
pub mod error;
pub mod estimation;
pub mod evaluation;
pub mod online;
pub mod simplex;
pub mod synthesis;

pub use data::{
    compute_ratios, validate_posteriors, validate_prior, EstimationTrace, LabelVector, PosteriorMatrix,
    PriorVector, RatioMatrix,
};
pub use error::{Error, Result};
