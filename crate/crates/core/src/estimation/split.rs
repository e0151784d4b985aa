//! Held-out check of the likelihood: fit on a random part of the rows and
//! watch the likelihood of the remaining rows along the way.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective;
use super::{run, EstimatorConfig};
use crate::data::{EstimationTrace, ObjectiveKind, PriorVector, RatioMatrix, TraceRecorder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDiagnostic {
    /// Rows the estimator was fitted on, ascending.
    pub optimization_rows: Vec<usize>,
    /// Held-out rows, ascending.
    pub validation_rows: Vec<usize>,
    /// Mean log-likelihood of the optimization rows at each iterate.
    pub optimization: EstimationTrace,
    /// Mean log-likelihood of the validation rows at the same iterates.
    pub validation: EstimationTrace,
    pub estimate: PriorVector,
}

/// Randomly splits the rows (a `split_fraction` share goes to optimization),
/// runs the configured estimator on the optimization part, and records the
/// row-averaged log-likelihood of both parts at every iterate. The partition
/// depends only on the row count, the fraction and `seed`.
pub fn split_likelihood_diagnostic(
    ratios: &RatioMatrix,
    config: &EstimatorConfig,
    split_fraction: f64,
    seed: u64,
) -> Result<SplitDiagnostic> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("split fraction must lie in (0, 1), got {split_fraction}")));
    }
    let n = ratios.rows();
    let optimization_len = (split_fraction * n as f64).round() as usize;
    if optimization_len == 0 || optimization_len >= n {
        return Err(Error::SplitTooSmall {
            optimization: optimization_len.min(n),
            validation: n.saturating_sub(optimization_len),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut optimization_rows = order[..optimization_len].to_vec();
    let mut validation_rows = order[optimization_len..].to_vec();
    optimization_rows.sort_unstable();
    validation_rows.sort_unstable();

    let fit = ratios.select_rows(&optimization_rows);
    let held_out = ratios.select_rows(&validation_rows);
    let classes = ratios.cols();
    let mut fit_trace = TraceRecorder::new(ObjectiveKind::MeanLogLikelihood, classes, config.full_trace);
    let mut held_out_trace = TraceRecorder::new(ObjectiveKind::MeanLogLikelihood, classes, config.full_trace);
    let mean_ll = |part: &RatioMatrix, p: &PriorVector| {
        objective::evaluate(part, p.values(), false).log_likelihood / part.rows() as f64
    };
    let result = run(&fit, config, &mut |iteration, estimate, change| {
        fit_trace.push(iteration, estimate, mean_ll(&fit, estimate), change);
        held_out_trace.push(iteration, estimate, mean_ll(&held_out, estimate), change);
    })?;
    let termination = result.trace.termination();
    Ok(SplitDiagnostic {
        optimization_rows,
        validation_rows,
        optimization: fit_trace.finish(termination, &result.prior),
        validation: held_out_trace.finish(termination, &result.prior),
        estimate: result.prior,
    })
}
