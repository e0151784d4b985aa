//! Sequential adaptation: each row is adjusted with priors estimated from
//! the rows before it, never from itself or anything later.

use crate::correction::{adjust_row_into, prior_ratio};
use crate::data::io::{format_f64, write_atomic};
use crate::data::{compute_ratios, PosteriorMatrix, PriorVector};
use crate::error::{Error, Result};
use crate::estimation::{estimate, EstimatorConfig};

pub const DEFAULT_REFIT_EVERY: usize = 10;

/// Share of the training prior blended into each warm start.
pub const WARM_START_MIX: f64 = 0.01;

/// Estimate in force after `rows_seen` rows had been observed.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub rows_seen: usize,
    pub prior: PriorVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineResult {
    /// Row `i` adjusted with the estimate from rows `0..i`.
    pub adjusted: PosteriorMatrix,
    /// The training prior at `rows_seen = 0`, then one entry per refit.
    pub snapshots: Vec<Snapshot>,
}

impl OnlineResult {
    pub fn final_estimate(&self) -> &PriorVector {
        &self.snapshots.last().expect("at least the initial snapshot").prior
    }
}

/// Walks the rows in order. Before emitting row `i` (0-based) with `i > 0` and
/// `i % refit_every == 0`, the estimator is refitted on rows `0..i`, starting
/// from the previous estimate blended with [`WARM_START_MIX`] of the training
/// prior. `config.initial` is ignored: the first estimate is always the
/// training prior.
///
/// The blend matters for EM: early refits on a handful of rows often end on a
/// face of the simplex, and EM can never move a coordinate that underflowed to
/// zero, nor notice (under the step-size stopping rule) one that is merely
/// tiny.
pub fn online_adapt(
    posteriors: &PosteriorMatrix,
    train_prior: &PriorVector,
    config: &EstimatorConfig,
    refit_every: usize,
) -> Result<OnlineResult> {
    if refit_every == 0 {
        return Err(Error::InvalidConfig("refit interval must be positive".into()));
    }
    config.validate()?;
    let ratios = compute_ratios(posteriors, train_prior)?;
    let mut current = train_prior.clone();
    let mut weights = vec![1.0; train_prior.len()];
    let mut snapshots = vec![Snapshot { rows_seen: 0, prior: current.clone() }];
    let mut data = Vec::with_capacity(posteriors.as_flat().len());

    for (i, row) in posteriors.iter_rows().enumerate() {
        if i > 0 && i % refit_every == 0 {
            let start = current
                .values()
                .iter()
                .zip(train_prior.values())
                .map(|(p, t)| (1.0 - WARM_START_MIX) * p + WARM_START_MIX * t)
                .collect();
            let refit_config = EstimatorConfig { full_trace: false, ..config.clone() }
                .initial(PriorVector::from_weights_unchecked(start));
            current = estimate(&ratios.prefix(i), &refit_config)?.prior;
            weights = prior_ratio(train_prior, &current)?;
            snapshots.push(Snapshot { rows_seen: i, prior: current.clone() });
        }
        if weights.iter().all(|&w| w == 1.0) {
            data.extend_from_slice(row);
        } else {
            adjust_row_into(row, &weights, i, &mut data)?;
        }
    }
    Ok(OnlineResult {
        adjusted: PosteriorMatrix::from_flat_unchecked(posteriors.rows(), posteriors.cols(), data),
        snapshots,
    })
}

/// CSV with header `rows_seen,p_0,...` and one line per snapshot.
pub fn format_snapshots(snapshots: &[Snapshot]) -> String {
    let classes = snapshots.first().map_or(0, |s| s.prior.len());
    let mut out = String::from("rows_seen");
    for k in 0..classes {
        out.push_str(&format!(",p_{k}"));
    }
    out.push('\n');
    for s in snapshots {
        out.push_str(&s.rows_seen.to_string());
        for &v in s.prior.values() {
            out.push(',');
            out.push_str(&format_f64(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_snapshots(path: &std::path::Path, snapshots: &[Snapshot]) -> Result<()> {
    write_atomic(path, &format_snapshots(snapshots))
}
