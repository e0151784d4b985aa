//! Re-weighting of classifier posteriors for a new set of class priors.

use crate::data::{LabelVector, PosteriorMatrix, PriorVector, PRIOR_FLOOR};
use crate::error::{Error, Result};

/// Weighted row sums below this are treated as zero.
pub const DEGENERATE_ROW_SUM: f64 = 1e-300;

/// Per-class weights `test_prior(k) / max(train_prior(k), PRIOR_FLOOR)`.
pub fn prior_ratio(train_prior: &PriorVector, test_prior: &PriorVector) -> Result<Vec<f64>> {
    if train_prior.len() != test_prior.len() {
        return Err(Error::DimensionMismatch {
            context: "correction",
            expected: train_prior.len(),
            found: test_prior.len(),
        });
    }
    Ok(train_prior
        .values()
        .iter()
        .zip(test_prior.values())
        .map(|(&train, &test)| test / train.max(PRIOR_FLOOR))
        .collect())
}

/// Adjusts every row to the posterior it would have under `test_prior`:
/// `p(k|x) * w_k / sum_j p(j|x) * w_j` with `w` from [`prior_ratio`].
///
/// When `test_prior == train_prior` the input is returned unchanged.
pub fn adjust_posteriors(
    posteriors: &PosteriorMatrix,
    train_prior: &PriorVector,
    test_prior: &PriorVector,
) -> Result<PosteriorMatrix> {
    let weights = prior_ratio(train_prior, test_prior)?;
    if posteriors.cols() != weights.len() {
        return Err(Error::DimensionMismatch {
            context: "correction",
            expected: weights.len(),
            found: posteriors.cols(),
        });
    }
    if weights.iter().all(|&w| w == 1.0) {
        return Ok(posteriors.clone());
    }
    let mut data = Vec::with_capacity(posteriors.as_flat().len());
    for (row, values) in posteriors.iter_rows().enumerate() {
        adjust_row_into(values, &weights, row, &mut data)?;
    }
    Ok(PosteriorMatrix::from_flat_unchecked(posteriors.rows(), posteriors.cols(), data))
}

pub(crate) fn adjust_row_into(values: &[f64], weights: &[f64], row: usize, out: &mut Vec<f64>) -> Result<()> {
    let start = out.len();
    out.extend(values.iter().zip(weights).map(|(&p, &w)| p * w));
    let sum: f64 = out[start..].iter().sum();
    if !(sum >= DEGENERATE_ROW_SUM) {
        return Err(Error::DegenerateRow { row });
    }
    out[start..].iter_mut().for_each(|v| *v /= sum);
    Ok(())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Row-wise argmax, ties broken towards the lowest class index.
pub fn predict_top1(posteriors: &PosteriorMatrix) -> LabelVector {
    let labels = posteriors.iter_rows().map(argmax).collect();
    LabelVector::new(labels, posteriors.cols()).expect("argmax is always a valid class")
}
