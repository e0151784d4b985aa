//! Domain types shared by every other module, plus their file formats.
//!
//! All types are immutable once constructed. Constructors validate; the
//! crate-internal `from_*_unchecked` paths are used only where the invariant
//! holds by construction (projection output, EM M-step, row renormalization).

pub mod io;

use crate::error::{Error, Result};

/// Absolute tolerance on the sum of a [`PriorVector`].
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance on the row sums of a [`PosteriorMatrix`] read from outside.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Lower clamp applied to training priors whenever one is used as a divisor.
///
/// A class with zero training prior would give an infinite ratio; such classes
/// should be dropped upstream, the clamp only keeps every entry finite.
pub const PRIOR_FLOOR: f64 = 1e-12;

/// A point on the K-class probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorVector(Vec<f64>);

impl PriorVector {
    /// Validates `values` without renormalizing them.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewClasses(values.len()));
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeEntry { index, value });
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::SumNotOne(sum));
        }
        Ok(PriorVector(values))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        Ok(PriorVector(vec![1.0 / classes as f64; classes]))
    }

    /// Point mass on `class`.
    pub fn delta(classes: usize, class: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        if class >= classes {
            return Err(Error::DimensionMismatch {
                context: "data",
                expected: classes,
                found: class + 1,
            });
        }
        let mut values = vec![0.0; classes];
        values[class] = 1.0;
        Ok(PriorVector(values))
    }

    /// Divides nonnegative finite weights by their sum.
    ///
    /// Caller guarantees at least two entries, all `>= 0`, and a positive sum.
    pub(crate) fn from_weights_unchecked(mut weights: Vec<f64>) -> Self {
        debug_assert!(weights.len() >= 2);
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0 && sum.is_finite());
        for w in &mut weights {
            *w /= sum;
        }
        PriorVector(weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs_diff(&self, other: &PriorVector) -> f64 {
        max_abs_diff(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for PriorVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Validates a raw prior; see [`PriorVector::new`].
pub fn validate_prior(values: &[f64]) -> Result<PriorVector> {
    PriorVector::new(values.to_vec())
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// N x K row-major matrix of class posteriors, each row a simplex point.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PosteriorMatrix {
    /// Validates a rectangular grid. Rows whose sum is within
    /// [`ROW_SUM_TOLERANCE`] of 1 (but off by more than rounding) are divided
    /// by that sum.
    pub fn from_rows(grid: &[Vec<f64>]) -> Result<Self> {
        let rows = grid.len();
        if rows == 0 || grid[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = grid[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for (row, values) in grid.iter().enumerate() {
            if values.len() != cols {
                return Err(Error::RaggedRow { row, expected: cols, found: values.len() });
            }
            data.extend_from_slice(values);
        }
        Self::from_flat(rows, cols, data)
    }

    /// Same as [`PosteriorMatrix::from_rows`] for row-major storage.
    pub fn from_flat(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "data",
                expected: rows * cols,
                found: data.len(),
            });
        }
        for (row, chunk) in data.chunks_exact_mut(cols).enumerate() {
            for (col, &value) in chunk.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::NonFinitePosterior { row, col });
                }
                if value < 0.0 {
                    return Err(Error::NegativePosterior { row, col, value });
                }
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::RowSumOutOfTolerance { row, sum });
            }
            // Rows already normalized to rounding error are left untouched so
            // that write/read round trips are bit-exact.
            if (sum - 1.0).abs() > cols as f64 * f64::EPSILON {
                chunk.iter_mut().for_each(|v| *v /= sum);
            }
        }
        Ok(PosteriorMatrix { rows, cols, data })
    }

    /// Caller guarantees every row is already a normalized simplex point.
    pub(crate) fn from_flat_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        PosteriorMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// New matrix holding the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> PosteriorMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PosteriorMatrix { rows: indices.len(), cols: self.cols, data }
    }
}

/// Validates a raw grid; see [`PosteriorMatrix::from_rows`].
pub fn validate_posteriors(grid: &[Vec<f64>]) -> Result<PosteriorMatrix> {
    PosteriorMatrix::from_rows(grid)
}

/// Ratios `a_ik = posterior(i, k) / train_prior(k)` consumed by the
/// estimators. Keeps the training prior it was built from, which is the
/// default starting point of every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    train_prior: PriorVector,
}

impl RatioMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn train_prior(&self) -> &PriorVector {
        &self.train_prior
    }

    pub fn select_rows(&self, indices: &[usize]) -> RatioMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        RatioMatrix {
            rows: indices.len(),
            cols: self.cols,
            data,
            train_prior: self.train_prior.clone(),
        }
    }

    /// The first `n` rows.
    pub fn prefix(&self, n: usize) -> RatioMatrix {
        let n = n.min(self.rows);
        RatioMatrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
            train_prior: self.train_prior.clone(),
        }
    }
}

/// Builds the ratio matrix, clamping each training prior at [`PRIOR_FLOOR`].
pub fn compute_ratios(posteriors: &PosteriorMatrix, train_prior: &PriorVector) -> Result<RatioMatrix> {
    if posteriors.cols() != train_prior.len() {
        return Err(Error::DimensionMismatch {
            context: "data",
            expected: train_prior.len(),
            found: posteriors.cols(),
        });
    }
    let divisors: Vec<f64> = train_prior.values().iter().map(|&p| p.max(PRIOR_FLOOR)).collect();
    let data = posteriors
        .iter_rows()
        .flat_map(|row| row.iter().zip(&divisors).map(|(&p, &d)| p / d))
        .collect();
    Ok(RatioMatrix {
        rows: posteriors.rows(),
        cols: posteriors.cols(),
        data,
        train_prior: train_prior.clone(),
    })
}

/// Ground-truth class indices, 0-based. Used for evaluation only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::LabelOutOfRange { index, label, classes });
        }
        Ok(LabelVector { labels, classes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max-iterations",
        }
    }
}

/// What the objective column of a trace holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    LogLikelihood,
    /// Dirichlet log-density plus log-likelihood, without the normalizer.
    LogPosteriorUnnormalized,
    /// Log-likelihood divided by the number of rows it was evaluated on.
    MeanLogLikelihood,
}

impl ObjectiveKind {
    pub fn column_name(self) -> &'static str {
        match self {
            ObjectiveKind::LogLikelihood => "log_likelihood",
            ObjectiveKind::LogPosteriorUnnormalized => "log_posterior_unnormalized",
            ObjectiveKind::MeanLogLikelihood => "mean_log_likelihood",
        }
    }

    pub fn from_column_name(name: &str) -> Option<Self> {
        match name {
            "log_likelihood" => Some(ObjectiveKind::LogLikelihood),
            "log_posterior_unnormalized" => Some(ObjectiveKind::LogPosteriorUnnormalized),
            "mean_log_likelihood" => Some(ObjectiveKind::MeanLogLikelihood),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Present on every iteration for full traces, otherwise on every 10th
    /// iteration and the last one.
    pub estimate: Option<PriorVector>,
    /// May be `-inf` (zero support, or a Dirichlet term on the boundary).
    pub objective: f64,
    /// Max-abs change from the previous iterate; 0 for iteration 0.
    pub max_change: f64,
}

/// Per-iteration record of an estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    records: Vec<TraceRecord>,
    termination: Termination,
    objective_kind: ObjectiveKind,
    classes: usize,
}

pub(crate) const TRACE_THINNING: usize = 10;

impl EstimationTrace {
    /// Builds a trace after checking that iteration indices start at 0 and
    /// strictly increase.
    pub fn new(
        records: Vec<TraceRecord>,
        termination: Termination,
        objective_kind: ObjectiveKind,
        classes: usize,
    ) -> Result<Self> {
        if records.first().is_some_and(|r| r.iteration != 0)
            || records.windows(2).any(|w| w[1].iteration <= w[0].iteration)
        {
            return Err(Error::InvalidConfig(
                "trace iterations must start at 0 and strictly increase".into(),
            ));
        }
        if let Some(found) = records
            .iter()
            .filter_map(|r| r.estimate.as_ref())
            .map(PriorVector::len)
            .find(|&len| len != classes)
        {
            return Err(Error::DimensionMismatch { context: "data", expected: classes, found });
        }
        Ok(EstimationTrace { records, termination, objective_kind, classes })
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn objective_kind(&self) -> ObjectiveKind {
        self.objective_kind
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of updates performed (index of the last record).
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.objective)
    }

    /// True if no step decreases the objective by more than `tolerance`.
    pub fn is_objective_monotone(&self, tolerance: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective >= w[0].objective - tolerance)
    }
}

/// Accumulates trace records while an estimator runs, applying thinning.
pub(crate) struct TraceRecorder {
    records: Vec<TraceRecord>,
    keep_all: bool,
    kind: ObjectiveKind,
    classes: usize,
}

impl TraceRecorder {
    pub(crate) fn new(kind: ObjectiveKind, classes: usize, keep_all: bool) -> Self {
        TraceRecorder { records: Vec::new(), keep_all, kind, classes }
    }

    pub(crate) fn push(&mut self, iteration: usize, estimate: &PriorVector, objective: f64, max_change: f64) {
        let keep = self.keep_all || iteration.is_multiple_of(TRACE_THINNING);
        self.records.push(TraceRecord {
            iteration,
            estimate: keep.then(|| estimate.clone()),
            objective,
            max_change,
        });
    }

    pub(crate) fn finish(mut self, termination: Termination, last: &PriorVector) -> EstimationTrace {
        if let Some(record) = self.records.last_mut() {
            if record.estimate.is_none() {
                record.estimate = Some(last.clone());
            }
        }
        EstimationTrace {
            records: self.records,
            termination,
            objective_kind: self.kind,
            classes: self.classes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_prior_examples() {
        assert_eq!(validate_prior(&[0.5, 0.5]).unwrap().values(), &[0.5, 0.5]);
        match validate_prior(&[0.7, 0.2]) {
            Err(Error::SumNotOne(s)) => assert!((s - 0.9).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(validate_prior(&[1.0]), Err(Error::TooFewClasses(1))));
        assert!(matches!(
            validate_prior(&[1.2, -0.2]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(validate_prior(&[f64::NAN, 1.0]), Err(Error::NonFiniteEntry { index: 0 })));
    }

    #[test]
    fn validate_prior_does_not_renormalize() {
        let raw = [0.5 + 5e-10, 0.5];
        assert_eq!(validate_prior(&raw).unwrap().values(), &raw);
    }

    #[test]
    fn validate_posteriors_examples() {
        let m = validate_posteriors(&[vec![0.6, 0.4]]).unwrap();
        assert_eq!(m.row(0), &[0.6, 0.4]);

        let m = validate_posteriors(&[vec![0.6000003, 0.4]]).unwrap();
        let sum: f64 = m.row(0).iter().sum();
        assert!((sum - 1.0).abs() <= f64::EPSILON);
        assert!((m.row(0)[0] - 0.6000003 / 1.0000003).abs() < 1e-16);

        match validate_posteriors(&[vec![0.5, 0.4]]) {
            Err(Error::RowSumOutOfTolerance { row: 0, sum }) => assert!((sum - 0.9).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(validate_posteriors(&[]), Err(Error::EmptyMatrix)));
        assert!(matches!(
            validate_posteriors(&[vec![0.5, 0.5], vec![1.0, 0.5, -0.5]]),
            Err(Error::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            validate_posteriors(&[vec![1.5, -0.5]]),
            Err(Error::NegativePosterior { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn compute_ratios_examples() {
        let half = PriorVector::uniform(2).unwrap();
        let r = compute_ratios(&validate_posteriors(&[vec![0.6, 0.4]]).unwrap(), &half).unwrap();
        assert!((r.row(0)[0] - 1.2).abs() < 1e-15 && (r.row(0)[1] - 0.8).abs() < 1e-15);

        let r = compute_ratios(&validate_posteriors(&[vec![0.5, 0.5]]).unwrap(), &half).unwrap();
        assert_eq!(r.row(0), &[1.0, 1.0]);

        let r = compute_ratios(&validate_posteriors(&[vec![1.0, 0.0]]).unwrap(), &half).unwrap();
        assert_eq!(r.row(0), &[2.0, 0.0]);

        let three = PriorVector::uniform(3).unwrap();
        assert!(matches!(
            compute_ratios(&validate_posteriors(&[vec![1.0, 0.0]]).unwrap(), &three),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_train_prior_is_clamped() {
        let prior = PriorVector::new(vec![1.0, 0.0]).unwrap();
        let r = compute_ratios(&validate_posteriors(&[vec![0.5, 0.5]]).unwrap(), &prior).unwrap();
        assert_eq!(r.row(0), &[0.5, 0.5 / PRIOR_FLOOR]);
        assert!(r.as_flat().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn labels_range_checked() {
        assert!(LabelVector::new(vec![0, 1, 2], 3).is_ok());
        assert!(matches!(
            LabelVector::new(vec![0, 3], 3),
            Err(Error::LabelOutOfRange { index: 1, label: 3, classes: 3 })
        ));
    }

    #[test]
    fn trace_indices_must_increase() {
        let p = PriorVector::uniform(2).unwrap();
        let rec = |iteration| TraceRecord { iteration, estimate: Some(p.clone()), objective: 0.0, max_change: 0.0 };
        assert!(EstimationTrace::new(vec![rec(0), rec(1)], Termination::Converged, ObjectiveKind::LogLikelihood, 2).is_ok());
        assert!(EstimationTrace::new(vec![rec(0), rec(0)], Termination::Converged, ObjectiveKind::LogLikelihood, 2).is_err());
        assert!(EstimationTrace::new(vec![rec(1)], Termination::Converged, ObjectiveKind::LogLikelihood, 2).is_err());
    }

    #[test]
    fn recorder_thins_and_keeps_last() {
        let p = PriorVector::uniform(2).unwrap();
        let mut rec = TraceRecorder::new(ObjectiveKind::LogLikelihood, 2, false);
        for i in 0..=23 {
            rec.push(i, &p, -(i as f64), 0.0);
        }
        let trace = rec.finish(Termination::MaxIterations, &p);
        let kept: Vec<usize> = trace
            .records()
            .iter()
            .filter(|r| r.estimate.is_some())
            .map(|r| r.iteration)
            .collect();
        assert_eq!(kept, vec![0, 10, 20, 23]);
        assert_eq!(trace.records().len(), 24);
        assert!(!trace.is_objective_monotone(0.0));
    }

    fn positive_rows(k: usize) -> impl proptest::strategy::Strategy<Value = Vec<Vec<f64>>> {
        use proptest::prelude::*;
        prop::collection::vec(prop::collection::vec(0.01f64..1.0, k), 1..8)
    }

    proptest::proptest! {
        #[test]
        fn ratios_ignore_row_scale(rows in positive_rows(4), scale in 0.1f64..10.0) {
            let train = PriorVector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
            let unit: Vec<Vec<f64>> = rows.iter().map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            }).collect();
            let scaled: Vec<Vec<f64>> = unit.iter().map(|r| r.iter().map(|v| v * scale).collect()).collect();
            // Scaled rows are outside the row-sum tolerance, so go through renormalization.
            let renormalized: Vec<Vec<f64>> = scaled.iter().map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            }).collect();
            let a = compute_ratios(&PosteriorMatrix::from_rows(&unit).unwrap(), &train).unwrap();
            let b = compute_ratios(&PosteriorMatrix::from_rows(&renormalized).unwrap(), &train).unwrap();
            for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
                proptest::prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn uniform_train_prior_scales_by_class_count(rows in positive_rows(5)) {
            let post = PosteriorMatrix::from_rows(&rows.iter().map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(|v| v / s).collect()
            }).collect::<Vec<Vec<f64>>>()).unwrap();
            let ratios = compute_ratios(&post, &PriorVector::uniform(5).unwrap()).unwrap();
            for (a, p) in ratios.as_flat().iter().zip(post.as_flat()) {
                proptest::prop_assert!((a - 5.0 * p).abs() <= 1e-14);
            }
        }
    }
}
