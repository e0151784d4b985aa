//! Metrics against ground-truth labels.

use crate::correction::{argmax, predict_top1};
use crate::data::io::format_f64;
use crate::data::{LabelVector, PosteriorMatrix, PriorVector};
use crate::error::{Error, Result};
use crate::simplex::{hellinger, kl_divergence};

fn check_rows(posteriors: &PosteriorMatrix, labels: &LabelVector) -> Result<()> {
    if posteriors.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "evaluation",
            expected: posteriors.rows(),
            found: labels.len(),
        });
    }
    if posteriors.cols() != labels.classes() {
        return Err(Error::DimensionMismatch {
            context: "evaluation",
            expected: posteriors.cols(),
            found: labels.classes(),
        });
    }
    Ok(())
}

/// Fraction of rows whose argmax equals the label.
pub fn top1_accuracy(posteriors: &PosteriorMatrix, labels: &LabelVector) -> Result<f64> {
    check_rows(posteriors, labels)?;
    let predicted = predict_top1(posteriors);
    let correct = predicted.labels().iter().zip(labels.labels()).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / labels.len() as f64)
}

/// Column means of the posterior matrix.
pub fn marginalized_prior(posteriors: &PosteriorMatrix) -> Result<PriorVector> {
    if posteriors.cols() < 2 {
        return Err(Error::TooFewClasses(posteriors.cols()));
    }
    let mut sums = vec![0.0; posteriors.cols()];
    for row in posteriors.iter_rows() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(PriorVector::from_weights_unchecked(sums))
}

/// Class frequencies `N_k / N`.
pub fn empirical_prior(labels: &LabelVector) -> Result<PriorVector> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.classes() < 2 {
        return Err(Error::TooFewClasses(labels.classes()));
    }
    let counts = class_counts(labels);
    Ok(PriorVector::from_weights_unchecked(counts.into_iter().map(|c| c as f64).collect()))
}

fn class_counts(labels: &LabelVector) -> Vec<usize> {
    let mut counts = vec![0usize; labels.classes()];
    for &l in labels.labels() {
        counts[l] += 1;
    }
    counts
}

/// Errors of one class over the samples labelled with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassErrors {
    /// Mean of `1 - posterior(i, k)`.
    pub expected: f64,
    /// Fraction of those samples whose argmax is not `k`.
    pub empirical: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerClassErrors {
    pub counts: Vec<usize>,
    /// `None` for classes without any labelled sample.
    pub errors: Vec<Option<ClassErrors>>,
}

pub fn per_class_errors(posteriors: &PosteriorMatrix, labels: &LabelVector) -> Result<PerClassErrors> {
    check_rows(posteriors, labels)?;
    let classes = labels.classes();
    let mut expected = vec![0.0; classes];
    let mut wrong = vec![0usize; classes];
    for (row, &label) in posteriors.iter_rows().zip(labels.labels()) {
        expected[label] += 1.0 - row[label];
        if argmax(row) != label {
            wrong[label] += 1;
        }
    }
    let counts = class_counts(labels);
    let errors = counts
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            (n > 0).then(|| ClassErrors { expected: expected[k] / n as f64, empirical: wrong[k] as f64 / n as f64 })
        })
        .collect();
    Ok(PerClassErrors { counts, errors })
}

/// Everything the `evaluate` command reports.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub marginalized: PriorVector,
    pub empirical: PriorVector,
    pub hellinger: f64,
    /// `KL(empirical || marginalized)`; `None` if not absolutely continuous.
    pub kl: Option<f64>,
    pub per_class: PerClassErrors,
}

pub fn evaluate(posteriors: &PosteriorMatrix, labels: &LabelVector) -> Result<EvaluationReport> {
    let accuracy = top1_accuracy(posteriors, labels)?;
    let marginalized = marginalized_prior(posteriors)?;
    let empirical = empirical_prior(labels)?;
    let hellinger = hellinger(&marginalized, &empirical)?;
    let kl = match kl_divergence(&empirical, &marginalized) {
        Ok(v) => Some(v),
        Err(Error::AbsoluteContinuityViolation { .. }) => None,
        Err(e) => return Err(e),
    };
    let per_class = per_class_errors(posteriors, labels)?;
    Ok(EvaluationReport { accuracy, marginalized, empirical, hellinger, kl, per_class })
}

/// Two CSV tables separated by a blank line: `metric,value` for the overall
/// numbers, then one row per class. Absent classes have empty error fields.
pub fn format_report(report: &EvaluationReport) -> String {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("accuracy,{}\n", format_f64(report.accuracy)));
    out.push_str(&format!("hellinger_marginalized_empirical,{}\n", format_f64(report.hellinger)));
    let kl = report.kl.map(format_f64).unwrap_or_default();
    out.push_str(&format!("kl_empirical_marginalized,{kl}\n"));
    out.push('\n');
    out.push_str("class,count,empirical_prior,marginalized_prior,expected_error,empirical_error\n");
    for k in 0..report.per_class.counts.len() {
        let (expected, empirical) = match report.per_class.errors[k] {
            Some(e) => (format_f64(e.expected), format_f64(e.empirical)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{k},{},{},{},{expected},{empirical}\n",
            report.per_class.counts[k],
            format_f64(report.empirical.values()[k]),
            format_f64(report.marginalized.values()[k]),
        ));
    }
    out
}
