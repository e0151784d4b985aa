//! Log-likelihood of a prior estimate, its Dirichlet-regularized variant, and
//! their gradients with respect to the estimate.

use crate::data::{PriorVector, RatioMatrix};
use crate::error::{Error, Result};

/// Clamp applied to `P_k` in the Dirichlet gradient term `(alpha - 1) / P_k`.
pub const DIRICHLET_GRADIENT_FLOOR: f64 = 1e-12;

/// Per-row mixture values `s_i = sum_k P_k a_ik`, their log-sum, and the
/// likelihood gradient `sum_i a_ik / s_i`, from a single pass over the rows.
pub(crate) struct Pass {
    /// First row with `s_i <= 0`, if any.
    pub zero_support_row: Option<usize>,
    pub log_likelihood: f64,
    pub gradient: Vec<f64>,
}

pub(crate) fn evaluate(ratios: &RatioMatrix, estimate: &[f64], with_gradient: bool) -> Pass {
    let k = ratios.cols();
    let mut gradient = if with_gradient { vec![0.0; k] } else { Vec::new() };
    // Successive EM iterates can differ by less than the rounding noise of a
    // plain sum over thousands of rows.
    let mut log_likelihood = CompensatedSum::default();
    let mut zero_support_row = None;
    for (i, row) in ratios.iter_rows().enumerate() {
        let s: f64 = row.iter().zip(estimate).map(|(a, p)| a * p).sum();
        if !(s > 0.0) {
            zero_support_row.get_or_insert(i);
            continue;
        }
        log_likelihood.add(s.ln());
        if with_gradient {
            for (g, a) in gradient.iter_mut().zip(row) {
                *g += a / s;
            }
        }
    }
    // Evaluate at the exactly normalized point: an iterate summing to 1 + d
    // would otherwise shift the value by about N * d, i.e. many ulps.
    let mut excess = CompensatedSum::default();
    excess.add(-1.0);
    estimate.iter().for_each(|&p| excess.add(p));
    let log_likelihood = if zero_support_row.is_some() {
        f64::NEG_INFINITY
    } else {
        log_likelihood.value() - ratios.rows() as f64 * excess.value().ln_1p()
    };
    Pass { zero_support_row, log_likelihood, gradient }
}

/// Neumaier summation.
#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let next = self.sum + v;
        self.compensation +=
            if self.sum.abs() >= v.abs() { (self.sum - next) + v } else { (v - next) + self.sum };
        self.sum = next;
    }

    fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

fn check_dims(ratios: &RatioMatrix, len: usize) -> Result<()> {
    if ratios.cols() != len {
        return Err(Error::DimensionMismatch { context: "estimation", expected: ratios.cols(), found: len });
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidConfig(format!("alpha must be a finite value >= 1, got {alpha}")));
    }
    Ok(())
}

/// `l(P) = sum_i log sum_k P_k a_ik`.
///
/// Fails with [`Error::MinusInfinity`] when some row has zero mass under `P`.
pub fn log_likelihood(ratios: &RatioMatrix, estimate: &PriorVector) -> Result<f64> {
    check_dims(ratios, estimate.len())?;
    let pass = evaluate(ratios, estimate.values(), false);
    match pass.zero_support_row {
        Some(row) => Err(Error::MinusInfinity { row }),
        None => Ok(pass.log_likelihood),
    }
}

/// `(alpha - 1) * sum_k log P_k` (zero when `alpha == 1`), or the class
/// index of a zero coordinate that sends it to `-inf`.
pub(crate) fn dirichlet_log_density(estimate: &[f64], alpha: f64) -> std::result::Result<f64, usize> {
    if alpha == 1.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (class, &p) in estimate.iter().enumerate() {
        if p <= 0.0 {
            return Err(class);
        }
        total += p.ln();
    }
    Ok((alpha - 1.0) * total)
}

/// Unnormalized log-posterior `(alpha - 1) * sum_k log P_k + l(P)` under a
/// symmetric Dirichlet with concentration `alpha >= 1`. The Dirichlet
/// normalizer is omitted since it does not depend on `P`.
pub fn log_posterior_objective(ratios: &RatioMatrix, estimate: &PriorVector, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let ll = log_likelihood(ratios, estimate)?;
    let prior = dirichlet_log_density(estimate.values(), alpha).map_err(|class| Error::DirichletBoundary { class })?;
    Ok(prior + ll)
}

/// `d l / d P_k = sum_i a_ik / sum_j P_j a_ij`, for any point with positive
/// mixture values (not necessarily on the simplex).
pub fn log_likelihood_gradient(ratios: &RatioMatrix, estimate: &[f64]) -> Result<Vec<f64>> {
    check_dims(ratios, estimate.len())?;
    let pass = evaluate(ratios, estimate, true);
    match pass.zero_support_row {
        Some(row) => Err(Error::MinusInfinity { row }),
        None => Ok(pass.gradient),
    }
}

/// Likelihood gradient plus the Dirichlet term `(alpha - 1) / P_k`, with `P_k`
/// clamped below at [`DIRICHLET_GRADIENT_FLOOR`].
pub fn log_posterior_gradient(ratios: &RatioMatrix, estimate: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let mut gradient = log_likelihood_gradient(ratios, estimate)?;
    add_dirichlet_gradient(&mut gradient, estimate, alpha);
    Ok(gradient)
}

pub(crate) fn add_dirichlet_gradient(gradient: &mut [f64], estimate: &[f64], alpha: f64) {
    if alpha == 1.0 {
        return;
    }
    for (g, &p) in gradient.iter_mut().zip(estimate) {
        *g += (alpha - 1.0) / p.max(DIRICHLET_GRADIENT_FLOOR);
    }
}
