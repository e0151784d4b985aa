//! Geometry of the probability simplex: Euclidean projection and distances
//! between distributions.

use crate::data::PriorVector;
use crate::error::{Error, Result};

/// Euclidean projection of `point` onto the unit simplex.
///
/// Sort-based exact method: with `u` sorted descending, the support size is the
/// largest `j` with `u_j + (1 - sum_{r<=j} u_r) / j > 0`, and every coordinate is
/// shifted by the same threshold and clipped at zero. The result is divided by
/// its exact sum so it satisfies the [`PriorVector`] invariants.
///
/// The maximum is subtracted first, so a shift along the ones vector that is
/// exact in floating point (e.g. dyadic values and shifts) gives a bitwise
/// identical result.
pub fn project_to_simplex(point: &[f64]) -> Result<PriorVector> {
    if point.len() < 2 {
        return Err(Error::TooFewClasses(point.len()));
    }
    if let Some(index) = point.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    // Points already on the simplex up to rounding are returned unchanged,
    // which makes the projection exactly idempotent.
    let sum: f64 = point.iter().sum();
    if point.iter().all(|&v| v >= 0.0) && (sum - 1.0).abs() <= point.len() as f64 * f64::EPSILON {
        return PriorVector::new(point.to_vec());
    }
    let top = point.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centered: Vec<f64> = point.iter().map(|v| v - top).collect();
    let mut sorted = centered.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));

    let mut cumulative = 0.0;
    let mut support_sum = sorted[0];
    let mut support = 1;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let size = (j + 1) as f64;
        if u + (1.0 - cumulative) / size > 0.0 {
            support = j + 1;
            support_sum = cumulative;
        }
    }
    let shift = (1.0 - support_sum) / support as f64;
    let projected: Vec<f64> = centered.iter().map(|&v| (v + shift).max(0.0)).collect();
    Ok(PriorVector::from_weights_unchecked(projected))
}

/// Hellinger distance `(1/sqrt 2) * ||sqrt p - sqrt q||_2`, in `[0, 1]`.
pub fn hellinger(p: &PriorVector, q: &PriorVector) -> Result<f64> {
    check_dims(p, q)?;
    let sum: f64 = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((sum / 2.0).sqrt().min(1.0))
}

/// `KL(p || q) = sum_k p_k log(p_k / q_k)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &PriorVector, q: &PriorVector) -> Result<f64> {
    check_dims(p, q)?;
    let mut total = 0.0;
    for (class, (&pk, &qk)) in p.values().iter().zip(q.values()).enumerate() {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return Err(Error::AbsoluteContinuityViolation { class });
        }
        total += pk * (pk / qk).ln();
    }
    // Rounding can push a true zero slightly negative.
    Ok(total.max(0.0))
}

fn check_dims(p: &PriorVector, q: &PriorVector) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { context: "simplex", expected: p.len(), found: q.len() });
    }
    Ok(())
}
