//! Normalized exponential weights of a sample patch.

use super::TransferError;
use crate::mesh::Vec3;

/// `w_j = exp(-c |x_j - x_p|^2)`, normalized to unit sum.
pub fn normalized_weights(points: &[Vec3], xp: &Vec3, c: f64) -> Result<Vec<f64>, TransferError> {
    if points.is_empty() {
        return Err(TransferError::EmptyPatch);
    }
    let raw: Vec<f64> = points.iter().map(|x| (-c * (x - xp).norm_squared()).exp()).collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(TransferError::WeightUnderflow { c });
    }
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Default decay `9 / r_p^2`, so the weight at the patch boundary is `e^-9`.
pub fn default_decay(r_p: f64) -> f64 {
    9.0 / (r_p * r_p)
}
