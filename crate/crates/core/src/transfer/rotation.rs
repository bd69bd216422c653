//! Rotation logarithm and exponential, and the weighted intrinsic mean.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use super::TransferError;
use crate::mesh::Vec3;

/// Rotation vector of a proper orthogonal matrix, with angle in `[0, pi]`.
pub fn log_so3(r: &Matrix3<f64>) -> Vec3 {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r)).scaled_axis()
}

pub fn exp_so3(v: &Vec3) -> Matrix3<f64> {
    *Rotation3::new(*v).matrix()
}

const MEAN_TOL: f64 = 1e-12;
const MEAN_ITERS: usize = 50;
/// Rotations closer than this to half a turn apart have no unique mean.
const ANTIPODAL: f64 = std::f64::consts::PI - 1e-6;

/// Weighted intrinsic mean `R <- R exp(sum_j w_j log(R^T R_j))`, seeded from
/// the largest-weight rotation.
pub fn rotation_mean(rotations: &[Matrix3<f64>], weights: &[f64]) -> Result<Matrix3<f64>, TransferError> {
    assert_eq!(rotations.len(), weights.len());
    if rotations.is_empty() {
        return Err(TransferError::EmptyPatch);
    }
    let seed = (0..weights.len()).fold(0, |best, j| if weights[j] > weights[best] { j } else { best });
    let mut r = rotations[seed];
    for _ in 0..MEAN_ITERS {
        let mut step = Vec3::zeros();
        for (rj, &w) in rotations.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let v = log_so3(&(r.transpose() * rj));
            if v.norm() > ANTIPODAL {
                return Err(TransferError::RotationMean);
            }
            step += v * w;
        }
        if step.norm() < MEAN_TOL {
            return Ok(r);
        }
        r = orthonormalize(&(r * exp_so3(&step)));
    }
    Err(TransferError::RotationMean)
}

/// Nearest rotation, removing drift from repeated products.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    *UnitQuaternion::from_matrix(r).to_rotation_matrix().matrix()
}
