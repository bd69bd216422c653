//! Polar/spectral tensor factors and structure-preserving tensor interpolation.
//!
//! `T = R Q^T Lambda Q` with `R` the rotation of the polar decomposition and
//! `Q^T Lambda Q` the symmetric positive-definite right stretch. The R-MLS
//! scheme interpolates the eigenvalues as scalars and the rotations `R`, `Q`
//! on the rotation group: a weighted intrinsic mean serves as reference and an
//! MLS fit of the rotation vectors relative to it supplies the spatial
//! variation.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::mls::{check_positive, BasisOrder, MlsKernel};
use super::rotation::{exp_so3, log_so3, rotation_mean};
use super::TransferError;
use crate::mesh::Vec3;
use crate::solver::linear::sym_eigen;

pub type Mat3 = Matrix3<f64>;

/// Eigenvalues closer than this (relative to the largest) have no stable
/// eigenvector orientation.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorFactors {
    pub r: Mat3,
    /// Rows are the stretch eigenvectors.
    pub q: Mat3,
    /// Eigenvalues in descending order.
    pub lambda: Vector3<f64>,
}

impl TensorFactors {
    pub fn reconstruct(&self) -> Mat3 {
        self.r * self.q.transpose() * Mat3::from_diagonal(&self.lambda) * self.q
    }

    /// Gaps between consecutive eigenvalues fall below [`CLUSTER_TOL`].
    pub fn clustered(&self) -> bool {
        let l = &self.lambda;
        let top = l[0].abs();
        l[0] - l[1] < CLUSTER_TOL * top || l[1] - l[2] < CLUSTER_TOL * top
    }
}

/// Polar and spectral factors of an invertible tensor with positive determinant.
///
/// Eigenvector signs: the largest-magnitude entry of each row of `Q` is
/// positive, except that the last row is negated when needed for `det Q = 1`.
pub fn decompose_tensor(t: &Mat3) -> Result<TensorFactors, TransferError> {
    if !t.iter().all(|v| v.is_finite()) {
        return Err(TransferError::Tensor("tensor has non-finite entries".into()));
    }
    let det = t.determinant();
    if det < 0.0 {
        return Err(TransferError::Tensor(
            "polar factor is a reflection (negative determinant), outside the method scope".into(),
        ));
    }
    let singular = || TransferError::Tensor("tensor is singular".into());
    let r = polar_rotation(t).ok_or_else(singular)?;
    let u = r.transpose() * t;
    let u = DMatrix::from_fn(3, 3, |i, j| 0.5 * (u[(i, j)] + u[(j, i)]));
    // ascending eigenvalues; reverse to descending
    let (eig, vecs) = sym_eigen(&u);
    let lambda = Vector3::new(eig[2], eig[1], eig[0]);
    if !(lambda[2] > 1e-14 * lambda[0]) {
        return Err(singular());
    }
    let mut q = Mat3::from_fn(|i, j| vecs[(j, 2 - i)]);
    for i in 0..3 {
        let row = q.row(i);
        let k = (0..3).fold(0, |best, j| if row[j].abs() > row[best].abs() { j } else { best });
        if row[k] < 0.0 {
            q.row_mut(i).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.row_mut(2).neg_mut();
    }
    Ok(TensorFactors { r, q, lambda })
}

/// Rotation factor of the polar decomposition by the scaled Newton iteration
/// `X <- (g X + X^-T / g) / 2`, which stays accurate for close singular values.
fn polar_rotation(t: &Mat3) -> Option<Mat3> {
    let step = |x: &Mat3, scaled: bool| -> Option<(Mat3, f64)> {
        let inv_t = x.try_inverse()?.transpose();
        let g = if scaled { (inv_t.norm() / x.norm()).sqrt() } else { 1.0 };
        let next = (x * g + inv_t / g) * 0.5;
        Some((next, (next - x).norm()))
    };
    let mut x = *t;
    for _ in 0..100 {
        let (next, change) = step(&x, true)?;
        x = next;
        if change <= 1e-6 {
            // the quadratic phase needs two more steps to reach roundoff
            x = step(&x, false)?.0;
            x = step(&x, false)?.0;
            let orthogonal = (x.transpose() * x - Mat3::identity()).norm() < 1e-12;
            return (orthogonal && x.iter().all(|v| v.is_finite())).then_some(x);
        }
    }
    None
}

/// Scalar scheme for eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarScheme {
    Mls,
    #[default]
    LogMls,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorOutcome {
    pub value: Mat3,
    pub order: BasisOrder,
    /// Eigenvalue clustering forced the weight-only mean for `Q`.
    pub q_fallback: bool,
}

/// R-MLS interpolant at `xp` of the patch `points`, `tensors` with
/// normalized `weights`.
pub fn tensor_interpolate_rmls(
    points: &[Vec3],
    tensors: &[Mat3],
    weights: &[f64],
    xp: &Vec3,
    order: BasisOrder,
    eigen: ScalarScheme,
    strict: bool,
) -> Result<TensorOutcome, TransferError> {
    let kernel = MlsKernel::new(points, weights, xp, order, strict)?;
    rmls_with_kernel(&kernel, tensors, weights, eigen)
}

/// R-MLS with a precomputed kernel.
pub fn rmls_with_kernel(
    kernel: &MlsKernel,
    tensors: &[Mat3],
    weights: &[f64],
    eigen: ScalarScheme,
) -> Result<TensorOutcome, TransferError> {
    let mut factors = tensors
        .iter()
        .enumerate()
        .map(|(j, t)| decompose_tensor(t).map_err(|e| TransferError::Sample { index: j, source: Box::new(e) }))
        .collect::<Result<Vec<_>, _>>()?;
    let q_ref = factors[kernel.anchor].q;
    for f in &mut factors {
        align_rows(&mut f.q, &q_ref);
    }
    let q_fallback = factors.iter().any(TensorFactors::clustered);

    let mut lambda = Vector3::zeros();
    for k in 0..3 {
        let l: Vec<f64> = factors.iter().map(|f| f.lambda[k]).collect();
        lambda[k] = match eigen {
            ScalarScheme::LogMls => {
                check_positive(&l)?;
                kernel.apply_log(&l)
            }
            ScalarScheme::Mls => kernel.apply(&l),
        };
    }
    let rs: Vec<Mat3> = factors.iter().map(|f| f.r).collect();
    let qs: Vec<Mat3> = factors.iter().map(|f| f.q).collect();
    let r = fit_rotation(kernel, &rs, weights, false)?;
    let q = fit_rotation(kernel, &qs, weights, q_fallback)?;
    Ok(TensorOutcome {
        value: r * q.transpose() * Mat3::from_diagonal(&lambda) * q,
        order: kernel.order,
        q_fallback,
    })
}

/// Componentwise MLS of all nine entries.
pub fn componentwise_mls(kernel: &MlsKernel, tensors: &[Mat3]) -> Mat3 {
    Mat3::from_fn(|i, j| {
        let c: Vec<f64> = tensors.iter().map(|t| t[(i, j)]).collect();
        kernel.apply(&c)
    })
}

/// Weighted mean, plus the MLS-fitted rotation-vector offset unless `mean_only`.
fn fit_rotation(kernel: &MlsKernel, rs: &[Mat3], weights: &[f64], mean_only: bool) -> Result<Mat3, TransferError> {
    let mean = rotation_mean(rs, weights)?;
    if mean_only {
        return Ok(mean);
    }
    let omegas: Vec<Vec3> = rs.iter().map(|r| log_so3(&(mean.transpose() * r))).collect();
    Ok(mean * exp_so3(&kernel.apply_vec(&omegas)))
}

/// Flips rows of `q` to point along the matching rows of `reference`, keeping
/// `det q = 1` by re-flipping the least aligned row if needed.
fn align_rows(q: &mut Mat3, reference: &Mat3) {
    let mut dots = [0.0; 3];
    for i in 0..3 {
        dots[i] = q.row(i).dot(&reference.row(i));
        if dots[i] < 0.0 {
            q.row_mut(i).neg_mut();
            dots[i] = -dots[i];
        }
    }
    if q.determinant() < 0.0 {
        let i = (0..3).fold(0, |best, k| if dots[k] < dots[best] { k } else { best });
        q.row_mut(i).neg_mut();
    }
}
