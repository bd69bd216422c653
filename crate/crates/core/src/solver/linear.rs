//! Sparse direct solve of the condensed Newton system and rigid-mode detection.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;
use nalgebra::{DMatrix, DVector};

use crate::assembly::{CondensedSystem, DofMap};
use crate::mesh::Vec3;

/// Solves `K x = b` by sparse Cholesky, falling back to LU when `K` is not
/// positive definite. Returns `None` when both fail or the solution is not
/// finite or does not satisfy the system.
pub fn solve(sys: &CondensedSystem, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = sys.residual.len();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let matrix = |lower_only: bool| {
        let trips: Vec<Triplet<usize, usize, f64>> = sys
            .triplets
            .iter()
            .filter(|&&(r, c, _)| !lower_only || r >= c)
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).ok()
    };
    let rhs = Col::<f64>::from_fn(n, |i| b[i]);
    let accept = |sol: Col<f64>| {
        let x = DVector::from_fn(n, |i, _| sol[i]);
        let ok = x.iter().all(|v| v.is_finite())
            && (mat_vec(sys, &x) - b).norm() <= 1e-6 * b.norm().max(f64::MIN_POSITIVE);
        ok.then_some(x)
    };
    let lower = matrix(true)?;
    if let Some(x) = lower.sp_cholesky(Side::Lower).ok().and_then(|llt| accept(llt.solve(&rhs))) {
        return Some(x);
    }
    let k = matrix(false)?;
    let lu = k.sp_lu().ok()?;
    accept(lu.solve(&rhs))
}

/// `K x` from the triplets.
pub fn mat_vec(sys: &CondensedSystem, x: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(x.len());
    for &(r, c, v) in &sys.triplets {
        y[r] += v * x[c];
    }
    y
}

/// Number of independent rigid motions (translations and rotations of all
/// nodes) that vanish on the fixed dofs and that `resisting` does not stiffen.
///
/// The distortion potential never resists rigid motion, so `resisting` is the
/// sliding tangent at a configuration with zero gaps (then it is semidefinite),
/// or `None` without sliding.
pub fn unconstrained_rigid_modes(resisting: Option<&CondensedSystem>, dofs: &DofMap, x: &[Vec3]) -> usize {
    let n = dofs.n_dofs();
    if n == 0 || dofs.n_free() == 0 {
        return 0;
    }
    let centroid = x.iter().sum::<Vec3>() / x.len() as f64;
    let mut modes = DMatrix::zeros(n, 6);
    for g in 0..n {
        let (a, c) = (g / 3, g % 3);
        modes[(g, c)] = 1.0;
        let r = x[a] - centroid;
        for axis in 0..3 {
            modes[(g, 3 + axis)] = Vec3::ith(axis, 1.0).cross(&r)[c];
        }
    }
    let q = orthonormal_columns(&modes, 1e-12);
    // admissible combinations vanish on the fixed dofs
    let mut qf = DMatrix::zeros(n, q.ncols());
    for g in (0..n).filter(|&g| dofs.is_fixed(g)) {
        qf.set_row(g, &q.row(g));
    }
    let (values, vectors) = sym_eigen(&(qf.transpose() * &qf));
    let admissible: Vec<DVector<f64>> = (0..q.ncols())
        .filter(|&i| values[i] <= 1e-12)
        .map(|i| &q * vectors.column(i))
        .collect();
    if admissible.is_empty() {
        return 0;
    }
    let Some(sys) = resisting else {
        return admissible.len();
    };
    let mut diag = vec![0.0; dofs.n_free()];
    for &(r, c, v) in &sys.triplets {
        if r == c {
            diag[r] += v;
        }
    }
    let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if scale == 0.0 {
        return admissible.len();
    }
    let u: Vec<DVector<f64>> = admissible
        .iter()
        .map(|v| DVector::from_iterator(dofs.n_free(), dofs.free_dofs().map(|(g, _)| v[g])))
        .collect();
    let ku: Vec<DVector<f64>> = u.iter().map(|v| mat_vec(sys, v)).collect();
    let m = DMatrix::from_fn(u.len(), u.len(), |i, j| 0.5 * (u[i].dot(&ku[j]) + u[j].dot(&ku[i])));
    sym_eigen(&m)
        .0
        .iter()
        .filter(|&&l| l <= 1e-10 * scale)
        .count()
}

/// Orthonormal basis of the column space, dropping directions whose Gram
/// eigenvalue falls below `rel` times the largest.
fn orthonormal_columns(a: &DMatrix<f64>, rel: f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(&(a.transpose() * a));
    let top = values.max();
    let cols: Vec<DVector<f64>> = (0..a.ncols())
        .filter(|&i| values[i] > rel * top)
        .map(|i| a * vectors.column(i) / values[i].sqrt())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a dense symmetric
/// matrix, read from its lower triangle.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let fm = Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm.self_adjoint_eigen(Side::Lower).expect("symmetric eigensolver converges");
    let s = evd.S().column_vector();
    let u = evd.U();
    (DVector::from_fn(n, |i, _| s[i]), DMatrix::from_fn(n, n, |i, j| u[(i, j)]))
}
