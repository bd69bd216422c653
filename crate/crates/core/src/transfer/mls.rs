//! Moving least squares on a weighted sample patch.
//!
//! For a fixed patch the interpolant is linear in the data, so it is stored as
//! a kernel `phi` with `alpha_p = sum_j phi_j alpha_j`. The same kernel then
//! serves MLS, LOGMLS and the rotation-vector fits of the tensor scheme.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::TransferError;
use crate::mesh::Vec3;
use crate::solver::linear::sym_eigen;

/// Polynomial degree of the MLS basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum BasisOrder {
    Constant,
    Linear,
    Quadratic,
}

impl BasisOrder {
    pub fn degree(self) -> u8 {
        self as u8
    }

    /// Number of basis functions.
    pub fn size(self) -> usize {
        match self {
            BasisOrder::Constant => 1,
            BasisOrder::Linear => 4,
            BasisOrder::Quadratic => 10,
        }
    }

    pub fn lower(self) -> Option<BasisOrder> {
        match self {
            BasisOrder::Constant => None,
            BasisOrder::Linear => Some(BasisOrder::Constant),
            BasisOrder::Quadratic => Some(BasisOrder::Linear),
        }
    }

    fn eval(self, s: &Vec3) -> DVector<f64> {
        let mut p = vec![1.0];
        if self >= BasisOrder::Linear {
            p.extend([s.x, s.y, s.z]);
        }
        if self == BasisOrder::Quadratic {
            p.extend([s.x * s.x, s.y * s.y, s.z * s.z, s.x * s.y, s.x * s.z, s.y * s.z]);
        }
        DVector::from_vec(p)
    }
}

impl TryFrom<u8> for BasisOrder {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(BasisOrder::Constant),
            1 => Ok(BasisOrder::Linear),
            2 => Ok(BasisOrder::Quadratic),
            _ => Err(format!("basis order {v} not in 0, 1, 2")),
        }
    }
}

impl From<BasisOrder> for u8 {
    fn from(b: BasisOrder) -> u8 {
        b.degree()
    }
}

/// Moment matrices with reciprocal condition below this are rank deficient.
const RCOND: f64 = 1e-12;

/// Linear MLS functional of one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct MlsKernel {
    pub phi: Vec<f64>,
    /// Order actually used after any fallback.
    pub order: BasisOrder,
    /// Largest-weight sample; data are interpolated relative to its value so
    /// that constant data are reproduced bit for bit.
    pub anchor: usize,
}

impl MlsKernel {
    /// Kernel at `xp` from samples `points` with normalized `weights`.
    ///
    /// A patch too small or too degenerate for `order` falls back to lower
    /// orders, or fails when `strict`.
    pub fn new(
        points: &[Vec3],
        weights: &[f64],
        xp: &Vec3,
        order: BasisOrder,
        strict: bool,
    ) -> Result<Self, TransferError> {
        assert_eq!(points.len(), weights.len());
        if points.is_empty() {
            return Err(TransferError::EmptyPatch);
        }
        let anchor = (0..weights.len()).fold(0, |best, j| if weights[j] > weights[best] { j } else { best });
        let scale = points.iter().map(|x| (x - xp).norm()).fold(0.0, f64::max);
        let scale = if scale > 0.0 { scale } else { 1.0 };
        let mut order = order;
        loop {
            if let Some(phi) = kernel(points, weights, xp, scale, order) {
                return Ok(MlsKernel { phi, order, anchor });
            }
            match order.lower() {
                Some(lower) if !strict => order = lower,
                _ => {
                    return Err(TransferError::RankDeficient {
                        order: order.degree(),
                        samples: points.len(),
                    })
                }
            }
        }
    }

    /// `sum_j phi_j alpha_j`, evaluated relative to the anchor value.
    pub fn apply(&self, values: &[f64]) -> f64 {
        let a = values[self.anchor];
        a + self.phi.iter().zip(values).map(|(p, v)| p * (v - a)).sum::<f64>()
    }

    /// `exp(sum_j phi_j ln alpha_j)`; all values must be positive.
    pub fn apply_log(&self, values: &[f64]) -> f64 {
        let a = values[self.anchor];
        let la = a.ln();
        a * self.phi.iter().zip(values).map(|(p, v)| p * (v.ln() - la)).sum::<f64>().exp()
    }

    /// Componentwise [`MlsKernel::apply`] on vectors.
    pub fn apply_vec(&self, values: &[Vec3]) -> Vec3 {
        let a = values[self.anchor];
        a + self.phi.iter().zip(values).map(|(p, v)| (v - a) * *p).sum::<Vec3>()
    }
}

fn kernel(points: &[Vec3], weights: &[f64], xp: &Vec3, scale: f64, order: BasisOrder) -> Option<Vec<f64>> {
    let m = order.size();
    if points.len() < m {
        return None;
    }
    let basis: Vec<DVector<f64>> = points.iter().map(|x| order.eval(&((x - xp) / scale))).collect();
    let mut moment = DMatrix::zeros(m, m);
    for (p, &w) in basis.iter().zip(weights) {
        moment.ger(w, p, p, 1.0);
    }
    let (eig, _) = sym_eigen(&moment);
    let top = eig.max();
    if !(top > 0.0) || eig.min() <= RCOND * top {
        return None;
    }
    // z = M^-1 e0, since the basis is centered at xp and p(xp) = e0
    let z = moment.cholesky()?.solve(&DVector::from_fn(m, |i, _| if i == 0 { 1.0 } else { 0.0 }));
    Some(basis.iter().zip(weights).map(|(p, &w)| w * p.dot(&z)).collect())
}

/// MLS value at `xp` and the order used.
pub fn mls_interpolate(
    points: &[Vec3],
    values: &[f64],
    weights: &[f64],
    xp: &Vec3,
    order: BasisOrder,
    strict: bool,
) -> Result<(f64, BasisOrder), TransferError> {
    let k = MlsKernel::new(points, weights, xp, order, strict)?;
    Ok((k.apply(values), k.order))
}

/// Positive interpolant `exp(MLS of ln alpha)`.
pub fn logmls_interpolate(
    points: &[Vec3],
    values: &[f64],
    weights: &[f64],
    xp: &Vec3,
    order: BasisOrder,
    strict: bool,
) -> Result<(f64, BasisOrder), TransferError> {
    check_positive(values)?;
    let k = MlsKernel::new(points, weights, xp, order, strict)?;
    Ok((k.apply_log(values), k.order))
}

pub fn check_positive(values: &[f64]) -> Result<(), TransferError> {
    match values.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(TransferError::NonPositive {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
