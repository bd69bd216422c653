//! Bilinear quad facet geometry: shape functions, ray projection with
//! derivatives, and closest-point distance.

use nalgebra::{Matrix3, Vector2};

use crate::mesh::Vec3;

/// Parametric corners of the reference square `[-1, 1]^2`.
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// 2x2 Gauss points (unit weights).
pub const GAUSS: [[f64; 2]; 4] = {
    const G: f64 = 0.577_350_269_189_625_8;
    [[-G, -G], [G, -G], [G, G], [-G, G]]
};

pub fn shape(eta: [f64; 2]) -> [f64; 4] {
    CORNERS.map(|c| 0.25 * (1.0 + c[0] * eta[0]) * (1.0 + c[1] * eta[1]))
}

pub fn shape_d1(eta: [f64; 2]) -> [f64; 4] {
    CORNERS.map(|c| 0.25 * c[0] * (1.0 + c[1] * eta[1]))
}

pub fn shape_d2(eta: [f64; 2]) -> [f64; 4] {
    CORNERS.map(|c| 0.25 * c[1] * (1.0 + c[0] * eta[0]))
}

pub fn interpolate(p: &[Vec3; 4], n: [f64; 4]) -> Vec3 {
    p[0] * n[0] + p[1] * n[1] + p[2] * n[2] + p[3] * n[3]
}

/// Position and tangents `X, X_1, X_2` at `eta`.
pub fn eval(p: &[Vec3; 4], eta: [f64; 2]) -> (Vec3, Vec3, Vec3) {
    (
        interpolate(p, shape(eta)),
        interpolate(p, shape_d1(eta)),
        interpolate(p, shape_d2(eta)),
    )
}

/// Constant mixed derivative `X_12` of a bilinear facet.
pub fn twist(p: &[Vec3; 4]) -> Vec3 {
    (p[0] - p[1] + p[2] - p[3]) * 0.25
}

pub fn diameter(p: &[Vec3; 4]) -> f64 {
    (p[2] - p[0]).norm().max((p[3] - p[1]).norm())
}

/// Area element `|X_1 x X_2|` at `eta`.
pub fn area_element(p: &[Vec3; 4], eta: [f64; 2]) -> f64 {
    let (_, t1, t2) = eval(p, eta);
    t1.cross(&t2).norm()
}

/// Intersection of the ray `x + t n` with a bilinear facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub eta: [f64; 2],
    /// Signed distance along `n` from `x` to the facet.
    pub t: f64,
    /// `dt/dx`.
    pub dt: Vec3,
    /// `d2t/dx2`.
    pub d2t: Matrix3<f64>,
}

impl RayHit {
    /// Largest excursion of `eta` beyond the reference square (0 when inside).
    pub fn overshoot(&self) -> f64 {
        self.eta.iter().map(|e| (e.abs() - 1.0).max(0.0)).fold(0.0, f64::max)
    }
}

/// Solves `X(eta) - x - t n = 0` by Newton's method from `start`.
///
/// Returns `None` if the ray is (nearly) parallel to the facet or Newton fails.
pub fn ray_project(p: &[Vec3; 4], x: &Vec3, n: &Vec3, start: [f64; 2]) -> Option<RayHit> {
    let scale = diameter(p).max(f64::MIN_POSITIVE);
    let x12 = twist(p);
    let mut eta = start;
    let mut t = n.dot(&(interpolate(p, shape(eta)) - x));
    for _ in 0..30 {
        let (xe, t1, t2) = eval(p, eta);
        let r = xe - x - n * t;
        let j = Matrix3::from_columns(&[t1, t2, -n]);
        let jinv = j.try_inverse()?;
        let dz = -(jinv * r);
        eta[0] += dz[0];
        eta[1] += dz[1];
        t += dz[2];
        if !(eta[0].abs() < 1e3 && eta[1].abs() < 1e3 && t.is_finite()) {
            return None;
        }
        if dz.norm() <= 1e-15 * (1.0 + scale) && r.norm() <= 1e-13 * scale {
            break;
        }
    }
    let (xe, t1, t2) = eval(p, eta);
    if (xe - x - n * t).norm() > 1e-10 * scale {
        return None;
    }
    let jinv = Matrix3::from_columns(&[t1, t2, -n]).try_inverse()?;
    let m1: Vec3 = jinv.row(0).transpose();
    let m2: Vec3 = jinv.row(1).transpose();
    let m3: Vec3 = jinv.row(2).transpose();
    let r = m3.dot(&x12);
    let d2t = -(m1 * m2.transpose() + m2 * m1.transpose()) * r;
    Some(RayHit {
        eta,
        t,
        dt: m3,
        d2t,
    })
}

/// Distance from `x` to the facet (closest point over the closed square).
pub fn closest_distance(p: &[Vec3; 4], x: &Vec3) -> f64 {
    let seg = |a: &Vec3, b: &Vec3| {
        let d = b - a;
        let s = ((x - a).dot(&d) / d.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
        (a + d * s - x).norm()
    };
    let mut best = (0..4).map(|k| seg(&p[k], &p[(k + 1) % 4])).fold(f64::INFINITY, f64::min);
    // interior stationary point by Gauss-Newton on |X(eta) - x|^2
    let mut eta = Vector2::new(0.0, 0.0);
    for _ in 0..30 {
        let (xe, t1, t2) = eval(p, [eta[0], eta[1]]);
        let r = xe - x;
        let jt_j = nalgebra::Matrix2::new(t1.dot(&t1), t1.dot(&t2), t1.dot(&t2), t2.dot(&t2));
        let Some(inv) = jt_j.try_inverse() else {
            break;
        };
        let step = -(inv * Vector2::new(t1.dot(&r), t2.dot(&r)));
        eta += step;
        if step.norm() < 1e-14 {
            break;
        }
    }
    if eta.iter().all(|e| e.abs() <= 1.0) {
        best = best.min((interpolate(p, shape([eta[0], eta[1]])) - x).norm());
    }
    best
}
