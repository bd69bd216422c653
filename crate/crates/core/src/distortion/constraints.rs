//! The three constraint families with analytic first and second derivatives
//! with respect to the 24 nodal unknowns of one element.
//!
//! Every constraint depends on at most two vectors `a`, `b` that are linear
//! combinations of the element's node positions. Derivatives are formed with
//! respect to `a` and `b` and then lifted to node space.

use nalgebra::{Matrix3, SMatrix, SVector};

use super::DistortionError;
use crate::mesh::topology::{node_edge, ANGLE_PAIRS, EDGES};
use crate::mesh::{ElementEdgeFrame, Vec3};

pub type ElementVector = SVector<f64, 24>;
pub type ElementMatrix = SMatrix<f64, 24, 24>;

/// Node coefficients of a vector that is a linear combination of node positions.
type Coeffs = [f64; 8];

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEval {
    pub value: f64,
    pub gradient: ElementVector,
    pub hessian: ElementMatrix,
}

fn edge_coeffs(dir: usize, j: usize) -> Coeffs {
    let (tail, head) = EDGES[dir][j];
    let mut c = [0.0; 8];
    c[tail] = -1.0;
    c[head] = 1.0;
    c
}

fn mean_coeffs(dir: usize) -> Coeffs {
    let mut c = [0.0; 8];
    for &(tail, head) in &EDGES[dir] {
        c[tail] -= 0.25;
        c[head] += 0.25;
    }
    c
}

fn outward_coeffs(node: usize, dir: usize) -> Coeffs {
    let (j, sign) = node_edge(node, dir);
    edge_coeffs(dir, j).map(|c| c * sign)
}

/// Lifts derivatives with respect to `R` vector arguments to node space.
fn lift<const R: usize>(
    coeffs: [Coeffs; R],
    grads: [Vec3; R],
    hess: [[Matrix3<f64>; R]; R],
) -> (ElementVector, ElementMatrix) {
    let mut g = ElementVector::zeros();
    let mut h = ElementMatrix::zeros();
    for k in 0..8 {
        for r in 0..R {
            if coeffs[r][k] != 0.0 {
                let mut seg = g.fixed_rows_mut::<3>(3 * k);
                seg += grads[r] * coeffs[r][k];
            }
        }
    }
    for k in 0..8 {
        for l in 0..8 {
            let mut block = Matrix3::zeros();
            for r in 0..R {
                if coeffs[r][k] == 0.0 {
                    continue;
                }
                for s in 0..R {
                    let w = coeffs[r][k] * coeffs[s][l];
                    if w != 0.0 {
                        block += hess[r][s] * w;
                    }
                }
            }
            h.fixed_view_mut::<3, 3>(3 * k, 3 * l).copy_from(&block);
        }
    }
    (g, h)
}

/// `cos(theta)` with an exact zero for a right angle.
pub fn target_cos(theta: f64) -> f64 {
    if theta == std::f64::consts::FRAC_PI_2 {
        0.0
    } else {
        theta.cos()
    }
}

fn nonzero(v: &Vec3, direction: usize) -> Result<f64, DistortionError> {
    let n = v.norm();
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(DistortionError::Degenerate {
            element: None,
            direction: direction + 1,
        })
    }
}

/// `|v_bar[i]| / l_r - 1`.
pub fn constraint_avg_edge(
    frame: &ElementEdgeFrame,
    i: usize,
    l_r: f64,
) -> Result<ConstraintEval, DistortionError> {
    let b = frame.mean[i];
    let nb = nonzero(&b, i)?;
    let u = b / nb;
    let grad = u / l_r;
    let hess = (Matrix3::identity() - u * u.transpose()) / (nb * l_r);
    let (gradient, hessian) = lift([mean_coeffs(i)], [grad], [[hess]]);
    Ok(ConstraintEval {
        value: nb / l_r - 1.0,
        gradient,
        hessian,
    })
}

/// `(v[i][j] . v[i][j]) / (v_bar[i] . v_bar[i]) - rho`, with `rho = 1` for
/// equal edges.
pub fn constraint_equal_edges(
    frame: &ElementEdgeFrame,
    i: usize,
    j: usize,
    rho: f64,
) -> Result<ConstraintEval, DistortionError> {
    let a = frame.edges[i][j];
    let b = frame.mean[i];
    nonzero(&b, i)?;
    let aa = a.dot(&a);
    let bb = b.dot(&b);
    let value = aa / bb - rho;
    let eye = Matrix3::identity();
    let g_a = a * (2.0 / bb);
    let g_b = b * (-2.0 * aa / (bb * bb));
    let h_aa = eye * (2.0 / bb);
    let h_ab = a * b.transpose() * (-4.0 / (bb * bb));
    let h_bb = eye * (-2.0 * aa / (bb * bb)) + b * b.transpose() * (8.0 * aa / (bb * bb * bb));
    let (gradient, hessian) = lift(
        [edge_coeffs(i, j), mean_coeffs(i)],
        [g_a, g_b],
        [[h_aa, h_ab], [h_ab.transpose(), h_bb]],
    );
    Ok(ConstraintEval {
        value,
        gradient,
        hessian,
    })
}

/// `cos(angle between the two edges leaving node along pair) - cos(theta_r)`.
///
/// `pair` indexes `(0,1), (0,2), (1,2)` in direction space.
pub fn constraint_angle(
    frame: &ElementEdgeFrame,
    node: usize,
    pair: usize,
    theta_r: f64,
) -> Result<ConstraintEval, DistortionError> {
    let (m, n) = ANGLE_PAIRS[pair];
    let a = frame.outward(node, m);
    let b = frame.outward(node, n);
    let na = nonzero(&a, m)?;
    let nb = nonzero(&b, n)?;
    let p = a.dot(&b);
    let c = p / (na * nb);
    let eye = Matrix3::identity();
    let (na2, nb2) = (na * na, nb * nb);
    let g_a = b / (na * nb) - a * (c / na2);
    let g_b = a / (na * nb) - b * (c / nb2);
    let ab = a * b.transpose();
    let h_aa = -(b * a.transpose() + ab + eye * p) / (na2 * na * nb)
        + a * a.transpose() * (3.0 * p / (na2 * na2 * na * nb));
    let h_bb = -(a * b.transpose() + b * a.transpose() + eye * p) / (nb2 * nb * na)
        + b * b.transpose() * (3.0 * p / (nb2 * nb2 * nb * na));
    let h_ab = eye / (na * nb) - b * b.transpose() / (na * nb2 * nb) - a * a.transpose() / (na2 * na * nb)
        + ab * (p / (na2 * na * nb2 * nb));
    let (gradient, hessian) = lift(
        [outward_coeffs(node, m), outward_coeffs(node, n)],
        [g_a, g_b],
        [[h_aa, h_ab], [h_ab.transpose(), h_bb]],
    );
    Ok(ConstraintEval {
        value: c - target_cos(theta_r),
        gradient,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::topology::NODE_PARAM;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube() -> [Vec3; 8] {
        NODE_PARAM.map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
    }

    fn perturbed(rng: &mut impl Rng, amp: f64) -> [Vec3; 8] {
        cube().map(|p| p + Vec3::from_fn(|_, _| amp * (2.0 * rng.random::<f64>() - 1.0)))
    }

    fn flat(x: &[Vec3; 8]) -> ElementVector {
        ElementVector::from_fn(|k, _| x[k / 3][k % 3])
    }

    fn unflat(d: &ElementVector) -> [Vec3; 8] {
        std::array::from_fn(|k| Vec3::new(d[3 * k], d[3 * k + 1], d[3 * k + 2]))
    }

    type Eval = dyn Fn(&ElementEdgeFrame) -> ConstraintEval;

    /// Central-difference oracle for gradient and hessian of one constraint.
    fn check_fd(x: &[Vec3; 8], eval: &Eval) {
        let d0 = flat(x);
        let h = 1e-6 * (1.0 + d0.norm());
        let at = |d: &ElementVector| eval(&ElementEdgeFrame::from_coords(&unflat(d)));
        let c0 = at(&d0);
        let mut fd_g = ElementVector::zeros();
        let mut fd_h = ElementMatrix::zeros();
        for k in 0..24 {
            let mut dp = d0;
            let mut dm = d0;
            dp[k] += h;
            dm[k] -= h;
            let (ep, em) = (at(&dp), at(&dm));
            fd_g[k] = (ep.value - em.value) / (2.0 * h);
            fd_h.set_column(k, &((ep.gradient - em.gradient) / (2.0 * h)));
        }
        let scale_g = c0.gradient.norm().max(1e-8);
        assert!((fd_g - c0.gradient).norm() / scale_g <= 1e-6, "gradient mismatch");
        let scale_h = c0.hessian.norm().max(1e-8);
        assert!((fd_h - c0.hessian).norm() / scale_h <= 1e-5, "hessian mismatch");
        assert!((c0.hessian - c0.hessian.transpose()).norm() <= 1e-14 * scale_h);
    }

    #[test]
    fn avg_edge_values() {
        let f = ElementEdgeFrame::from_coords(&cube());
        assert_eq!(constraint_avg_edge(&f, 0, 1.0).unwrap().value, 0.0);
        assert_eq!(constraint_avg_edge(&f, 0, 0.5).unwrap().value, 1.0);
    }

    #[test]
    fn avg_edge_zero_mean_is_singular() {
        let mut x = cube();
        for k in [1, 2, 5, 6] {
            x[k].x = 0.0;
        }
        let f = ElementEdgeFrame::from_coords(&x);
        let err = constraint_avg_edge(&f, 0, 1.0).unwrap_err();
        assert!(matches!(err, DistortionError::Degenerate { direction: 1, .. }));
    }

    #[test]
    fn equal_edges_vanish_on_parallelepiped() {
        let (u, v, w) = (Vec3::new(1.2, 0.1, 0.0), Vec3::new(0.3, 0.9, 0.2), Vec3::new(-0.1, 0.2, 1.4));
        let x = NODE_PARAM.map(|p| u * p[0] as f64 + v * p[1] as f64 + w * p[2] as f64);
        let f = ElementEdgeFrame::from_coords(&x);
        for i in 0..3 {
            for j in 0..4 {
                assert!(constraint_equal_edges(&f, i, j, 1.0).unwrap().value.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn equal_edges_direct_formula() {
        // stretch edge (0,1) by moving node 1 to x = 2
        let mut x = cube();
        x[1].x = 2.0;
        let f = ElementEdgeFrame::from_coords(&x);
        // v[1][1] = (2,0,0); mean = (1.25,0,0)
        let g = constraint_equal_edges(&f, 0, 0, 1.0).unwrap().value;
        assert!((g - (4.0 / 1.5625 - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn angle_values() {
        let f = ElementEdgeFrame::from_coords(&cube());
        for node in 0..8 {
            for pair in 0..3 {
                let g = constraint_angle(&f, node, pair, std::f64::consts::FRAC_PI_2).unwrap();
                assert!(g.value.abs() < 1e-15);
            }
        }
        // 60 degrees between x- and y-edges at node 0
        let x = NODE_PARAM.map(|p| {
            let (a, b, c) = (p[0] as f64, p[1] as f64, p[2] as f64);
            Vec3::new(a + 0.5 * b, b * 3f64.sqrt() / 2.0, c)
        });
        let f = ElementEdgeFrame::from_coords(&x);
        let g = constraint_angle(&f, 0, 0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((g.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = perturbed(&mut rng, 0.2);
            let l = 0.5 + rng.random::<f64>();
            let th = 1.0 + rng.random::<f64>();
            for i in 0..3 {
                check_fd(&x, &move |f| constraint_avg_edge(f, i, l).unwrap());
                for j in 0..4 {
                    check_fd(&x, &move |f| constraint_equal_edges(f, i, j, 0.7).unwrap());
                }
            }
            for node in 0..8 {
                for pair in 0..3 {
                    check_fd(&x, &move |f| constraint_angle(f, node, pair, th).unwrap());
                }
            }
        }
    }
}
