//! Element distortion potential and its global assembly.

use rayon::prelude::*;

use super::constraints::{
    constraint_angle, constraint_avg_edge, constraint_equal_edges, target_cos, ConstraintEval,
    ElementMatrix, ElementVector,
};
use super::targets::{ElementTargets, PenaltyParams};
use super::DistortionError;
use crate::assembly::{CondensedSystem, DofMap};
use crate::mesh::topology::ANGLE_PAIRS;
use crate::mesh::{ElementEdgeFrame, Mesh, Vec3};

/// Rejects frames with an edge or averaged edge shorter than `guard`.
pub fn check_frame(frame: &ElementEdgeFrame, guard: f64) -> Result<(), DistortionError> {
    for i in 0..3 {
        let short = frame.edges[i].iter().chain(std::iter::once(&frame.mean[i]));
        if short.into_iter().any(|v| !(v.norm() > guard)) {
            return Err(DistortionError::Degenerate {
                element: None,
                direction: i + 1,
            });
        }
    }
    Ok(())
}

/// Length guard for a mesh: `1e-14` times its bounding-box diagonal.
pub fn length_guard(mesh: &Mesh) -> f64 {
    1e-14 * mesh.diameter()
}

/// Potential value of one element, without derivatives.
pub fn frame_potential(
    frame: &ElementEdgeFrame,
    t: &ElementTargets,
    p: &PenaltyParams,
) -> Result<f64, DistortionError> {
    let mut bar = 0.0;
    let mut hat = 0.0;
    let mut ang = 0.0;
    for i in 0..3 {
        let nb = frame.mean[i].norm();
        bar += (nb / t.length[i] - 1.0).powi(2);
        let bb = nb * nb;
        for (v, rho) in frame.edges[i].iter().zip(t.ratio[i]) {
            hat += (v.norm_squared() / bb - rho).powi(2);
        }
    }
    for node in 0..8 {
        for (k, &(m, n)) in ANGLE_PAIRS.iter().enumerate() {
            let (a, b) = (frame.outward(node, m), frame.outward(node, n));
            let c = a.dot(&b) / (a.norm() * b.norm());
            if !c.is_finite() {
                return Err(DistortionError::Degenerate {
                    element: None,
                    direction: 0,
                });
            }
            ang += (c - target_cos(t.angle[node][k])).powi(2);
        }
    }
    Ok(0.5 * (p.eps_bar * bar + p.eps_hat * hat + p.eps_a * ang))
}

/// Potential, gradient and hessian of one element over its 24 unknowns.
pub fn frame_contribution(
    frame: &ElementEdgeFrame,
    t: &ElementTargets,
    p: &PenaltyParams,
) -> Result<(f64, ElementVector, ElementMatrix), DistortionError> {
    let mut pi = 0.0;
    let mut g = ElementVector::zeros();
    let mut h = ElementMatrix::zeros();
    let mut add = |eps: f64, c: ConstraintEval| {
        pi += 0.5 * eps * c.value * c.value;
        g += c.gradient * (eps * c.value);
        h.ger(eps, &c.gradient, &c.gradient, 1.0);
        h += c.hessian * (eps * c.value);
    };
    for i in 0..3 {
        if p.eps_bar != 0.0 {
            add(p.eps_bar, constraint_avg_edge(frame, i, t.length[i])?);
        }
        if p.eps_hat != 0.0 {
            for j in 0..4 {
                add(p.eps_hat, constraint_equal_edges(frame, i, j, t.ratio[i][j])?);
            }
        }
    }
    if p.eps_a != 0.0 {
        for node in 0..8 {
            for pair in 0..3 {
                add(p.eps_a, constraint_angle(frame, node, pair, t.angle[node][pair])?);
            }
        }
    }
    Ok((pi, g, h))
}

/// Distortion potential of element `e` of `mesh` at its current node positions.
pub fn element_potential(
    mesh: &Mesh,
    e: usize,
    targets: &ElementTargets,
    penalties: &PenaltyParams,
) -> Result<f64, DistortionError> {
    if e >= mesh.num_elements() {
        return Err(DistortionError::Mesh(crate::mesh::MeshError::ElementIndex(e)));
    }
    let frame = ElementEdgeFrame::from_coords(&mesh.element_coords(e));
    check_frame(&frame, length_guard(mesh)).map_err(|err| err.at(e))?;
    frame_potential(&frame, targets, penalties).map_err(|err| err.at(e))
}

fn frame_at(mesh: &Mesh, x: &[Vec3], e: usize) -> ElementEdgeFrame {
    let conn = &mesh.elements[e];
    ElementEdgeFrame::from_coords(&std::array::from_fn(|k| x[conn[k]]))
}

/// Total distortion potential at positions `x` (connectivity from `mesh`).
pub fn distortion_potential(
    mesh: &Mesh,
    x: &[Vec3],
    targets: &[ElementTargets],
    penalties: &[PenaltyParams],
    guard: f64,
) -> Result<f64, DistortionError> {
    let parts: Result<Vec<f64>, DistortionError> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let frame = frame_at(mesh, x, e);
            check_frame(&frame, guard).map_err(|err| err.at(e))?;
            frame_potential(&frame, &targets[e], &penalties[e]).map_err(|err| err.at(e))
        })
        .collect();
    // summed in element order for reproducibility
    Ok(parts?.iter().sum())
}

/// Assembles potential, residual `sum eps G dG` and tangent
/// `sum eps (dG dG^T + G d2G)` at positions `x`, condensing fixed dofs.
///
/// `penalties` holds one entry per element.
pub fn assemble_distortion(
    mesh: &Mesh,
    x: &[Vec3],
    targets: &[ElementTargets],
    penalties: &[PenaltyParams],
    dofs: &DofMap,
    guard: f64,
) -> Result<CondensedSystem, DistortionError> {
    assert_eq!(targets.len(), mesh.num_elements());
    assert_eq!(penalties.len(), mesh.num_elements());
    let locals: Vec<(f64, ElementVector, ElementMatrix)> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|e| {
            let frame = frame_at(mesh, x, e);
            check_frame(&frame, guard).map_err(|err| err.at(e))?;
            frame_contribution(&frame, &targets[e], &penalties[e]).map_err(|err| err.at(e))
        })
        .collect::<Result<_, _>>()?;
    let mut sys = CondensedSystem::new(dofs);
    sys.triplets.reserve(mesh.num_elements() * 576);
    for (e, (pi, g, h)) in locals.iter().enumerate() {
        sys.scatter(dofs, &mesh.elements[e], *pi, g.as_slice(), |r, c| h[(r, c)]);
    }
    Ok(sys)
}
