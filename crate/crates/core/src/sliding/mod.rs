//! Boundary-preserving mesh sliding.
//!
//! Boundary nodes of a slave surface may move tangentially but must stay on a
//! frozen replica (the auxiliary surface) of that surface. The zero normal gap
//! condition is enforced by a penalty on weighted nodal gaps, bilaterally.

pub mod facet;

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{CondensedSystem, DofMap};
use crate::mesh::normals::facet_center_normal;
use crate::mesh::{Mesh, MeshError, Vec3};
use facet::{RayHit, GAUSS};

#[derive(Debug, Error)]
pub enum SlidingError {
    #[error("slave facet {facet}, quadrature point {point}: normal ray does not hit the auxiliary surface within the search tolerance")]
    Projection { facet: usize, point: usize },
    #[error("node {node}: averaged normal vanishes; add it to the pinned set")]
    DegenerateNormal { node: usize },
    #[error("node {node}: adjacent facets meet at {angle_deg:.1} degrees (sharp feature); add it to the pinned set")]
    SharpFeature { node: usize, angle_deg: f64 },
    #[error("sliding interface has no facets")]
    Empty,
    #[error("invalid sliding penalty eps_m = {0}")]
    InvalidPenalty(f64),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Largest excursion of a projection outside its facet before neighbours are tried.
const INSIDE_TOL: f64 = 1e-9;
/// Largest accepted parametric overshoot of a projection.
const MAX_OVERSHOOT: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct SlidingInterface {
    /// Slave facets as node indices (outward oriented).
    pub slave_facets: Vec<[usize; 4]>,
    /// Frozen coordinates of each facet (the auxiliary surface, same topology).
    pub aux_facets: Vec<[Vec3; 4]>,
    /// Averaged unit normal per slave node, frozen for the solve.
    pub normals: BTreeMap<usize, Vec3>,
    pub eps_m: f64,
    pub pinned: BTreeSet<usize>,
    /// Slave nodes carrying a gap equation (not pinned), sorted.
    pub gap_nodes: Vec<usize>,
    /// Area element at each Gauss point of the frozen geometry.
    ref_area: Vec<[f64; 4]>,
    /// Facet normals interpolated to the Gauss points.
    gauss_normals: Vec<[Vec3; 4]>,
    /// Facets sharing at least one node with facet `f`.
    neighbours: Vec<Vec<usize>>,
    /// `(facet, local corner)` pairs for every gap node, parallel to `gap_nodes`.
    node_facets: Vec<Vec<(usize, usize)>>,
}

/// Builds a sliding interface on the mesh facets `facets`.
///
/// Nodes whose averaged normal vanishes, or whose adjacent facets meet at more
/// than `feature_angle_deg`, must be listed in `pinned`.
pub fn build_interface(
    mesh: &Mesh,
    facets: &[usize],
    pinned: &BTreeSet<usize>,
    eps_m: f64,
    feature_angle_deg: f64,
) -> Result<SlidingInterface, SlidingError> {
    if facets.is_empty() {
        return Err(SlidingError::Empty);
    }
    if !(eps_m >= 0.0 && eps_m.is_finite()) {
        return Err(SlidingError::InvalidPenalty(eps_m));
    }
    let mut slave_facets = Vec::with_capacity(facets.len());
    for &f in facets {
        let facet = *mesh
            .boundary_facets
            .get(f)
            .ok_or_else(|| MeshError::Invalid(format!("facet index {f} out of range")))?;
        slave_facets.push(facet);
    }
    let aux_facets: Vec<[Vec3; 4]> = slave_facets
        .iter()
        .map(|f| f.map(|a| mesh.nodes[a]))
        .collect();
    let facet_normals: Vec<Vec3> = aux_facets.iter().map(facet_center_normal).collect();

    let mut adjacent: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (f, facet) in slave_facets.iter().enumerate() {
        for (k, &a) in facet.iter().enumerate() {
            adjacent.entry(a).or_default().push((f, k));
        }
    }
    let cos_feature = feature_angle_deg.to_radians().cos();
    let mut normals = BTreeMap::new();
    for (&a, list) in &adjacent {
        let sum: Vec3 = list.iter().map(|&(f, _)| facet_normals[f]).sum();
        if pinned.contains(&a) {
            if sum.norm() > 1e-10 {
                normals.insert(a, sum.normalize());
            }
            continue;
        }
        if !(sum.norm() > 1e-10) {
            return Err(SlidingError::DegenerateNormal { node: a });
        }
        for (i, &(f, _)) in list.iter().enumerate() {
            for &(g, _) in &list[i + 1..] {
                let c = facet_normals[f].dot(&facet_normals[g]).clamp(-1.0, 1.0);
                if c < cos_feature {
                    return Err(SlidingError::SharpFeature {
                        node: a,
                        angle_deg: c.acos().to_degrees(),
                    });
                }
            }
        }
        normals.insert(a, sum.normalize());
    }

    let ref_area = aux_facets
        .iter()
        .map(|p| GAUSS.map(|q| facet::area_element(p, q)))
        .collect();
    let gauss_normals = slave_facets
        .iter()
        .enumerate()
        .map(|(f, facet)| {
            let nodal = facet.map(|a| normals.get(&a).copied().unwrap_or(facet_normals[f]));
            GAUSS.map(|q| facet::interpolate(&nodal, facet::shape(q)).normalize())
        })
        .collect();
    let mut neighbours = vec![Vec::new(); slave_facets.len()];
    for list in adjacent.values() {
        for &(f, _) in list {
            for &(g, _) in list {
                if f != g && !neighbours[f].contains(&g) {
                    neighbours[f].push(g);
                }
            }
        }
    }
    let (gap_nodes, node_facets): (Vec<usize>, Vec<Vec<(usize, usize)>>) = adjacent
        .into_iter()
        .filter(|(a, _)| !pinned.contains(a))
        .unzip();
    Ok(SlidingInterface {
        slave_facets,
        aux_facets,
        normals,
        eps_m,
        pinned: pinned.clone(),
        gap_nodes,
        ref_area,
        gauss_normals,
        neighbours,
        node_facets,
    })
}

/// Weighted nodal gaps and the regularized multipliers `-eps_m * g`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGaps {
    pub nodes: Vec<usize>,
    pub g_tilde: Vec<f64>,
    pub lambda_n: Vec<f64>,
}

/// Projection data at one Gauss point of a slave facet.
struct PointGap {
    hit: RayHit,
    /// `w dA` of the frozen geometry.
    weight: f64,
}

impl SlidingInterface {
    pub fn num_facets(&self) -> usize {
        self.slave_facets.len()
    }

    /// Total area of the frozen surface.
    pub fn area(&self) -> f64 {
        self.ref_area.iter().flatten().sum()
    }

    fn project(&self, f: usize, q: usize, x: &Vec3) -> Result<RayHit, SlidingError> {
        let n = &self.gauss_normals[f][q];
        let accept = |g: usize| {
            let p = &self.aux_facets[g];
            // starting at the point's own parameters makes a coincident
            // surface project to an exactly zero gap
            let start = if g == f { GAUSS[q] } else { [0.0, 0.0] };
            facet::ray_project(p, x, n, start)
                .filter(|h| h.t.abs() <= 0.5 * facet::diameter(p) && h.overshoot() <= MAX_OVERSHOOT)
        };
        // own facet first, then its neighbours, then all facets
        let candidates = std::iter::once(f)
            .chain(self.neighbours[f].iter().copied())
            .chain(0..self.num_facets());
        let mut best: Option<RayHit> = None;
        for g in candidates {
            if let Some(h) = accept(g) {
                if best.map_or(true, |b| h.overshoot() < b.overshoot()) {
                    best = Some(h);
                }
                if h.overshoot() <= INSIDE_TOL {
                    return Ok(h);
                }
            }
        }
        best.ok_or(SlidingError::Projection { facet: f, point: q })
    }

    fn point_gaps(&self, x: &[Vec3]) -> Result<Vec<[PointGap; 4]>, SlidingError> {
        (0..self.num_facets())
            .into_par_iter()
            .map(|f| {
                let xs = self.slave_facets[f].map(|a| x[a]);
                let point = |q: usize| -> Result<PointGap, SlidingError> {
                    let xq = facet::interpolate(&xs, facet::shape(GAUSS[q]));
                    Ok(PointGap {
                        hit: self.project(f, q, &xq)?,
                        weight: self.ref_area[f][q],
                    })
                };
                Ok([point(0)?, point(1)?, point(2)?, point(3)?])
            })
            .collect()
    }

    /// Weighted nodal gaps `g_j = sum N_j g_n dA` at positions `x`.
    pub fn weighted_gaps(&self, x: &[Vec3]) -> Result<WeightedGaps, SlidingError> {
        let pts = self.point_gaps(x)?;
        let g_tilde: Vec<f64> = self
            .node_facets
            .iter()
            .map(|list| {
                list.iter()
                    .map(|&(f, k)| {
                        (0..4)
                            .map(|q| facet::shape(GAUSS[q])[k] * pts[f][q].hit.t * pts[f][q].weight)
                            .sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let lambda_n = g_tilde.iter().map(|g| -self.eps_m * g).collect();
        Ok(WeightedGaps {
            nodes: self.gap_nodes.clone(),
            g_tilde,
            lambda_n,
        })
    }

    /// Penalty potential `0.5 eps_m sum_j g_j^2`.
    pub fn potential(&self, x: &[Vec3]) -> Result<f64, SlidingError> {
        let gaps = self.weighted_gaps(x)?;
        Ok(0.5 * self.eps_m * gaps.g_tilde.iter().map(|g| g * g).sum::<f64>())
    }
}

/// Free function form of [`SlidingInterface::weighted_gaps`].
pub fn weighted_gaps(interface: &SlidingInterface, x: &[Vec3]) -> Result<WeightedGaps, SlidingError> {
    interface.weighted_gaps(x)
}

/// Potential, force and consistent tangent of the sliding penalty at `x`.
pub fn assemble_sliding(
    interface: &SlidingInterface,
    x: &[Vec3],
    dofs: &DofMap,
) -> Result<CondensedSystem, SlidingError> {
    let pts = interface.point_gaps(x)?;
    let eps = interface.eps_m;
    let locals: Vec<(Vec<usize>, f64, DVector<f64>, DMatrix<f64>)> = interface
        .node_facets
        .par_iter()
        .map(|list| {
            let mut nodes: Vec<usize> = Vec::new();
            for &(f, _) in list {
                for &a in &interface.slave_facets[f] {
                    if !nodes.contains(&a) {
                        nodes.push(a);
                    }
                }
            }
            let slot = |a: usize| nodes.iter().position(|&b| b == a).unwrap();
            let m = 3 * nodes.len();
            let mut g = 0.0;
            let mut dg = DVector::zeros(m);
            let mut d2g = DMatrix::zeros(m, m);
            for &(f, k) in list {
                let facet_nodes = interface.slave_facets[f];
                let slots = facet_nodes.map(slot);
                for (q, eta) in GAUSS.iter().enumerate() {
                    let n = facet::shape(*eta);
                    let pg = &pts[f][q];
                    let w = n[k] * pg.weight;
                    g += w * pg.hit.t;
                    for a in 0..4 {
                        let mut seg = dg.fixed_rows_mut::<3>(3 * slots[a]);
                        seg += pg.hit.dt * (w * n[a]);
                        for b in 0..4 {
                            let mut blk = d2g.fixed_view_mut::<3, 3>(3 * slots[a], 3 * slots[b]);
                            blk += pg.hit.d2t * (w * n[a] * n[b]);
                        }
                    }
                }
            }
            let pi = 0.5 * eps * g * g;
            let grad = &dg * (eps * g);
            let mut hess = d2g * (eps * g);
            hess.ger(eps, &dg, &dg, 1.0);
            (nodes, pi, grad, hess)
        })
        .collect();
    let mut sys = CondensedSystem::new(dofs);
    for (nodes, pi, grad, hess) in &locals {
        sys.scatter(dofs, nodes, *pi, grad.as_slice(), |r, c| hess[(r, c)]);
    }
    Ok(sys)
}

/// Geometric distances of slave nodes to the auxiliary surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub max: f64,
    pub mean: f64,
    /// Node attaining `max`.
    pub worst_node: Option<usize>,
}

/// Closest-point distance of every slave node to the auxiliary surface.
pub fn boundary_distance_report(interface: &SlidingInterface, x: &[Vec3]) -> DistanceReport {
    let nodes: Vec<usize> = interface
        .slave_facets
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let boxes: Vec<(Vec3, Vec3)> = interface
        .aux_facets
        .iter()
        .map(|p| p.iter().fold((p[0], p[0]), |(lo, hi), q| (lo.inf(q), hi.sup(q))))
        .collect();
    let dists: Vec<f64> = nodes
        .par_iter()
        .map(|&a| {
            let y = x[a];
            let mut best = f64::INFINITY;
            for (p, (lo, hi)) in interface.aux_facets.iter().zip(&boxes) {
                let outside = (lo - y).sup(&(y - hi)).sup(&Vec3::zeros()).norm();
                if outside < best {
                    best = best.min(facet::closest_distance(p, &y));
                }
            }
            best
        })
        .collect();
    if dists.is_empty() {
        return DistanceReport {
            max: 0.0,
            mean: 0.0,
            worst_node: None,
        };
    }
    let (imax, max) = dists
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
    DistanceReport {
        max,
        mean: dists.iter().sum::<f64>() / dists.len() as f64,
        worst_node: (max > 0.0).then_some(nodes[imax]),
    }
}
