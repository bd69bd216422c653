use super::topology::{node_edge, ANGLE_PAIRS, EDGES};
use super::{Mesh, MeshError, Vec3};

/// The 12 edge vectors of a hex8 element grouped by parameter direction,
/// plus the per-direction averages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementEdgeFrame {
    /// `edges[i][j]`: direction `i`, counting index `j`.
    pub edges: [[Vec3; 4]; 3],
    /// `mean[i]` is the arithmetic mean of `edges[i][..]`.
    pub mean: [Vec3; 3],
}

impl ElementEdgeFrame {
    pub fn from_coords(x: &[Vec3; 8]) -> Self {
        let edges: [[Vec3; 4]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| {
                let (tail, head) = EDGES[i][j];
                x[head] - x[tail]
            }));
        let mean = std::array::from_fn(|i| edges[i].iter().sum::<Vec3>() / 4.0);
        ElementEdgeFrame { edges, mean }
    }

    /// Edge vector of direction `dir` at `node`, pointing away from the node.
    pub fn outward(&self, node: usize, dir: usize) -> Vec3 {
        let (j, sign) = node_edge(node, dir);
        self.edges[dir][j] * sign
    }

    /// Included angles (radians) at `node` for the pairs (1,2), (1,3), (2,3).
    ///
    /// Returns `None` when one of the edges has zero length.
    pub fn node_angles(&self, node: usize) -> Option<[f64; 3]> {
        let e: [Vec3; 3] = std::array::from_fn(|d| self.outward(node, d));
        let norms = e.map(|v| v.norm());
        if norms.iter().any(|&n| !(n > 0.0)) {
            return None;
        }
        Some(ANGLE_PAIRS.map(|(m, n)| {
            let c = e[m].dot(&e[n]) / (norms[m] * norms[n]);
            c.clamp(-1.0, 1.0).acos()
        }))
    }

    /// Signed corner volumes `det[v1, v2, v3]` using the direction-oriented
    /// edges at each node. All positive for a valid (non-inverted) element.
    pub fn corner_jacobians(&self) -> [f64; 8] {
        std::array::from_fn(|node| {
            let v: [Vec3; 3] = std::array::from_fn(|d| self.edges[d][node_edge(node, d).0]);
            v[0].cross(&v[1]).dot(&v[2])
        })
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// Edge frame of element `e`.
pub fn element_edge_frame(mesh: &Mesh, e: usize) -> Result<ElementEdgeFrame, MeshError> {
    if e >= mesh.num_elements() {
        return Err(MeshError::ElementIndex(e));
    }
    Ok(ElementEdgeFrame::from_coords(&mesh.element_coords(e)))
}
