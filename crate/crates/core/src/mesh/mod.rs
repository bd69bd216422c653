//! Hexahedral mesh data model, edge frames, quality metrics, and file I/O.

pub mod frame;
pub mod io;
pub mod normals;
pub mod quality;
pub mod region;
pub mod topology;

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use thiserror::Error;

pub use frame::ElementEdgeFrame;
pub use io::{load_mesh, save_mesh, MeshFormat};
pub use normals::extract_boundary_frame;
pub use quality::{element_skewness, quality_report, QualityReport, QualitySummary, Skewness};
pub use region::Region;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid mesh: {0}")]
    Invalid(String),
    #[error("node {node}: averaged boundary normal vanishes (adjacent facets cancel); pin this node")]
    ZeroNormal { node: usize },
    #[error("element index {0} out of range")]
    ElementIndex(usize),
    #[error("unknown node set '{0}'")]
    UnknownNodeSet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A hex8 mesh.
///
/// Elements are accepted even when inverted or collapsed; the quality report
/// flags them. Only index consistency is enforced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub nodes: Vec<Vec3>,
    pub elements: Vec<[usize; 8]>,
    /// Outward-oriented quad4 boundary facets.
    pub boundary_facets: Vec<[usize; 4]>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// Free-form header lines (stored as `#` comments in the native format).
    pub metadata: Vec<String>,
}

impl Mesh {
    /// Builds a mesh and checks all index invariants.
    pub fn new(
        nodes: Vec<Vec3>,
        elements: Vec<[usize; 8]>,
        boundary_facets: Vec<[usize; 4]>,
        node_sets: BTreeMap<String, Vec<usize>>,
    ) -> Result<Self, MeshError> {
        let mesh = Mesh {
            nodes,
            elements,
            boundary_facets,
            node_sets,
            metadata: Vec::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Builds a mesh whose boundary facets are extracted from the element faces.
    pub fn from_elements(nodes: Vec<Vec3>, elements: Vec<[usize; 8]>) -> Result<Self, MeshError> {
        let mut mesh = Mesh {
            nodes,
            elements,
            ..Default::default()
        };
        mesh.validate()?;
        mesh.boundary_facets = mesh.extract_boundary_facets();
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let n = self.nodes.len();
        for (i, p) in self.nodes.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(MeshError::Invalid(format!("node {i} has non-finite coordinates")));
            }
        }
        let mut used = vec![false; n];
        for (e, conn) in self.elements.iter().enumerate() {
            for (k, &a) in conn.iter().enumerate() {
                if a >= n {
                    return Err(MeshError::Invalid(format!(
                        "element {e} references node {a} (mesh has {n} nodes)"
                    )));
                }
                if conn[..k].contains(&a) {
                    return Err(MeshError::Invalid(format!(
                        "element {e} repeats node {a}"
                    )));
                }
                used[a] = true;
            }
        }
        for (f, facet) in self.boundary_facets.iter().enumerate() {
            for &a in facet {
                if a >= n {
                    return Err(MeshError::Invalid(format!(
                        "facet {f} references node {a} (mesh has {n} nodes)"
                    )));
                }
                if !used[a] {
                    return Err(MeshError::Invalid(format!(
                        "facet {f} references node {a} which belongs to no element"
                    )));
                }
            }
        }
        for (name, set) in &self.node_sets {
            if let Some(&a) = set.iter().find(|&&a| a >= n) {
                return Err(MeshError::Invalid(format!(
                    "node set '{name}' references node {a} (mesh has {n} nodes)"
                )));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> [Vec3; 8] {
        let conn = &self.elements[e];
        std::array::from_fn(|k| self.nodes[conn[k]])
    }

    pub fn element_centroid(&self, e: usize) -> Vec3 {
        self.elements[e]
            .iter()
            .fold(Vec3::zeros(), |acc, &a| acc + self.nodes[a])
            / 8.0
    }

    /// Diagonal of the axis-aligned bounding box.
    pub fn diameter(&self) -> f64 {
        let Some(first) = self.nodes.first() else {
            return 0.0;
        };
        let (lo, hi) = self
            .nodes
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }

    /// Faces referenced by exactly one element, oriented outward.
    pub fn extract_boundary_facets(&self) -> Vec<[usize; 4]> {
        let mut seen: HashMap<[usize; 4], (usize, [usize; 4])> = HashMap::new();
        let mut order = Vec::new();
        for conn in &self.elements {
            for face in topology::FACES {
                let facet = face.map(|k| conn[k]);
                let mut key = facet;
                key.sort_unstable();
                match seen.get_mut(&key) {
                    Some(entry) => entry.0 += 1,
                    None => {
                        seen.insert(key, (1, facet));
                        order.push(key);
                    }
                }
            }
        }
        order
            .into_iter()
            .filter_map(|key| {
                let (count, facet) = seen[&key];
                (count == 1).then_some(facet)
            })
            .collect()
    }

    /// Nodes of a named set. The pseudo-name `*` selects every node.
    pub fn node_set(&self, name: &str) -> Result<Vec<usize>, MeshError> {
        if name == "*" {
            return Ok((0..self.nodes.len()).collect());
        }
        self.node_sets
            .get(name)
            .cloned()
            .ok_or_else(|| MeshError::UnknownNodeSet(name.to_string()))
    }

    /// Indices of boundary facets whose four nodes all lie in the named set.
    pub fn facets_in_set(&self, name: &str) -> Result<Vec<usize>, MeshError> {
        let mut member = vec![false; self.nodes.len()];
        for a in self.node_set(name)? {
            member[a] = true;
        }
        Ok(self
            .boundary_facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.iter().all(|&a| member[a]))
            .map(|(i, _)| i)
            .collect())
    }

    /// Nodes referenced by at least one boundary facet, sorted.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.nodes.len()];
        for f in &self.boundary_facets {
            for &a in f {
                on[a] = true;
            }
        }
        (0..on.len()).filter(|&a| on[a]).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn unit_cube() -> Mesh {
        let nodes = topology::NODE_PARAM
            .iter()
            .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect();
        Mesh::from_elements(nodes, vec![[0, 1, 2, 3, 4, 5, 6, 7]]).unwrap()
    }

    #[test]
    fn unit_cube_has_six_outward_facets() {
        let mesh = unit_cube();
        assert_eq!(mesh.boundary_facets.len(), 6);
        let c = mesh.element_centroid(0);
        for f in &mesh.boundary_facets {
            let p: Vec<Vec3> = f.iter().map(|&a| mesh.nodes[a]).collect();
            let n = (p[1] - p[0]).cross(&(p[2] - p[1]));
            let center = p.iter().sum::<Vec3>() / 4.0;
            assert!(n.dot(&(center - c)) > 0.0);
        }
    }

    #[test]
    fn dangling_index_is_rejected() {
        let mut mesh = unit_cube();
        mesh.elements[0][3] = 99;
        let err = mesh.validate().unwrap_err().to_string();
        assert!(err.contains("element 0") && err.contains("99"), "{err}");
    }

    #[test]
    fn repeated_node_is_rejected() {
        let mut mesh = unit_cube();
        mesh.elements[0][3] = 0;
        assert!(mesh.validate().is_err());
    }

    #[test]
    fn shared_face_is_interior() {
        let mut nodes: Vec<Vec3> = unit_cube().nodes;
        let extra: Vec<Vec3> = [1, 2, 5, 6].iter().map(|&k| nodes[k] + Vec3::x()).collect();
        nodes.extend(extra);
        // new nodes: 8 <- 1+x, 9 <- 2+x, 10 <- 5+x, 11 <- 6+x
        let elements = vec![[0, 1, 2, 3, 4, 5, 6, 7], [1, 8, 9, 2, 5, 10, 11, 6]];
        let mesh = Mesh::from_elements(nodes, elements).unwrap();
        assert_eq!(mesh.boundary_facets.len(), 10);
    }
}
