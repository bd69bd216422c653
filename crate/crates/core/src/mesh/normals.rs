use std::collections::BTreeMap;

use super::{Mesh, MeshError, Vec3};

/// Unit normal of a bilinear quad at its parametric center.
pub fn facet_center_normal(p: &[Vec3; 4]) -> Vec3 {
    let t1 = -p[0] + p[1] + p[2] - p[3];
    let t2 = -p[0] - p[1] + p[2] + p[3];
    t1.cross(&t2).normalize()
}

/// Averaged unit normal for every node touched by the given boundary facets.
///
/// Each node's normal is the normalized sum of the center normals of its
/// adjacent facets. A vanishing sum is reported as [`MeshError::ZeroNormal`].
pub fn extract_boundary_frame(
    mesh: &Mesh,
    facets: &[usize],
) -> Result<BTreeMap<usize, Vec3>, MeshError> {
    let mut sums: BTreeMap<usize, Vec3> = BTreeMap::new();
    for &f in facets {
        let facet = mesh
            .boundary_facets
            .get(f)
            .ok_or_else(|| MeshError::Invalid(format!("facet index {f} out of range")))?;
        let n = facet_center_normal(&facet.map(|a| mesh.nodes[a]));
        for &a in facet {
            *sums.entry(a).or_insert_with(Vec3::zeros) += n;
        }
    }
    let mut normals = BTreeMap::new();
    for (a, s) in sums {
        let len = s.norm();
        if !(len > 1e-10) {
            return Err(MeshError::ZeroNormal { node: a });
        }
        normals.insert(a, s / len);
    }
    Ok(normals)
}
