//! Degree-of-freedom bookkeeping and sparse scatter-add shared by the
//! distortion and sliding assemblies.
//!
//! Global dof `3 * node + component`. Fixed (Dirichlet) dofs are condensed
//! out of the matrix at scatter time; the full-length residual is kept so
//! reactions on fixed dofs remain available.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    map: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    pub fn all_free(n_nodes: usize) -> Self {
        Self::from_fixed(&vec![false; 3 * n_nodes])
    }

    /// `fixed[dof]` marks Dirichlet dofs.
    pub fn from_fixed(fixed: &[bool]) -> Self {
        let mut n_free = 0;
        let map = fixed
            .iter()
            .map(|&f| {
                (!f).then(|| {
                    n_free += 1;
                    n_free - 1
                })
            })
            .collect();
        DofMap { map, n_free }
    }

    pub fn n_dofs(&self) -> usize {
        self.map.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn free_index(&self, dof: usize) -> Option<usize> {
        self.map[dof]
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.map[dof].is_none()
    }

    /// `(global dof, free index)` for every free dof, in global order.
    pub fn free_dofs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.map
            .iter()
            .enumerate()
            .filter_map(|(g, f)| f.map(|f| (g, f)))
    }

    /// Gathers the free entries of a full-length vector.
    pub fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n_free);
        for (g, f) in self.free_dofs() {
            out[f] = full[g];
        }
        out
    }
}

/// Assembled potential, gradient and condensed tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedSystem {
    pub potential: f64,
    /// Gradient over all dofs; entries at fixed dofs are the reactions.
    pub full_residual: DVector<f64>,
    /// Gradient restricted to free dofs.
    pub residual: DVector<f64>,
    /// Tangent entries `(row, col, value)` over free dofs; duplicates add up.
    pub triplets: Vec<(usize, usize, f64)>,
}

impl CondensedSystem {
    pub fn new(dofs: &DofMap) -> Self {
        CondensedSystem {
            potential: 0.0,
            full_residual: DVector::zeros(dofs.n_dofs()),
            residual: DVector::zeros(dofs.n_free()),
            triplets: Vec::new(),
        }
    }

    /// Adds a local block acting on `nodes` (3 dofs each).
    pub fn scatter(
        &mut self,
        dofs: &DofMap,
        nodes: &[usize],
        potential: f64,
        grad: &[f64],
        hess: impl Fn(usize, usize) -> f64,
    ) {
        self.potential += potential;
        let global: Vec<usize> = nodes
            .iter()
            .flat_map(|&a| (0..3).map(move |c| 3 * a + c))
            .collect();
        for (r, &g) in global.iter().enumerate() {
            self.full_residual[g] += grad[r];
            let Some(fr) = dofs.free_index(g) else {
                continue;
            };
            self.residual[fr] += grad[r];
            for (c, &h) in global.iter().enumerate() {
                if let Some(fc) = dofs.free_index(h) {
                    let v = hess(r, c);
                    if v != 0.0 {
                        self.triplets.push((fr, fc, v));
                    }
                }
            }
        }
    }

    pub fn add(&mut self, other: &CondensedSystem) {
        self.potential += other.potential;
        self.full_residual += &other.full_residual;
        self.residual += &other.residual;
        self.triplets.extend_from_slice(&other.triplets);
    }

    /// Reactions `(dof, value)` at the fixed dofs.
    pub fn reactions(&self, dofs: &DofMap) -> Vec<(usize, f64)> {
        (0..dofs.n_dofs())
            .filter(|&g| dofs.is_fixed(g))
            .map(|g| (g, self.full_residual[g]))
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.residual.len();
        let mut k = DMatrix::zeros(n, n);
        for &(r, c, v) in &self.triplets {
            k[(r, c)] += v;
        }
        k
    }
}

/// Adds free-dof displacements to reference positions.
pub fn displaced(reference: &[nalgebra::Vector3<f64>], dofs: &DofMap, d: &DVector<f64>) -> Vec<nalgebra::Vector3<f64>> {
    let mut x = reference.to_vec();
    for (g, f) in dofs.free_dofs() {
        x[g / 3][g % 3] += d[f];
    }
    x
}
