//! Uniform-grid binning for fixed-radius neighbour search.

use std::collections::HashMap;

use crate::mesh::Vec3;

#[derive(Debug, Clone)]
pub struct PointGrid {
    points: Vec<Vec3>,
    cell: f64,
    bins: HashMap<[i64; 3], Vec<usize>>,
}

impl PointGrid {
    /// Bins `points` into cubes of edge `cell`.
    pub fn new(points: &[Vec3], cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut bins: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (j, x) in points.iter().enumerate() {
            bins.entry(key(x, cell)).or_default().push(j);
        }
        PointGrid {
            points: points.to_vec(),
            cell,
            bins,
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    /// Indices of points within distance `r` of `x`, ascending.
    pub fn within(&self, x: &Vec3, r: f64) -> Vec<usize> {
        let lo = key(&x.add_scalar(-r), self.cell);
        let hi = key(&x.add_scalar(r), self.cell);
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    if let Some(b) = self.bins.get(&[i, j, k]) {
                        out.extend(b.iter().copied().filter(|&p| (self.points[p] - x).norm() <= r));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn key(x: &Vec3, cell: f64) -> [i64; 3] {
    [0, 1, 2].map(|d| (x[d] / cell).floor() as i64)
}
