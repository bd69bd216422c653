//! Deterministic generators for the demonstration meshes.
//!
//! All generators produce structured hex grids with logical node sets:
//! `face_xmin` .. `face_zmax` (the six logical faces), `corners` (the eight
//! logical corners), `edges` (nodes on two or more logical faces) and
//! `boundary`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{Mesh, Vec3};

pub const DEFAULT_SEED: u64 = 42;

/// Node index of grid point `(i, j, k)` in a structured grid with `n` cells per axis.
pub fn grid_node(n: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    i + (n[0] + 1) * (j + (n[1] + 1) * k)
}

/// Builds a structured hex grid whose grid point `(i, j, k)` sits at `place(i, j, k)`.
pub fn structured_grid(n: [usize; 3], place: impl Fn(usize, usize, usize) -> Vec3) -> Mesh {
    let [nx, ny, nz] = n;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(place(i, j, k));
            }
        }
    }
    let mut elements = Vec::with_capacity(nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let g = |a: usize, b: usize, c: usize| grid_node(n, i + a, j + b, k + c);
                elements.push([
                    g(0, 0, 0),
                    g(1, 0, 0),
                    g(1, 1, 0),
                    g(0, 1, 0),
                    g(0, 0, 1),
                    g(1, 0, 1),
                    g(1, 1, 1),
                    g(0, 1, 1),
                ]);
            }
        }
    }
    let mut sets: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let a = grid_node(n, i, j, k);
                let on = [
                    ("face_xmin", i == 0),
                    ("face_xmax", i == nx),
                    ("face_ymin", j == 0),
                    ("face_ymax", j == ny),
                    ("face_zmin", k == 0),
                    ("face_zmax", k == nz),
                ];
                let count = on.iter().filter(|f| f.1).count();
                for (name, hit) in on {
                    if hit {
                        sets.entry(name.to_string()).or_default().push(a);
                    }
                }
                if count >= 1 {
                    sets.entry("boundary".into()).or_default().push(a);
                }
                if count >= 2 {
                    sets.entry("edges".into()).or_default().push(a);
                }
                if count == 3 {
                    sets.entry("corners".into()).or_default().push(a);
                }
            }
        }
    }
    let mut mesh = Mesh::from_elements(nodes, elements).expect("structured grid is valid");
    for set in sets.values_mut() {
        set.sort_unstable();
    }
    mesh.node_sets = sets;
    mesh
}

/// Axis-aligned grid of `n` cells with spacing `h`, anchored at the origin.
pub fn regular_grid(n: [usize; 3], h: [f64; 3]) -> Mesh {
    structured_grid(n, |i, j, k| {
        Vec3::new(i as f64 * h[0], j as f64 * h[1], k as f64 * h[2])
    })
}

/// Seeded monotone partition of `[0, 1]` into `n` unequal parts.
///
/// Part sizes are drawn uniformly from `[1 - spread, 1 + spread]` and normalized.
pub fn unequal_divisions(n: usize, spread: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sizes: Vec<f64> = (0..n)
        .map(|_| 1.0 + spread * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let total: f64 = sizes.iter().sum();
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for s in &sizes[..n - 1] {
        acc += s / total;
        out.push(acc);
    }
    out.push(1.0);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortedGridParams {
    pub cells: [usize; 2],
    pub size: f64,
    pub thickness: f64,
    pub spread: f64,
    pub seed: u64,
}

impl Default for DistortedGridParams {
    fn default() -> Self {
        DistortedGridParams {
            cells: [40, 40],
            size: 2.0,
            thickness: 0.05,
            spread: 0.5,
            seed: DEFAULT_SEED,
        }
    }
}

/// Square plate with unequal edge divisions on all four sides.
///
/// Interior points follow the transfinite (Coons) interpolation of the
/// boundary divisions, so grid lines are straight but skewed.
pub fn distorted_grid(p: &DistortedGridParams) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let [nx, ny] = p.cells;
    let bottom = unequal_divisions(nx, p.spread, &mut rng);
    let top = unequal_divisions(nx, p.spread, &mut rng);
    let left = unequal_divisions(ny, p.spread, &mut rng);
    let right = unequal_divisions(ny, p.spread, &mut rng);
    let mut mesh = structured_grid([nx, ny, 1], |i, j, k| {
        let u = i as f64 / nx as f64;
        let v = j as f64 / ny as f64;
        let x = (1.0 - v) * bottom[i] + v * top[i];
        let y = (1.0 - u) * left[j] + u * right[j];
        Vec3::new(p.size * x, p.size * y, k as f64 * p.thickness)
    });
    mesh.metadata = vec![
        "demo=distorted-grid".into(),
        format!(
            "seed={} cells={}x{} size={} thickness={} spread={}",
            p.seed, nx, ny, p.size, p.thickness, p.spread
        ),
    ];
    mesh
}

/// Truncated rectangular pyramid in the first octant meshed with 7x3x2 hexes.
///
/// The faces `x=0`, `y=0` and `z=0` are planar and carry the supports; the
/// opposite side faces taper toward the top.
pub fn pyramid() -> Mesh {
    let n = [7, 3, 2];
    let (a0, b0, a1, b1, h) = (3.5, 1.5, 2.2, 0.9, 1.4);
    let mut mesh = structured_grid(n, |i, j, k| {
        let u = i as f64 / n[0] as f64;
        let v = j as f64 / n[1] as f64;
        let w = k as f64 / n[2] as f64;
        // mildly graded divisions so the elements are not parallelepipeds
        let u = u + 0.06 * (PI * u).sin();
        let v = v - 0.05 * (PI * v).sin();
        Vec3::new(u * (a0 + (a1 - a0) * w), v * (b0 + (b1 - b0) * w), w * h)
    });
    mesh.metadata = vec!["demo=pyramid elements=7x3x2".into()];
    mesh
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShearedBlockParams {
    pub cells: [usize; 3],
    pub size: [f64; 3],
    /// Peak tangential displacement of the top surface `y = size[1]`.
    pub amplitude: f64,
    /// Number of element layers below the top surface affected by the shear.
    pub layers: usize,
}

impl Default for ShearedBlockParams {
    fn default() -> Self {
        ShearedBlockParams {
            cells: [50, 10, 5],
            size: [1.0, 0.25, 0.125],
            amplitude: 0.01,
            layers: 2,
        }
    }
}

/// Regular block with a compact tangential shear profile in the layer below
/// the top surface `y = ymax`.
///
/// The displacement `u_x = A sin^2(pi x) s(y)` is tangent to every face
/// except `x = 0, 1` where it vanishes, so all faces stay planar and only the
/// boundary-layer elements are distorted.
pub fn sheared_block(p: &ShearedBlockParams) -> Mesh {
    let h = [0, 1, 2].map(|d| p.size[d] / p.cells[d] as f64);
    let depth = p.layers as f64 * h[1];
    let mut mesh = regular_grid(p.cells, h);
    for x in &mut mesh.nodes {
        let s = ((x.y - (p.size[1] - depth)) / depth).max(0.0);
        x.x += p.amplitude * (PI * x.x).sin().powi(2) * s * s;
    }
    mesh.metadata = vec![format!(
        "demo=sheared-block cells={}x{}x{} amplitude={} layers={}",
        p.cells[0], p.cells[1], p.cells[2], p.amplitude, p.layers
    )];
    mesh
}

/// Regular 2x2 plate used for the localization demo.
pub fn localized_grid(cells: usize) -> Mesh {
    let h = 2.0 / cells as f64;
    let mut mesh = regular_grid([cells, cells, 1], [h, h, 0.05]);
    mesh.metadata = vec![format!("demo=localized-grid cells={cells}x{cells}")];
    mesh
}

/// Small plate with strongly perturbed interior nodes; a single target
/// increment is not enough to regularize it.
pub fn heavy_distorted_grid(seed: u64) -> Mesh {
    let n = 12;
    let h = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = regular_grid([n, n, 1], [h, h, h]);
    let mut offsets = vec![[0.0; 2]; (n + 1) * (n + 1)];
    for (k, o) in offsets.iter_mut().enumerate() {
        let (i, j) = (k % (n + 1), k / (n + 1));
        if i > 0 && i < n && j > 0 && j < n {
            *o = [0, 1].map(|_| 0.42 * h * (2.0 * rng.random::<f64>() - 1.0));
        }
    }
    for (a, x) in mesh.nodes.iter_mut().enumerate() {
        let o = offsets[a % ((n + 1) * (n + 1))];
        x.x += o[0];
        x.y += o[1];
    }
    mesh.metadata = vec![format!("demo=heavy-distorted seed={seed} cells={n}x{n}x1")];
    mesh
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoName {
    DistortedGrid,
    Pyramid,
    ShearedBlock,
    LocalizedGrid,
    HeavyDistorted,
}

impl DemoName {
    pub const ALL: [DemoName; 5] = [
        DemoName::DistortedGrid,
        DemoName::Pyramid,
        DemoName::ShearedBlock,
        DemoName::LocalizedGrid,
        DemoName::HeavyDistorted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DemoName::DistortedGrid => "distorted-grid",
            DemoName::Pyramid => "pyramid",
            DemoName::ShearedBlock => "sheared-block",
            DemoName::LocalizedGrid => "localized-grid",
            DemoName::HeavyDistorted => "heavy-distorted",
        }
    }

    pub fn generate(self, seed: u64) -> Mesh {
        match self {
            DemoName::DistortedGrid => distorted_grid(&DistortedGridParams {
                seed,
                ..Default::default()
            }),
            DemoName::Pyramid => pyramid(),
            DemoName::ShearedBlock => sheared_block(&ShearedBlockParams::default()),
            DemoName::LocalizedGrid => localized_grid(40),
            DemoName::HeavyDistorted => heavy_distorted_grid(seed),
        }
    }
}

impl fmt::Display for DemoName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DemoName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DemoName::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = DemoName::ALL.iter().map(|d| d.as_str()).collect();
                format!("unknown demo '{s}' (expected one of: {})", names.join(", "))
            })
    }
}
