//! Fixed hex8 topology tables.
//!
//! Node ordering follows the usual lexicographic hexahedron convention
//! (same as VTK cell type 12):
//!
//! ```text
//!        7-----------6
//!       /|          /|        zeta
//!      4-----------5 |         |  eta
//!      | |         | |         | /
//!      | 3---------|-2         |/
//!      |/          |/          +---- xi
//!      0-----------1
//! ```
//!
//! Edge vectors are grouped by the parameter direction they follow. Every
//! edge points in the positive parameter direction (tail -> head).

/// Parametric corner coordinates of the 8 nodes, each component in {0, 1}.
pub const NODE_PARAM: [[u8; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// `EDGES[i][j] = (tail, head)` for direction `i` and counting index `j`.
pub const EDGES: [[(usize, usize); 4]; 3] = [
    [(0, 1), (3, 2), (4, 5), (7, 6)],
    [(0, 3), (1, 2), (4, 7), (5, 6)],
    [(0, 4), (1, 5), (2, 6), (3, 7)],
];

/// Direction pairs entering the angle constraints, in the order (1,2), (1,3), (2,3).
pub const ANGLE_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Outward-oriented quad faces. Corner order gives an outward normal by the
/// right-hand rule.
pub const FACES: [[usize; 4]; 6] = [
    [0, 3, 2, 1],
    [4, 5, 6, 7],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 4, 7, 3],
    [1, 2, 6, 5],
];

/// The edge of direction `dir` that touches `node`, as `(j, sign)`.
///
/// `sign` is `+1.0` when `node` is the tail of the edge, so that
/// `sign * v[dir][j]` points away from the node.
pub const fn node_edge(node: usize, dir: usize) -> (usize, f64) {
    let mut j = 0;
    while j < 4 {
        let (tail, head) = EDGES[dir][j];
        if tail == node {
            return (j, 1.0);
        }
        if head == node {
            return (j, -1.0);
        }
        j += 1;
    }
    panic!("hex8 edge table is inconsistent")
}
