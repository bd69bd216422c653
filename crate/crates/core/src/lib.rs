//! Hexahedral mesh regularization by minimizing an element distortion
//! potential under boundary-sliding constraints, plus MLS-based field transfer
//! from the old mesh to the refitted one.

pub mod assembly;
pub mod config;
pub mod demo;
pub mod distortion;
pub mod mesh;
pub mod sliding;
pub mod solver;
pub mod transfer;

pub use mesh::{Mesh, MeshError, Vec3};
