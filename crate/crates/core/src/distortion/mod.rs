//! Element distortion potential: edge-length, equal-edge and angle
//! constraints enforced by penalties, with analytic residual and tangent.

pub mod constraints;
pub mod potential;
pub mod targets;

use thiserror::Error;

pub use constraints::{
    constraint_angle, constraint_avg_edge, constraint_equal_edges, ConstraintEval, ElementMatrix,
    ElementVector,
};
pub use potential::{
    assemble_distortion, distortion_potential, element_potential, frame_contribution, frame_potential,
    length_guard,
};
pub use targets::{
    average_target_lengths, increment_targets, measured_targets, ElementTargets, LengthGoal,
    LocalizationCenter, LocalizationField, PenaltyParams, TargetShape,
};

#[derive(Debug, Error)]
pub enum DistortionError {
    /// `direction` is 1-based; 0 means an angle edge at a node.
    #[error("{}: degenerate edge in direction {direction} (length below the singularity guard)", element_label(.element))]
    Degenerate {
        element: Option<usize>,
        direction: usize,
    },
    #[error("mesh has no elements")]
    EmptyMesh,
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

fn element_label(e: &Option<usize>) -> String {
    match e {
        Some(e) => format!("element {e}"),
        None => "element".into(),
    }
}

impl DistortionError {
    /// Attaches an element id to a degenerate-edge error.
    pub fn at(self, e: usize) -> Self {
        match self {
            DistortionError::Degenerate { direction, .. } => DistortionError::Degenerate {
                element: Some(e),
                direction,
            },
            other => other,
        }
    }
}
