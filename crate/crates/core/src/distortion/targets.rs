//! Target shapes: uniform and localized edge lengths, target angles, and the
//! blending from measured to goal shapes used by target incrementation.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::DistortionError;
use crate::mesh::{ElementEdgeFrame, Mesh, Vec3};

/// Per-element targets: lengths per direction, angles per node and pair, and
/// squared edge to mean edge length ratios (1 for equal edges).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementTargets {
    pub length: [f64; 3],
    pub angle: [[f64; 3]; 8],
    pub ratio: [[f64; 4]; 3],
}

impl ElementTargets {
    pub fn uniform(length: [f64; 3], theta: [f64; 3]) -> Self {
        ElementTargets {
            length,
            angle: [theta; 8],
            ratio: [[1.0; 4]; 3],
        }
    }

    pub fn validate(&self) -> Result<(), DistortionError> {
        if let Some(l) = self.length.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(DistortionError::InvalidTarget(format!(
                "target length {l} must be positive"
            )));
        }
        if let Some(r) = self.ratio.iter().flatten().find(|&&r| !(r > 0.0 && r.is_finite())) {
            return Err(DistortionError::InvalidTarget(format!(
                "target edge ratio {r} must be positive"
            )));
        }
        let bad = self.angle.iter().flatten().find(|&&t| !(t > 0.0 && t < std::f64::consts::PI));
        if let Some(t) = bad {
            return Err(DistortionError::InvalidTarget(format!(
                "target angle {t} must lie in (0, pi)"
            )));
        }
        Ok(())
    }
}

/// Penalty weights of the three constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub eps_bar: f64,
    pub eps_hat: f64,
    pub eps_a: f64,
}

impl PenaltyParams {
    /// Single edge weight shared by both edge families.
    pub fn new(eps_e: f64, eps_a: f64) -> Self {
        PenaltyParams {
            eps_bar: eps_e,
            eps_hat: eps_e,
            eps_a,
        }
    }

    pub fn validate(&self) -> Result<(), DistortionError> {
        let all = [self.eps_bar, self.eps_hat, self.eps_a];
        if all.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return Err(DistortionError::InvalidPenalty(format!(
                "penalties must be finite and nonnegative, got {all:?}"
            )));
        }
        if all.iter().all(|&e| e == 0.0) {
            return Err(DistortionError::InvalidPenalty(
                "at least one distortion penalty must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Self {
        PenaltyParams {
            eps_bar: self.eps_bar * s,
            eps_hat: self.eps_hat * s,
            eps_a: self.eps_a * s,
        }
    }
}

impl Default for PenaltyParams {
    fn default() -> Self {
        PenaltyParams::new(1e-2, 1e-2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum LocalizationCenter {
    /// Distance to a point.
    Point { center: [f64; 3] },
    /// Distance to the circle of radius `radius` around the z axis at height `height`.
    Cylindrical { radius: f64, height: f64 },
}

/// `f(X) = 1 + amplitude * exp(-c d(X)^2)`.
///
/// With `amplitude = 1` the field equals 2 at the center and decays to 1; a
/// negative amplitude in `(-1, 0)` makes `f` smaller at the center instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationField {
    #[serde(flatten)]
    pub center: LocalizationCenter,
    pub c: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl LocalizationField {
    pub fn point(center: Vec3, c: f64) -> Self {
        LocalizationField {
            center: LocalizationCenter::Point {
                center: center.into(),
            },
            c,
            amplitude: 1.0,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<(), DistortionError> {
        if !(self.c >= 0.0) {
            return Err(DistortionError::InvalidTarget(format!(
                "decay rate c = {} must be nonnegative",
                self.c
            )));
        }
        if !(self.amplitude > -1.0 && self.amplitude.is_finite()) {
            return Err(DistortionError::InvalidTarget(format!(
                "amplitude {} must exceed -1 to keep f positive",
                self.amplitude
            )));
        }
        Ok(())
    }

    pub fn distance_sq(&self, x: &Vec3) -> f64 {
        match self.center {
            LocalizationCenter::Point { center } => (x - Vec3::from(center)).norm_squared(),
            LocalizationCenter::Cylindrical { radius, height } => {
                let r = x.x.hypot(x.y);
                (r - radius).powi(2) + (x.z - height).powi(2)
            }
        }
    }

    pub fn f(&self, x: &Vec3) -> f64 {
        1.0 + self.amplitude * (-self.c * self.distance_sq(x)).exp()
    }

    /// `l_r(X) = l_r0 * f(X)`.
    pub fn length(&self, l_r0: f64, x: &Vec3) -> f64 {
        l_r0 * self.f(x)
    }
}

/// Goal edge lengths: constant or scaled by a localization field.
#[derive(Debug, Clone, PartialEq)]
pub enum LengthGoal {
    Uniform([f64; 3]),
    Localized {
        l_r0: [f64; 3],
        field: LocalizationField,
    },
}

/// Goal shape applied to every element.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetShape {
    pub length: LengthGoal,
    /// Target angles for the direction pairs (1,2), (1,3), (2,3).
    pub theta: [f64; 3],
}

impl TargetShape {
    pub fn uniform(length: [f64; 3]) -> Self {
        TargetShape {
            length: LengthGoal::Uniform(length),
            theta: [FRAC_PI_2; 3],
        }
    }

    /// Per-element targets, with spatial fields evaluated at element centroids.
    pub fn element_targets(&self, mesh: &Mesh) -> Result<Vec<ElementTargets>, DistortionError> {
        if let LengthGoal::Localized { field, .. } = &self.length {
            field.validate()?;
        }
        (0..mesh.num_elements())
            .map(|e| {
                let length = match &self.length {
                    LengthGoal::Uniform(l) => *l,
                    LengthGoal::Localized { l_r0, field } => {
                        let f = field.f(&mesh.element_centroid(e));
                        l_r0.map(|l| l * f)
                    }
                };
                let t = ElementTargets::uniform(length, self.theta);
                t.validate()?;
                Ok(t)
            })
            .collect()
    }
}

/// `(1/N_e) sum_e |v_bar[i]|` per direction.
pub fn average_target_lengths(mesh: &Mesh) -> Result<[f64; 3], DistortionError> {
    if mesh.num_elements() == 0 {
        return Err(DistortionError::EmptyMesh);
    }
    let mut sum = [0.0; 3];
    for e in 0..mesh.num_elements() {
        let frame = ElementEdgeFrame::from_coords(&mesh.element_coords(e));
        for i in 0..3 {
            sum[i] += frame.mean[i].norm();
        }
    }
    Ok(sum.map(|s| s / mesh.num_elements() as f64))
}

/// Element lengths `|v_bar[i]|`, node angles and edge ratios measured on `mesh`.
pub fn measured_targets(mesh: &Mesh) -> Result<Vec<ElementTargets>, DistortionError> {
    (0..mesh.num_elements())
        .map(|e| {
            let frame = ElementEdgeFrame::from_coords(&mesh.element_coords(e));
            let length = frame.mean.map(|v| v.norm());
            let ratio = std::array::from_fn(|i| {
                let bb = frame.mean[i].norm_squared();
                frame.edges[i].map(|v| v.norm_squared() / bb)
            });
            let mut angle = [[0.0; 3]; 8];
            for (node, a) in angle.iter_mut().enumerate() {
                *a = frame.node_angles(node).ok_or(DistortionError::Degenerate {
                    element: Some(e),
                    direction: 0,
                })?;
            }
            Ok(ElementTargets { length, angle, ratio })
        })
        .collect()
}

/// Linear blend `start + alpha (goal - start)` of every target.
pub fn increment_targets(
    start: &[ElementTargets],
    goal: &[ElementTargets],
    alpha: f64,
) -> Vec<ElementTargets> {
    assert_eq!(start.len(), goal.len());
    let blend = |a: f64, b: f64| {
        if alpha == 1.0 {
            b
        } else {
            a + alpha * (b - a)
        }
    };
    start
        .iter()
        .zip(goal)
        .map(|(s, g)| ElementTargets {
            length: std::array::from_fn(|i| blend(s.length[i], g.length[i])),
            angle: std::array::from_fn(|n| std::array::from_fn(|p| blend(s.angle[n][p], g.angle[n][p]))),
            ratio: std::array::from_fn(|i| std::array::from_fn(|j| blend(s.ratio[i][j], g.ratio[i][j]))),
        })
        .collect()
}
