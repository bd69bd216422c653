//! JSON refit configuration and its translation into a [`RefitProblem`].

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distortion::{
    average_target_lengths, DistortionError, LengthGoal, LocalizationField, PenaltyParams, TargetShape,
};
use crate::mesh::{Mesh, MeshError};
use crate::sliding::{build_interface, SlidingError};
use crate::solver::{RefitProblem, SolverControls, SolverError, SubstepPolicy};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error(transparent)]
    Sliding(#[from] SlidingError),
}

impl From<SolverError> for ConfigError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Distortion(d) => ConfigError::Distortion(d),
            SolverError::Sliding(s) => ConfigError::Sliding(s),
            other => ConfigError::Invalid(other.to_string()),
        }
    }
}

/// One length for all three directions or one per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lengths {
    Same(f64),
    PerDirection([f64; 3]),
}

impl Lengths {
    pub fn to_array(self) -> [f64; 3] {
        match self {
            Lengths::Same(l) => [l; 3],
            Lengths::PerDirection(l) => l,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TargetsConfig {
    /// Constant lengths; when omitted, the per-direction mesh averages. With
    /// `equal`, the mean of the three averages is used in every direction.
    Uniform {
        #[serde(default)]
        length: Option<Lengths>,
        #[serde(default)]
        equal: bool,
    },
    /// `l_r(X) = l_r0 f(X)`, optionally scaling the penalties by `f` as well.
    Localized {
        l_r0: Lengths,
        #[serde(flatten)]
        field: LocalizationField,
        #[serde(default)]
        scale_penalties: bool,
    },
}

impl Default for TargetsConfig {
    fn default() -> Self {
        TargetsConfig::Uniform {
            length: None,
            equal: false,
        }
    }
}

/// Fixes selected displacement components of a node or node set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedComponents {
    #[serde(default)]
    pub node: Option<usize>,
    #[serde(default)]
    pub set: Option<String>,
    /// Any of `x`, `y`, `z`.
    pub components: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefitConfig {
    /// Weight of both edge constraint families.
    #[serde(rename = "eps_E", default = "default_eps")]
    pub eps_e: f64,
    /// Overrides `eps_E` for the averaged-edge length constraint.
    #[serde(rename = "eps_E_bar", default)]
    pub eps_e_bar: Option<f64>,
    /// Overrides `eps_E` for the equal-edge constraint.
    #[serde(rename = "eps_E_hat", default)]
    pub eps_e_hat: Option<f64>,
    #[serde(rename = "eps_A", default = "default_eps")]
    pub eps_a: f64,
    #[serde(default = "default_eps_m")]
    pub eps_m: f64,
    #[serde(default)]
    pub targets: TargetsConfig,
    #[serde(default = "default_theta")]
    pub theta_r: f64,
    #[serde(default = "default_max_increments")]
    pub max_increments: usize,
    /// Size `1/N` of the first increment; defaults to `max_increments`.
    #[serde(default)]
    pub initial_increments: Option<usize>,
    #[serde(default = "default_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_iters")]
    pub max_newton_iters: usize,
    /// Node sets whose boundary facets form one sliding interface each.
    #[serde(default)]
    pub sliding: Vec<String>,
    /// Node sets held fixed and excluded from gap equations.
    #[serde(default)]
    pub pinned: Vec<String>,
    #[serde(default)]
    pub fixed: Vec<FixedComponents>,
    #[serde(default)]
    pub line_search: bool,
    /// Largest angle between facets meeting at an unpinned sliding node.
    #[serde(default = "default_feature_angle")]
    pub feature_angle_deg: f64,
    #[serde(default)]
    pub substepping: SubstepPolicy,
}

fn default_eps() -> f64 {
    1e-2
}
fn default_eps_m() -> f64 {
    2e8
}
fn default_theta() -> f64 {
    FRAC_PI_2
}
fn default_max_increments() -> usize {
    20
}
fn default_tol() -> f64 {
    1e-5
}
fn default_newton_iters() -> usize {
    25
}
fn default_feature_angle() -> f64 {
    45.0
}

impl Default for RefitConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all keys have defaults")
    }
}

impl RefitConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RefitConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn penalties(&self) -> PenaltyParams {
        PenaltyParams {
            eps_bar: self.eps_e_bar.unwrap_or(self.eps_e),
            eps_hat: self.eps_e_hat.unwrap_or(self.eps_e),
            eps_a: self.eps_a,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.penalties().validate()?;
        if !(self.eps_m >= 0.0 && self.eps_m.is_finite()) {
            return Err(ConfigError::Invalid(format!("eps_m = {} must be finite and nonnegative", self.eps_m)));
        }
        if !(self.theta_r > 0.0 && self.theta_r < std::f64::consts::PI) {
            return Err(ConfigError::Invalid(format!("theta_r = {} must lie in (0, pi)", self.theta_r)));
        }
        if self.max_increments == 0 || self.initial_increments == Some(0) {
            return Err(ConfigError::Invalid("increment counts must be positive".into()));
        }
        if !(self.newton_tol > 0.0) || self.max_newton_iters == 0 {
            return Err(ConfigError::Invalid("newton_tol and max_newton_iters must be positive".into()));
        }
        if !(self.feature_angle_deg > 0.0 && self.feature_angle_deg <= 180.0) {
            return Err(ConfigError::Invalid("feature_angle_deg must lie in (0, 180]".into()));
        }
        match &self.targets {
            TargetsConfig::Uniform { length: Some(l), .. } => check_lengths(*l)?,
            TargetsConfig::Localized { l_r0, field, .. } => {
                check_lengths(*l_r0)?;
                field.validate()?;
            }
            TargetsConfig::Uniform { length: None, .. } => {}
        }
        for f in &self.fixed {
            if f.node.is_some() == f.set.is_some() {
                return Err(ConfigError::Invalid("fixed entries need exactly one of node or set".into()));
            }
            parse_components(&f.components)?;
        }
        Ok(())
    }

    /// Goal shape on `mesh` (averages are measured there).
    pub fn target_shape(&self, mesh: &Mesh) -> Result<TargetShape, ConfigError> {
        let length = match &self.targets {
            TargetsConfig::Uniform { length, equal } => {
                let mut l = match length {
                    Some(l) => l.to_array(),
                    None => average_target_lengths(mesh)?,
                };
                if *equal {
                    l = [l.iter().sum::<f64>() / 3.0; 3];
                }
                LengthGoal::Uniform(l)
            }
            TargetsConfig::Localized { l_r0, field, .. } => LengthGoal::Localized {
                l_r0: l_r0.to_array(),
                field: field.clone(),
            },
        };
        Ok(TargetShape {
            length,
            theta: [self.theta_r; 3],
        })
    }

    pub fn controls(&self) -> SolverControls {
        SolverControls {
            newton_tol: self.newton_tol,
            max_newton_iters: self.max_newton_iters,
            max_increments: self.max_increments,
            initial_increments: self.initial_increments.unwrap_or(self.max_increments),
            line_search: self.line_search,
            substep: self.substepping,
        }
    }

    /// Builds the refit problem on `mesh`, the updated reference configuration.
    pub fn problem(&self, mesh: &Mesh) -> Result<RefitProblem, ConfigError> {
        self.validate()?;
        let shape = self.target_shape(mesh)?;
        let mut problem = RefitProblem::new(mesh.clone(), &shape, self.penalties())?;
        if let TargetsConfig::Localized {
            field,
            scale_penalties: true,
            ..
        } = &self.targets
        {
            for (e, p) in problem.penalties.iter_mut().enumerate() {
                *p = p.scaled(field.f(&mesh.element_centroid(e)));
            }
        }
        let mut pinned = BTreeSet::new();
        for name in &self.pinned {
            pinned.extend(mesh.node_set(name)?);
        }
        for name in &self.sliding {
            let facets = mesh.facets_in_set(name)?;
            if facets.is_empty() {
                return Err(ConfigError::Invalid(format!("node set {name} contains no boundary facet")));
            }
            problem
                .interfaces
                .push(build_interface(mesh, &facets, &pinned, self.eps_m, self.feature_angle_deg)?);
        }
        problem.pin_nodes(pinned.iter().copied());
        for f in &self.fixed {
            let comps = parse_components(&f.components)?;
            let nodes = match (&f.node, &f.set) {
                (Some(a), _) if *a < mesh.num_nodes() => vec![*a],
                (Some(a), _) => return Err(ConfigError::Invalid(format!("fixed node {a} out of range"))),
                (None, Some(s)) => mesh.node_set(s)?,
                (None, None) => unreachable!("validated"),
            };
            for a in nodes {
                problem.fix_components(a, &comps);
            }
        }
        problem.controls = self.controls();
        problem.validate()?;
        Ok(problem)
    }
}

fn check_lengths(l: Lengths) -> Result<(), ConfigError> {
    if l.to_array().iter().all(|&v| v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("target lengths {:?} must be positive", l.to_array())))
    }
}

fn parse_components(s: &str) -> Result<Vec<usize>, ConfigError> {
    let comps: Result<Vec<usize>, ConfigError> = s
        .chars()
        .map(|c| match c.to_ascii_lowercase() {
            'x' => Ok(0),
            'y' => Ok(1),
            'z' => Ok(2),
            other => Err(ConfigError::Invalid(format!("unknown component '{other}'"))),
        })
        .collect();
    let comps = comps?;
    if comps.is_empty() {
        return Err(ConfigError::Invalid("fixed entry lists no components".into()));
    }
    Ok(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::regular_grid;
    use crate::distortion::LocalizationCenter;

    #[test]
    fn defaults() {
        let c = RefitConfig::default();
        assert_eq!(c.penalties(), PenaltyParams::new(1e-2, 1e-2));
        assert_eq!(c.eps_m, 2e8);
        assert_eq!(c.theta_r, FRAC_PI_2);
        assert_eq!(c.max_increments, 20);
        assert_eq!(c.newton_tol, 1e-5);
        assert_eq!(c.controls().initial_increments, 20);
        assert!(c.substepping.enabled);
    }

    #[test]
    fn zero_penalties_rejected() {
        let err = RefitConfig::from_json(r#"{"eps_E": 0, "eps_A": 0}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Distortion(DistortionError::InvalidPenalty(_))), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(matches!(RefitConfig::from_json(r#"{"eps_e": 1}"#), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn localized_targets_parse() {
        let c = RefitConfig::from_json(
            r#"{"targets": {"type": "localized", "l_r0": 0.025, "variant": "point",
                "center": [1, 1, 0], "c": 0.1}}"#,
        )
        .unwrap();
        let TargetsConfig::Localized { l_r0, field, .. } = &c.targets else {
            panic!("wrong variant");
        };
        assert_eq!(l_r0.to_array(), [0.025; 3]);
        assert_eq!(field.center, LocalizationCenter::Point { center: [1.0, 1.0, 0.0] });
        assert_eq!(field.amplitude, 1.0);
        let cyl = RefitConfig::from_json(
            r#"{"targets": {"type": "localized", "l_r0": [1, 2, 3], "variant": "cylindrical",
                "radius": 2, "height": 0.5, "c": 3, "amplitude": -0.5}}"#,
        )
        .unwrap();
        let back = RefitConfig::from_json(&cyl.to_json()).unwrap();
        assert_eq!(back, cyl);
    }

    #[test]
    fn builds_problem_with_sliding_and_pins() {
        let mesh = regular_grid([2, 2, 1], [1.0; 3]);
        let c = RefitConfig::from_json(
            r#"{"sliding": ["face_zmax", "face_xmin"], "pinned": ["corners"], "eps_m": 1e4,
                "fixed": [{"node": 4, "components": "xz"}], "targets": {"type": "uniform", "equal": true}}"#,
        )
        .unwrap();
        let p = c.problem(&mesh).unwrap();
        assert_eq!(p.interfaces.len(), 2);
        assert_eq!(p.pinned_nodes().len(), 8);
        assert!(p.fixed[12] && !p.fixed[13] && p.fixed[14]);
        assert_eq!(p.goal[0].length, [1.0; 3]);
    }

    #[test]
    fn unknown_set_and_bad_components() {
        let mesh = regular_grid([1, 1, 1], [1.0; 3]);
        let c = RefitConfig::from_json(r#"{"sliding": ["nope"]}"#).unwrap();
        assert!(matches!(c.problem(&mesh), Err(ConfigError::Mesh(_))));
        assert!(RefitConfig::from_json(r#"{"fixed": [{"node": 0, "components": "w"}]}"#).is_err());
    }
}
