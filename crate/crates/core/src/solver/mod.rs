//! Newton minimization of the total refit potential (distortion plus sliding)
//! with target incrementation and substepping.

pub mod linear;
pub mod report;
pub mod substep;

use std::collections::BTreeSet;
use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{displaced, CondensedSystem, DofMap};
use crate::distortion::{
    assemble_distortion, distortion_potential, increment_targets, length_guard, measured_targets,
    DistortionError, ElementTargets, PenaltyParams, TargetShape,
};
use crate::mesh::{ElementEdgeFrame, Mesh, Vec3};
use crate::sliding::{assemble_sliding, SlidingError, SlidingInterface};

pub use report::{IncrementRecord, NewtonReport};
pub use substep::{Retry, SubstepController, SubstepPolicy};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("refit did not converge: {reason} ({report})")]
    NonConvergence {
        reason: String,
        /// Last converged positions.
        positions: Vec<Vec3>,
        report: NewtonReport,
    },
    #[error("tangent is singular: {modes} rigid mode(s) are unresisted; pin or fix more nodes")]
    Singular { modes: usize },
    #[error("invalid refit problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Distortion(#[from] DistortionError),
    #[error(transparent)]
    Sliding(#[from] SlidingError),
}

/// Convergence and incrementation controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Cap on attempted increments, including rejected ones.
    pub max_increments: usize,
    /// Size `1/N` of the initial uniform schedule.
    pub initial_increments: usize,
    /// Halve Newton steps (up to 8 times) that increase the total potential.
    pub line_search: bool,
    pub substep: SubstepPolicy,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            newton_tol: 1e-5,
            max_newton_iters: 25,
            max_increments: 20,
            initial_increments: 20,
            line_search: false,
            substep: SubstepPolicy::default(),
        }
    }
}

/// Everything `refit` needs. The mesh is the updated reference configuration.
#[derive(Debug, Clone)]
pub struct RefitProblem {
    pub mesh: Mesh,
    /// Goal targets per element.
    pub goal: Vec<ElementTargets>,
    /// Penalties per element.
    pub penalties: Vec<PenaltyParams>,
    pub interfaces: Vec<SlidingInterface>,
    /// Dirichlet flag per dof (`3 * node + component`).
    pub fixed: Vec<bool>,
    pub controls: SolverControls,
}

impl RefitProblem {
    /// Problem with uniform penalties, no sliding and nothing fixed.
    pub fn new(mesh: Mesh, goal: &TargetShape, penalties: PenaltyParams) -> Result<Self, SolverError> {
        penalties.validate()?;
        let goal = goal.element_targets(&mesh)?;
        let n = mesh.num_elements();
        let fixed = vec![false; 3 * mesh.num_nodes()];
        Ok(RefitProblem {
            mesh,
            goal,
            penalties: vec![penalties; n],
            interfaces: Vec::new(),
            fixed,
            controls: SolverControls::default(),
        })
    }

    /// Fixes all components of `nodes`.
    pub fn pin_nodes(&mut self, nodes: impl IntoIterator<Item = usize>) {
        for a in nodes {
            self.fixed[3 * a..3 * a + 3].fill(true);
        }
    }

    /// Fixes the listed components (0, 1, 2) of `node`.
    pub fn fix_components(&mut self, node: usize, components: &[usize]) {
        for &c in components {
            self.fixed[3 * node + c] = true;
        }
    }

    /// Nodes with all three components fixed.
    pub fn pinned_nodes(&self) -> BTreeSet<usize> {
        (0..self.mesh.num_nodes())
            .filter(|&a| self.fixed[3 * a..3 * a + 3].iter().all(|&f| f))
            .collect()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let m = &self.mesh;
        if m.num_elements() == 0 {
            return Err(DistortionError::EmptyMesh.into());
        }
        if self.goal.len() != m.num_elements() || self.penalties.len() != m.num_elements() {
            return Err(SolverError::Invalid("targets and penalties need one entry per element".into()));
        }
        if self.fixed.len() != 3 * m.num_nodes() {
            return Err(SolverError::Invalid("Dirichlet flags need one entry per dof".into()));
        }
        for t in &self.goal {
            t.validate()?;
        }
        for p in &self.penalties {
            p.validate()?;
        }
        let c = &self.controls;
        if !(c.newton_tol > 0.0) || c.max_increments == 0 || c.initial_increments == 0 {
            return Err(SolverError::Invalid(
                "newton_tol, max_increments and initial_increments must be positive".into(),
            ));
        }
        for iface in &self.interfaces {
            for &a in &iface.gap_nodes {
                if (0..3).any(|k| self.fixed[3 * a + k]) {
                    return Err(SolverError::Invalid(format!(
                        "node {a} carries a sliding gap but has fixed components; add it to the pinned set of the interface"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Condensed dof map of the problem's Dirichlet set.
pub fn apply_dirichlet(problem: &RefitProblem) -> DofMap {
    DofMap::from_fixed(&problem.fixed)
}

/// Converged positions and history.
#[derive(Debug, Clone)]
pub struct RefitResult {
    pub positions: Vec<Vec3>,
    pub report: NewtonReport,
}

impl RefitResult {
    /// Mesh with the refitted coordinates.
    pub fn mesh(&self, problem: &RefitProblem) -> Mesh {
        let mut m = problem.mesh.clone();
        m.nodes = self.positions.clone();
        m
    }
}

/// Number of elements with a non-positive corner Jacobian.
pub fn count_inverted(mesh: &Mesh, x: &[Vec3]) -> usize {
    mesh.elements
        .iter()
        .filter(|conn| {
            let frame = ElementEdgeFrame::from_coords(&conn.map(|a| x[a]));
            frame.corner_jacobians().iter().any(|&j| j <= 0.0)
        })
        .count()
}

struct Assembler<'a> {
    problem: &'a RefitProblem,
    dofs: DofMap,
    guard: f64,
}

impl Assembler<'_> {
    fn system(&self, x: &[Vec3], targets: &[ElementTargets]) -> Result<CondensedSystem, SolverError> {
        let p = self.problem;
        let mut sys = assemble_distortion(&p.mesh, x, targets, &p.penalties, &self.dofs, self.guard)?;
        for iface in &p.interfaces {
            sys.add(&assemble_sliding(iface, x, &self.dofs)?);
        }
        Ok(sys)
    }

    fn potential(&self, x: &[Vec3], targets: &[ElementTargets]) -> Result<f64, SolverError> {
        let p = self.problem;
        let mut pi = distortion_potential(&p.mesh, x, targets, &p.penalties, self.guard)?;
        for iface in &p.interfaces {
            pi += iface.potential(x)?;
        }
        Ok(pi)
    }
}

/// Outcome of one Newton solve at fixed targets.
struct NewtonOutcome {
    d: DVector<f64>,
    iters: usize,
    res_norm: f64,
    inc_norm: f64,
    converged: bool,
    reason: String,
}

fn newton(
    asm: &Assembler,
    d0: &DVector<f64>,
    targets: &[ElementTargets],
) -> NewtonOutcome {
    let reference = &asm.problem.mesh.nodes;
    let c = &asm.problem.controls;
    let tol = c.newton_tol;
    let mut d = d0.clone();
    let mut f0 = 0.0;
    let mut inc_norm = 0.0;
    let fail = |d: DVector<f64>, iters, res_norm, inc_norm, reason: String| NewtonOutcome {
        d,
        iters,
        res_norm,
        inc_norm,
        converged: false,
        reason,
    };
    for it in 0..=c.max_newton_iters {
        let x = displaced(reference, &asm.dofs, &d);
        let sys = match asm.system(&x, targets) {
            Ok(s) => s,
            Err(e) => return fail(d, it, f64::NAN, inc_norm, e.to_string()),
        };
        let res = sys.residual.norm();
        if !res.is_finite() {
            return fail(d, it, res, inc_norm, "residual is not finite".into());
        }
        if it == 0 {
            f0 = res;
        } else if res <= tol * f0.max(1.0) && inc_norm <= tol * d.norm().max(1.0) {
            return NewtonOutcome {
                d,
                iters: it,
                res_norm: res,
                inc_norm,
                converged: true,
                reason: String::new(),
            };
        }
        if it == c.max_newton_iters {
            return fail(d, it, res, inc_norm, format!("{it} Newton iterations exhausted"));
        }
        if res > 1e12 * f0.max(1.0) {
            return fail(d, it, res, inc_norm, "Newton iterates diverge".into());
        }
        let Some(delta) = linear::solve(&sys, &(-&sys.residual)) else {
            return fail(d, it, res, inc_norm, "linear solve failed".into());
        };
        // a configuration already at the stationary point needs no update
        if it == 0 && res <= tol && delta.norm() <= tol * d.norm().max(1.0) {
            return NewtonOutcome {
                d,
                iters: 0,
                res_norm: res,
                inc_norm: delta.norm(),
                converged: true,
                reason: String::new(),
            };
        }
        let mut step = delta;
        if c.line_search {
            let pi0 = sys.potential;
            for _ in 0..8 {
                let trial = displaced(reference, &asm.dofs, &(&d + &step));
                match asm.potential(&trial, targets) {
                    Ok(pi) if pi <= pi0 => break,
                    _ => step *= 0.5,
                }
            }
        }
        inc_norm = step.norm();
        d += step;
    }
    unreachable!("loop returns on its last iteration")
}

/// Solves the refit problem by Newton's method with target incrementation.
pub fn refit(problem: &RefitProblem) -> Result<RefitResult, SolverError> {
    problem.validate()?;
    let start_time = Instant::now();
    let mesh = &problem.mesh;
    let asm = Assembler {
        problem,
        dofs: apply_dirichlet(problem),
        guard: length_guard(mesh),
    };
    let start = measured_targets(mesh)?;
    // sliding is the only term resisting rigid motion; at the reference all gaps vanish
    let mut resisting: Option<CondensedSystem> = None;
    for iface in &problem.interfaces {
        let s = assemble_sliding(iface, &mesh.nodes, &asm.dofs)?;
        match resisting.as_mut() {
            Some(r) => r.add(&s),
            None => resisting = Some(s),
        }
    }
    let modes = linear::unconstrained_rigid_modes(resisting.as_ref(), &asm.dofs, &mesh.nodes);
    if modes > 0 {
        return Err(SolverError::Singular { modes });
    }
    let inverted0 = count_inverted(mesh, &mesh.nodes);
    let c = &problem.controls;
    let mut ctrl = SubstepController::new(c.initial_increments, c.substep);
    let mut d = DVector::zeros(asm.dofs.n_free());
    let mut report = NewtonReport::default();
    let nonconv = |reason: String, d: &DVector<f64>, mut report: NewtonReport| {
        report.wall_seconds = start_time.elapsed().as_secs_f64();
        SolverError::NonConvergence {
            reason,
            positions: displaced(&mesh.nodes, &asm.dofs, d),
            report,
        }
    };
    while !ctrl.finished() {
        if report.n_attempts() >= c.max_increments {
            let reason = format!("{} increments used before reaching alpha = 1", c.max_increments);
            return Err(nonconv(reason, &d, report));
        }
        let t0 = Instant::now();
        let alpha = ctrl.next_alpha();
        let targets = increment_targets(&start, &problem.goal, alpha);
        let mut out = newton(&asm, &d, &targets);
        if out.converged {
            let x = displaced(&mesh.nodes, &asm.dofs, &out.d);
            let inverted = count_inverted(mesh, &x);
            if inverted > inverted0 {
                out.converged = false;
                out.reason = format!("{inverted} inverted elements (input had {inverted0})");
            }
        }
        report.increments.push(IncrementRecord {
            alpha,
            iters: out.iters,
            res_norm: out.res_norm,
            inc_norm: out.inc_norm,
            seconds: t0.elapsed().as_secs_f64(),
            accepted: out.converged,
        });
        if out.converged {
            log::debug!("alpha = {alpha:.6}: converged in {} iterations", out.iters);
            d = out.d;
            ctrl.accept(out.iters);
            continue;
        }
        log::debug!("alpha = {alpha:.6}: {}", out.reason);
        match ctrl.reject() {
            Retry::Continue => {}
            Retry::Underflow => {
                let reason = format!("substep underflow after: {}", out.reason);
                return Err(nonconv(reason, &d, report));
            }
            Retry::Disabled => return Err(nonconv(out.reason, &d, report)),
        }
    }
    report.converged = true;
    report.wall_seconds = start_time.elapsed().as_secs_f64();
    Ok(RefitResult {
        positions: displaced(&mesh.nodes, &asm.dofs, &d),
        report,
    })
}
