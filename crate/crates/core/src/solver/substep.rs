//! Load-factor control for target incrementation.

use serde::{Deserialize, Serialize};

/// Substep policy: bisection on failure, doubling after fast successes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubstepPolicy {
    /// When false a failed increment ends the solve.
    pub enabled: bool,
    /// Newton iteration count at or below which a substep counts as fast.
    pub fast_iters: usize,
    /// Consecutive fast substeps needed before the step doubles.
    pub fast_count: usize,
    /// Step underflow: the step may shrink to `h0 / 2^max_halvings`.
    pub max_halvings: u32,
}

impl Default for SubstepPolicy {
    fn default() -> Self {
        SubstepPolicy {
            enabled: true,
            fast_iters: 5,
            fast_count: 2,
            max_halvings: 10,
        }
    }
}

/// Outcome of a controller request after a failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retry {
    /// Try again from `alpha` with the reduced step.
    Continue,
    /// The step fell below the underflow limit.
    Underflow,
    /// Substepping is disabled.
    Disabled,
}

/// Tracks the accepted load factor and the current step.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstepController {
    policy: SubstepPolicy,
    h0: f64,
    step: f64,
    alpha: f64,
    fast_streak: usize,
}

impl SubstepController {
    /// Uniform initial schedule of `n` increments.
    pub fn new(n: usize, policy: SubstepPolicy) -> Self {
        let h0 = 1.0 / n.max(1) as f64;
        SubstepController {
            policy,
            h0,
            step: h0,
            alpha: 0.0,
            fast_streak: 0,
        }
    }

    /// Last accepted load factor.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn finished(&self) -> bool {
        self.alpha >= 1.0
    }

    /// Load factor of the next attempt. Steps landing within a small fraction of
    /// the initial step from 1 snap to 1, so uniform schedules end exactly there.
    pub fn next_alpha(&self) -> f64 {
        let a = self.alpha + self.step;
        if a >= 1.0 - 1e-9 * self.h0 {
            1.0
        } else {
            a
        }
    }

    /// Records a converged increment at `next_alpha()` taking `iters` iterations.
    pub fn accept(&mut self, iters: usize) {
        self.alpha = self.next_alpha();
        if iters <= self.policy.fast_iters {
            self.fast_streak += 1;
        } else {
            self.fast_streak = 0;
        }
        if self.fast_streak >= self.policy.fast_count && self.step < self.h0 {
            self.step = (2.0 * self.step).min(self.h0);
            self.fast_streak = 0;
        }
    }

    /// Records a failed increment and bisects the step.
    pub fn reject(&mut self) -> Retry {
        if !self.policy.enabled {
            return Retry::Disabled;
        }
        self.fast_streak = 0;
        self.step *= 0.5;
        if self.step < self.h0 / 2f64.powi(self.policy.max_halvings as i32) {
            Retry::Underflow
        } else {
            Retry::Continue
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(n: usize, outcomes: &[Option<usize>]) -> (Vec<f64>, SubstepController) {
        let mut c = SubstepController::new(n, SubstepPolicy::default());
        let mut seq = Vec::new();
        for o in outcomes {
            match o {
                Some(it) => {
                    c.accept(*it);
                    seq.push(c.alpha());
                }
                None => assert_eq!(c.reject(), Retry::Continue),
            }
        }
        (seq, c)
    }

    #[test]
    fn uniform_schedule_when_all_converge() {
        let (seq, c) = run(4, &[Some(3); 4]);
        assert_eq!(seq, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(c.finished());
        let (seq, _) = run(20, &[Some(1); 20]);
        assert_eq!(seq.len(), 20);
        assert_eq!(*seq.last().unwrap(), 1.0);
        assert!(seq.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn failure_bisects_then_schedule_resumes() {
        let (seq, c) = run(4, &[None, Some(8), Some(8)]);
        assert_eq!(seq, vec![0.125, 0.25]);
        assert_eq!(c.step(), 0.125);
        assert_eq!(c.next_alpha(), 0.375);
    }

    #[test]
    fn fast_successes_double_the_step_up_to_h0() {
        let (seq, c) = run(4, &[None, None, Some(2), Some(2)]);
        assert_eq!(seq, vec![0.0625, 0.125]);
        assert_eq!(c.step(), 0.125);
        let (_, c) = run(4, &[None, Some(2), Some(2), Some(2), Some(2)]);
        assert_eq!(c.step(), 0.25);
    }

    #[test]
    fn step_is_capped_by_remaining_distance() {
        let (_, mut c) = run(1, &[None, Some(2), Some(2)]);
        assert_eq!(c.alpha(), 1.0);
        assert!(c.finished());
        let mut d = SubstepController::new(3, SubstepPolicy::default());
        d.accept(9);
        d.accept(9);
        assert_eq!(d.next_alpha(), 1.0);
        c.accept(1);
        assert_eq!(c.alpha(), 1.0);
    }

    #[test]
    fn underflow_and_disabled() {
        let mut c = SubstepController::new(1, SubstepPolicy::default());
        for _ in 0..10 {
            assert_eq!(c.reject(), Retry::Continue);
        }
        assert_eq!(c.reject(), Retry::Underflow);
        let policy = SubstepPolicy {
            enabled: false,
            ..SubstepPolicy::default()
        };
        assert_eq!(SubstepController::new(2, policy).reject(), Retry::Disabled);
    }
}
