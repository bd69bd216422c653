//! Per-increment convergence history.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// One attempted increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementRecord {
    pub alpha: f64,
    pub iters: usize,
    pub res_norm: f64,
    pub inc_norm: f64,
    pub seconds: f64,
    /// False for attempts rejected by the substep controller.
    pub accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub increments: Vec<IncrementRecord>,
    pub converged: bool,
    pub wall_seconds: f64,
}

impl NewtonReport {
    /// Accepted increments.
    pub fn n_inc(&self) -> usize {
        self.increments.iter().filter(|r| r.accepted).count()
    }

    /// All attempts, including rejected ones.
    pub fn n_attempts(&self) -> usize {
        self.increments.len()
    }

    pub fn total_iterations(&self) -> usize {
        self.increments.iter().map(|r| r.iters).sum()
    }

    /// Accepted load factors in order.
    pub fn alphas(&self) -> Vec<f64> {
        self.increments.iter().filter(|r| r.accepted).map(|r| r.alpha).collect()
    }

    /// CSV with columns `alpha,iters,res_norm,inc_norm,seconds,accepted`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.increments {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Vec<IncrementRecord>, csv::Error> {
        csv::Reader::from_reader(r).deserialize().collect()
    }
}

impl std::fmt::Display for NewtonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: n_inc = {} ({} attempts), {} Newton iterations, {:.3} s",
            if self.converged { "converged" } else { "not converged" },
            self.n_inc(),
            self.n_attempts(),
            self.total_iterations(),
            self.wall_seconds
        )
    }
}
