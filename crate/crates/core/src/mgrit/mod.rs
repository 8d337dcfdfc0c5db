//! FAS multigrid reduction in time.
//!
//! One call of [`Mgrit::cycle`] is the fixed-point map `u_{k+1} = H(u_k, rho)`:
//! a V- or F-cycle with F, FC or FCF relaxation over a hierarchy of time
//! grids, injection between levels and a sequential solve on the coarsest
//! level. Coarse levels rediscretize the same stepper with the larger step.
//! With `record` enabled the cycle writes a [`CycleTape`] from which
//! [`Mgrit::transpose_cycle`] applies the exact transpose of `H`.

mod hierarchy;
mod record;
mod solver;
mod tape;

pub use hierarchy::{TemporalHierarchy, TimeLevel};
pub use record::{estimate_contraction, ContractionEstimate, ConvergenceRecord, IterationRecord, STAGNATION_THRESHOLD};
pub use solver::{CostSnapshot, Mgrit};
pub use tape::CycleTape;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::space_time::SpaceTimeState;
use crate::stepper::Stepper;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CycleType {
    V,
    F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    F,
    FC,
    FCF,
}

/// How a coarse level propagates between its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseOperator {
    /// The fine stepper with step size `m^level * dt`.
    Rediscretized,
    /// `m^level` composed fine steps: the ideal coarse operator, which turns
    /// the two-level method into exact block cyclic reduction.
    Composed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgritConfig {
    pub m: usize,
    pub max_levels: usize,
    pub cycle: CycleType,
    pub relaxation: Relaxation,
    /// Halting tolerance on `|u_{k+1} - u_k|_2` relative to its first value.
    pub halting_tol: f64,
    pub max_iters: usize,
    pub workers: usize,
    pub coarse_operator: CoarseOperator,
}

impl Default for MgritConfig {
    fn default() -> Self {
        Self {
            m: 4,
            max_levels: 3,
            cycle: CycleType::V,
            relaxation: Relaxation::FCF,
            halting_tol: 1e-9,
            max_iters: 100,
            workers: 1,
            coarse_operator: CoarseOperator::Rediscretized,
        }
    }
}

impl MgritConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!("m must be at least 2, got {}", self.m)));
        }
        if self.max_levels < 1 {
            return Err(Error::InvalidConfig("max_levels must be at least 1".into()));
        }
        if self.workers < 1 {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        if !(self.halting_tol > 0.0) {
            return Err(Error::InvalidConfig("halting_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Sequential forward sweep `u^i = step(u^{i-1})`, `i = 1..n_steps`.
pub fn serial_solve<T: Real, S: Stepper<T> + ?Sized>(
    stepper: &S,
    design: &[T],
    dt: T,
    n_steps: usize,
) -> Result<SpaceTimeState<T>> {
    let mut points = Vec::with_capacity(n_steps + 1);
    points.push(stepper.initial_state());
    for i in 1..=n_steps {
        let next = stepper.step(&points[i - 1], design, dt)?;
        points.push(next);
    }
    Ok(SpaceTimeState::from_points(points))
}
