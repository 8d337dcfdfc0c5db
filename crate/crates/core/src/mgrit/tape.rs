//! Record of one primal cycle, replayed backwards by the transpose sweep.

use crate::scalar::Real;

/// Inputs of every fine step behind one level propagation (one entry for a
/// rediscretized step, `m^level` entries for a composed coarse step).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StepRecord<T> {
    pub dt: T,
    pub inputs: Vec<Vec<T>>,
}

/// F-relaxation of one coarse interval: step `k` maps point `start + k` to
/// `start + k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IntervalRecord<T> {
    pub start: usize,
    pub steps: Vec<StepRecord<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TapePhase<T> {
    FRelax { level: usize, intervals: Vec<IntervalRecord<T>> },
    /// `(c, step)`: C-point `c` overwritten from point `c - 1`.
    CRelax { level: usize, points: Vec<(usize, StepRecord<T>)> },
    /// Injection to `level + 1` plus the FAS right-hand side at coarse point
    /// `j`, which evaluates the fine step from `m j - 1` and the coarse step
    /// from fine point `m (j - 1)`.
    Restrict { level: usize, points: Vec<(usize, StepRecord<T>, StepRecord<T>)> },
    /// Sequential solve: `steps[j - 1]` produces point `j`.
    CoarseSolve { level: usize, steps: Vec<StepRecord<T>> },
    /// C-points of `level` corrected by the change of `level + 1`.
    Correct { level: usize },
}

/// Primitive actions of one MGRIT cycle, in execution order, with a snapshot
/// of every step input.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTape<T> {
    pub(crate) phases: Vec<TapePhase<T>>,
    pub(crate) n_steps: usize,
    pub(crate) dim: usize,
    pub(crate) design: Vec<T>,
}

impl<T: Real> CycleTape<T> {
    pub(crate) fn new(n_steps: usize, dim: usize, design: &[T]) -> Self {
        Self { phases: Vec::new(), n_steps, dim, design: design.to_vec() }
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn design(&self) -> &[T] {
        &self.design
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    /// Total number of fine step applications recorded.
    pub fn n_recorded_steps(&self) -> usize {
        let count = |r: &StepRecord<T>| r.inputs.len();
        self.phases
            .iter()
            .map(|p| match p {
                TapePhase::FRelax { intervals, .. } => intervals.iter().flat_map(|i| &i.steps).map(count).sum(),
                TapePhase::CRelax { points, .. } => points.iter().map(|(_, r)| count(r)).sum(),
                TapePhase::Restrict { points, .. } => points.iter().map(|(_, a, b)| count(a) + count(b)).sum(),
                TapePhase::CoarseSolve { steps, .. } => steps.iter().map(count).sum(),
                TapePhase::Correct { .. } => 0,
            })
            .sum()
    }

    pub fn clear(&mut self) {
        self.phases.clear();
    }
}
