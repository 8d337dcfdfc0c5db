//! The non-intrusive boundary between an existing time-stepping code and the
//! time-parallel solvers.
//!
//! An application plugs in by implementing [`Stepper`] (one forward step and
//! its transposed linearization) and [`Objective`] (the time-averaged cost and
//! its partial derivatives). States are flat slices of length
//! [`Stepper::dim`]; vector arithmetic on them lives in [`crate::vector`].

use crate::error::Result;
use crate::scalar::Real;

/// Transposed linearization of one step, evaluated at a recorded input state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAdjoint<T> {
    /// `(d step / d u_prev)^T * bar_next`
    pub state: Vec<T>,
    /// `(d step / d design)^T * bar_next`
    pub design: Vec<T>,
}

/// One-step time integrator `u_next = step(u_prev, design, dt)`.
pub trait Stepper<T: Real>: Sync {
    /// Number of unknowns per time point.
    fn dim(&self) -> usize;

    /// Number of design parameters.
    fn design_dim(&self) -> usize;

    /// Fixed initial condition `u^0`.
    fn initial_state(&self) -> Vec<T>;

    fn step(&self, u_prev: &[T], design: &[T], dt: T) -> Result<Vec<T>>;

    /// `u_prev` must be the same input the primal step consumed.
    fn step_adjoint(&self, u_prev: &[T], design: &[T], dt: T, bar_next: &[T]) -> Result<StepAdjoint<T>>;
}

/// Objective `J(u^1..u^N, design)` defined on fine-grid states.
///
/// `states` always excludes the initial condition: `states[i - 1]` is `u^i`.
pub trait Objective<T: Real>: Sync {
    fn value(&self, states: &[Vec<T>], design: &[T]) -> Result<T>;

    /// Partial derivatives with respect to every `u^i`, same layout as `states`.
    fn grad_state(&self, states: &[Vec<T>], design: &[T]) -> Vec<Vec<T>>;

    /// Explicit partial derivative with respect to the design.
    fn grad_design(&self, states: &[Vec<T>], design: &[T]) -> Vec<T>;
}
