//! Adjoint MGRIT: transposed cycles, the piggyback iteration and reduced
//! gradients.
//!
//! The adjoint of one cycle is obtained by sweeping its [`CycleTape`]
//! backwards, replacing every recorded step by the stepper's transposed
//! step at the snapshotted input. Objective derivatives enter on the fine
//! level only.

use std::time::Instant;

use crate::error::{DriverError, Error, Result};
use crate::mgrit::{ConvergenceRecord, CycleTape, IterationRecord, Mgrit};
use crate::scalar::Real;
use crate::space_time::{AdjointState, SpaceTimeState};
use crate::stepper::{Objective, Stepper};
use crate::vector;

/// Total derivative of the objective with respect to the design.
pub type ReducedGradient<T> = Vec<T>;

/// Result of one piggyback iteration.
#[derive(Debug, Clone)]
pub struct PiggybackStep<T> {
    pub state: SpaceTimeState<T>,
    pub adjoint: AdjointState<T>,
    /// `grad_rho J(u_k) + (d_rho H(u_k))^T bar u_k`
    pub gradient: ReducedGradient<T>,
    /// `J(u_k, rho)`
    pub objective: T,
    /// `|u_{k+1} - u_k|_2`
    pub state_residual: T,
    /// `|bar u_{k+1} - bar u_k|_2`
    pub adjoint_residual: T,
}

#[derive(Debug, Clone)]
pub struct PiggybackSolution<T> {
    pub state: SpaceTimeState<T>,
    pub adjoint: AdjointState<T>,
    pub gradient: ReducedGradient<T>,
    pub objective: T,
    pub record: ConvergenceRecord,
}

/// Couples an MGRIT solver with an objective.
pub struct AdjointMgrit<'s, 'a, T: Real, S: Stepper<T>, J: Objective<T>> {
    mgrit: &'s Mgrit<'a, T, S>,
    objective: &'s J,
}

impl<'s, 'a, T: Real, S: Stepper<T>, J: Objective<T>> AdjointMgrit<'s, 'a, T, S, J> {
    pub fn new(mgrit: &'s Mgrit<'a, T, S>, objective: &'s J) -> Self {
        Self { mgrit, objective }
    }

    pub fn mgrit(&self) -> &'s Mgrit<'a, T, S> {
        self.mgrit
    }

    pub fn objective(&self) -> &'s J {
        self.objective
    }

    fn objective_gradient(&self, u: &SpaceTimeState<T>, design: &[T]) -> AdjointState<T> {
        let mut points = Vec::with_capacity(u.n_steps() + 1);
        points.push(vec![T::zero(); u.dim()]);
        points.extend(self.objective.grad_state(u.states(), design));
        SpaceTimeState::from_points(points)
    }

    /// `bar u_new = grad_u J(u) + (d_u H)^T bar u` and the design part
    /// `(d_rho H)^T bar u`, from the tape of the cycle applied at `u`.
    pub fn adjoint_cycle(
        &self,
        tape: &CycleTape<T>,
        adjoint: &AdjointState<T>,
        u: &SpaceTimeState<T>,
        design: &[T],
    ) -> Result<(AdjointState<T>, Vec<T>)> {
        if u.n_steps() != tape.n_steps() || u.dim() != tape.dim() {
            return Err(Error::TapeMismatch("state shape differs from the tape".into()));
        }
        if tape.design() != design {
            return Err(Error::TapeMismatch("tape was recorded at a different design".into()));
        }
        let (mut out, design_part) = self.mgrit.transpose_cycle(tape, adjoint)?;
        let grad = self.objective_gradient(u, design);
        for (o, g) in out.points_mut().iter_mut().zip(grad.points()).skip(1) {
            vector::add_assign(o, g);
        }
        Ok((out, design_part))
    }

    /// One piggyback update: `u' = H(u)`, `bar u' = grad_u J(u) + (d_u H(u))^T bar u`,
    /// both linearized at the pre-update state `u`.
    pub fn piggyback_iterate(&self, u: &SpaceTimeState<T>, adjoint: &AdjointState<T>, design: &[T]) -> Result<PiggybackStep<T>> {
        let (next, tape) = self.mgrit.cycle_taped(u, design)?;
        let (adjoint_next, design_part) = self.adjoint_cycle(&tape, adjoint, u, design)?;
        drop(tape);
        let mut gradient = self.objective.grad_design(u.states(), design);
        vector::add_assign(&mut gradient, &design_part);
        let objective = self.objective.value(u.states(), design)?;
        Ok(PiggybackStep {
            state_residual: next.diff_norm(u),
            adjoint_residual: adjoint_next.diff_norm(adjoint),
            state: next,
            adjoint: adjoint_next,
            gradient,
            objective,
        })
    }

    /// Piggyback iteration until both residuals drop below `tol` times their
    /// first value. Starts from `start`, or from the broadcast initial
    /// condition and a zero adjoint.
    pub fn piggyback_solve(
        &self,
        design: &[T],
        tol: f64,
        max_iters: usize,
        start: Option<(SpaceTimeState<T>, AdjointState<T>)>,
    ) -> std::result::Result<PiggybackSolution<T>, DriverError<PiggybackSolution<T>>> {
        self.piggyback_solve_scaled(design, tol, max_iters, start, None)
    }

    /// [`Self::piggyback_solve`] with the residuals measured relative to
    /// `reference` (state, adjoint) instead of the first iteration; used for
    /// warm starts, whose first residuals say nothing about the solution scale.
    pub fn piggyback_solve_scaled(
        &self,
        design: &[T],
        tol: f64,
        max_iters: usize,
        start: Option<(SpaceTimeState<T>, AdjointState<T>)>,
        reference: Option<(f64, f64)>,
    ) -> std::result::Result<PiggybackSolution<T>, DriverError<PiggybackSolution<T>>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")).into());
        }
        let (mut u, mut adjoint) = start.unwrap_or_else(|| {
            let u = self.mgrit.initial_guess();
            let a = SpaceTimeState::zeros(u.dim(), u.n_steps());
            (u, a)
        });
        let mut record = ConvergenceRecord::default();
        let mut first: Option<(f64, f64)> = reference;
        let mut last: Option<(ReducedGradient<T>, T)> = None;
        for _ in 0..max_iters {
            let clock = Instant::now();
            let step = self.piggyback_iterate(&u, &adjoint, design)?;
            let (rs, ra) = (step.state_residual.as_f64(), step.adjoint_residual.as_f64());
            record.push(IterationRecord {
                iteration: 0,
                state_residual: rs,
                adjoint_residual: Some(ra),
                gradient_norm: Some(vector::norm2(&step.gradient).as_f64()),
                objective: Some(step.objective.as_f64()),
                wall_seconds: clock.elapsed().as_secs_f64(),
            });
            u = step.state;
            adjoint = step.adjoint;
            last = Some((step.gradient, step.objective));
            let (s0, a0) = *first.get_or_insert((rs, ra));
            if rs <= tol * s0 && ra <= tol * a0 {
                let (gradient, objective) = last.expect("at least one iteration");
                return Ok(PiggybackSolution { state: u, adjoint, gradient, objective, record });
            }
        }
        let (gradient, objective) = last.unwrap_or_else(|| (vec![T::zero(); design.len()], T::nan()));
        Err(DriverError::MaxItersExceeded {
            iterations: max_iters,
            partial: Box::new(PiggybackSolution { state: u, adjoint, gradient, objective, record }),
        })
    }

    /// One adjoint update at a frozen, converged state `u`, reusing the tape
    /// of a cycle recorded at `u`.
    pub fn adjoint_only_iterate(
        &self,
        tape: &CycleTape<T>,
        u: &SpaceTimeState<T>,
        adjoint: &AdjointState<T>,
        design: &[T],
    ) -> Result<(AdjointState<T>, ReducedGradient<T>)> {
        let (next, design_part) = self.adjoint_cycle(tape, adjoint, u, design)?;
        let mut gradient = self.objective.grad_design(u.states(), design);
        vector::add_assign(&mut gradient, &design_part);
        Ok((next, gradient))
    }
}

/// Backward recursion `bar u^i = grad_{u^i} J + (d step(u^i))^T bar u^{i+1}`,
/// `bar u^{N+1} = 0`, over a trajectory `u`. Returns the adjoint trajectory
/// and the reduced gradient `grad_rho J + sum_i (d_rho step(u^{i-1}))^T bar u^i`.
pub fn serial_adjoint<T: Real, S: Stepper<T> + ?Sized, J: Objective<T> + ?Sized>(
    stepper: &S,
    objective: &J,
    u: &SpaceTimeState<T>,
    design: &[T],
    dt: T,
) -> Result<(AdjointState<T>, ReducedGradient<T>)> {
    let n = u.n_steps();
    let dim = u.dim();
    let grad_u = objective.grad_state(u.states(), design);
    let mut adjoint = SpaceTimeState::zeros(dim, n);
    let mut gradient = objective.grad_design(u.states(), design);
    let mut carry = vec![T::zero(); dim];
    for i in (1..=n).rev() {
        let mut bar = grad_u[i - 1].clone();
        vector::add_assign(&mut bar, &carry);
        // transposed step from u^{i-1} to u^i
        let adj = stepper.step_adjoint(u.point(i - 1), design, dt, &bar)?;
        vector::add_assign(&mut gradient, &adj.design);
        adjoint.point_mut(i).copy_from_slice(&bar);
        carry = adj.state;
    }
    Ok((adjoint, gradient))
}
