//! Optimization drivers: simultaneous One-shot, and reduced-space
//! optimization with time-parallel or time-serial state/adjoint solves.
//!
//! All three use the constant preconditioner `B = theta I`, i.e. the design
//! update `rho <- rho - theta g`.

use std::time::Instant;

use crate::adjoint::{serial_adjoint, AdjointMgrit, PiggybackSolution};
use crate::error::{DriverError, Error, Result};
use crate::mgrit::{serial_solve, CostSnapshot, Mgrit};
use crate::scalar::Real;
use crate::space_time::{AdjointState, SpaceTimeState};
use crate::stepper::{Objective, Stepper};
use crate::vector;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Step size of the design update.
    pub theta: f64,
    /// Stop once the reduced-gradient norm is at most this.
    pub grad_tol: f64,
    pub max_outer: usize,
    /// Inner piggyback tolerance of the time-parallel reduced-space method,
    /// relative to the residuals of its first (cold-start) iteration.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Penalty weight of the augmented Lagrangian (diagnostics only).
    pub alpha: f64,
    /// Divergence guard: abort when the gradient norm exceeds this multiple
    /// of its running minimum.
    pub divergence_factor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            theta: 0.9,
            grad_tol: 1e-7,
            max_outer: 200,
            inner_tol: 1e-9,
            inner_max_iters: 200,
            alpha: 0.0,
            divergence_factor: 1e3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0) {
            return Err(Error::InvalidConfig(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.inner_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("inner_tol must be positive, got {}", self.inner_tol)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if self.max_outer == 0 || self.inner_max_iters == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// One outer iteration of an optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub design: Vec<f64>,
    pub objective: f64,
    pub gradient_norm: f64,
    pub state_residual: f64,
    pub adjoint_residual: f64,
    /// Cumulative MGRIT cycles (forward).
    pub cycles: u64,
    /// Cumulative forward and transposed step applications on all levels.
    pub steps: u64,
    /// Cumulative solver wall time.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationTrace {
    pub method: String,
    pub entries: Vec<TraceEntry>,
}

impl OptimizationTrace {
    fn new(method: &str) -> Self {
        Self { method: method.to_string(), entries: Vec::new() }
    }

    pub fn last(&self) -> Option<&TraceEntry> {
        self.entries.last()
    }

    pub fn total_cycles(&self) -> u64 {
        self.last().map_or(0, |e| e.cycles)
    }

    pub fn total_steps(&self) -> u64 {
        self.last().map_or(0, |e| e.steps)
    }

    pub fn wall_seconds(&self) -> f64 {
        self.last().map_or(0.0, |e| e.wall_seconds)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationResult<T> {
    pub design: Vec<T>,
    /// Final state and adjoint; absent for the time-serial method, which
    /// does not keep trajectories between iterations.
    pub state: Option<SpaceTimeState<T>>,
    pub adjoint: Option<AdjointState<T>>,
    pub trace: OptimizationTrace,
}

pub type OptimizeError<T> = DriverError<OptimizationResult<T>>;

/// `rho - theta g`
pub fn design_update<T: Real>(design: &[T], gradient: &[T], theta: T) -> Vec<T> {
    design.iter().zip(gradient).map(|(&r, &g)| r - theta * g).collect()
}

/// Penalty weight above which the augmented Lagrangian is an exact penalty
/// function: `2 l / (1 - eta)`.
pub fn alpha_bound(eta: f64, lag: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidInput(format!("contraction rate must lie in [0, 1), got {eta}")));
    }
    if !(lag >= 0.0) {
        return Err(Error::InvalidInput(format!("time lag must be non-negative, got {lag}")));
    }
    Ok(2.0 * lag / (1.0 - eta))
}

/// `alpha/2 |H(u) - u|^2 + J(u) + bar u^T (H(u) - u)`; costs one cycle.
pub fn augmented_lagrangian<T: Real, S: Stepper<T>, J: Objective<T>>(
    mgrit: &Mgrit<'_, T, S>,
    objective: &J,
    u: &SpaceTimeState<T>,
    adjoint: &AdjointState<T>,
    design: &[T],
    alpha: T,
) -> Result<T> {
    if !(alpha >= T::zero()) {
        return Err(Error::InvalidInput("alpha must be non-negative".into()));
    }
    let h = mgrit.cycle(u, design)?;
    let mut penalty = Vec::with_capacity(u.n_steps());
    let mut coupling = Vec::with_capacity(u.n_steps());
    for i in 1..=u.n_steps() {
        let r = vector::sub(h.point(i), u.point(i));
        penalty.push(vector::dot(&r, &r));
        coupling.push(vector::dot(adjoint.point(i), &r));
    }
    let half = T::lit(0.5);
    Ok(half * alpha * vector::ordered_sum(&penalty) + objective.value(u.states(), design)? + vector::ordered_sum(&coupling))
}

struct Tracker {
    start: Instant,
    base: CostSnapshot,
    min_grad: f64,
}

impl Tracker {
    fn new(base: CostSnapshot) -> Self {
        Self { start: Instant::now(), base, min_grad: f64::INFINITY }
    }

    fn delta(&self, now: &CostSnapshot) -> (u64, u64) {
        let cycles = now.cycles - self.base.cycles;
        let steps = now.serial_equivalent_steps() - self.base.serial_equivalent_steps();
        (cycles, steps)
    }
}

/// Number of initial iterations exempt from the divergence guard; the first
/// gradients are built from a cold adjoint and are not comparable.
const GUARD_WARMUP: usize = 5;

fn check_divergence<T: Real>(
    tracker: &mut Tracker,
    iteration: usize,
    grad_norm: f64,
    factor: f64,
    partial: impl FnOnce() -> OptimizationResult<T>,
) -> std::result::Result<(), OptimizeError<T>> {
    if !grad_norm.is_finite() {
        return Err(Error::NonFinite("reduced gradient").into());
    }
    if iteration >= 1 {
        tracker.min_grad = tracker.min_grad.min(grad_norm);
    }
    if iteration >= GUARD_WARMUP && grad_norm > factor * tracker.min_grad {
        return Err(DriverError::DivergenceDetected {
            iteration,
            grad_norm,
            min_grad_norm: tracker.min_grad,
            factor,
            partial: Box::new(partial()),
        });
    }
    Ok(())
}

fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Simultaneous One-shot optimization: every iteration performs one
/// piggyback update of state and adjoint and one design update with the
/// inexact reduced gradient, all evaluated at `(u_k, bar u_k, rho_k)`.
pub fn oneshot_run<T: Real, S: Stepper<T>, J: Objective<T>>(
    solver: &AdjointMgrit<'_, '_, T, S, J>,
    design0: &[T],
    state0: SpaceTimeState<T>,
    adjoint0: AdjointState<T>,
    cfg: &OptimizerConfig,
) -> std::result::Result<OptimizationResult<T>, OptimizeError<T>> {
    cfg.validate()?;
    let mgrit = solver.mgrit();
    let mut tracker = Tracker::new(mgrit.costs());
    let mut trace = OptimizationTrace::new("oneshot");
    let (mut design, mut u, mut adjoint) = (design0.to_vec(), state0, adjoint0);
    let theta = T::lit(cfg.theta);
    for k in 0..cfg.max_outer {
        let step = solver.piggyback_iterate(&u, &adjoint, &design)?;
        let grad_norm = vector::norm2(&step.gradient).as_f64();
        let (cycles, steps) = tracker.delta(&mgrit.costs());
        trace.entries.push(TraceEntry {
            iteration: k,
            design: to_f64(&design),
            objective: step.objective.as_f64(),
            gradient_norm: grad_norm,
            state_residual: step.state_residual.as_f64(),
            adjoint_residual: step.adjoint_residual.as_f64(),
            cycles,
            steps,
            wall_seconds: tracker.start.elapsed().as_secs_f64(),
        });
        if grad_norm <= cfg.grad_tol {
            return Ok(OptimizationResult { design, state: Some(step.state), adjoint: Some(step.adjoint), trace });
        }
        check_divergence(&mut tracker, k, grad_norm, cfg.divergence_factor, || OptimizationResult {
            design: design.clone(),
            state: Some(step.state.clone()),
            adjoint: Some(step.adjoint.clone()),
            trace: trace.clone(),
        })?;
        design = design_update(&design, &step.gradient, theta);
        u = step.state;
        adjoint = step.adjoint;
    }
    Err(DriverError::MaxItersExceeded {
        iterations: cfg.max_outer,
        partial: Box::new(OptimizationResult { design, state: Some(u), adjoint: Some(adjoint), trace }),
    })
}

/// Reduced-space optimization with a full serial forward sweep and serial
/// backward adjoint sweep per design update.
pub fn reduced_space_serial<T: Real, S: Stepper<T>, J: Objective<T>>(
    stepper: &S,
    objective: &J,
    dt: T,
    n_steps: usize,
    design0: &[T],
    cfg: &OptimizerConfig,
) -> std::result::Result<OptimizationResult<T>, OptimizeError<T>> {
    cfg.validate()?;
    let mut tracker = Tracker::new(CostSnapshot::default());
    let mut trace = OptimizationTrace::new("reduced_serial");
    let mut design = design0.to_vec();
    let theta = T::lit(cfg.theta);
    let mut steps = 0u64;
    for k in 0..cfg.max_outer {
        let u = serial_solve(stepper, &design, dt, n_steps)?;
        let (_adjoint, gradient) = serial_adjoint(stepper, objective, &u, &design, dt)?;
        steps += 2 * n_steps as u64;
        let grad_norm = vector::norm2(&gradient).as_f64();
        trace.entries.push(TraceEntry {
            iteration: k,
            design: to_f64(&design),
            objective: objective.value(u.states(), &design)?.as_f64(),
            gradient_norm: grad_norm,
            state_residual: 0.0,
            adjoint_residual: 0.0,
            cycles: 0,
            steps,
            wall_seconds: tracker.start.elapsed().as_secs_f64(),
        });
        if grad_norm <= cfg.grad_tol {
            return Ok(OptimizationResult { design, state: None, adjoint: None, trace });
        }
        check_divergence(&mut tracker, k, grad_norm, cfg.divergence_factor, || OptimizationResult {
            design: design.clone(),
            state: None,
            adjoint: None,
            trace: trace.clone(),
        })?;
        design = design_update(&design, &gradient, theta);
    }
    Err(DriverError::MaxItersExceeded {
        iterations: cfg.max_outer,
        partial: Box::new(OptimizationResult { design, state: None, adjoint: None, trace }),
    })
}

/// Reduced-space optimization whose state and adjoint are recovered by a
/// converged piggyback solve after every design update, warm-started from
/// the previous outer iterate.
pub fn reduced_space_parallel<T: Real, S: Stepper<T>, J: Objective<T>>(
    solver: &AdjointMgrit<'_, '_, T, S, J>,
    design0: &[T],
    cfg: &OptimizerConfig,
) -> std::result::Result<OptimizationResult<T>, OptimizeError<T>> {
    cfg.validate()?;
    let mgrit = solver.mgrit();
    let mut tracker = Tracker::new(mgrit.costs());
    let mut trace = OptimizationTrace::new("reduced_parallel");
    let mut design = design0.to_vec();
    let theta = T::lit(cfg.theta);
    let mut warm: Option<(SpaceTimeState<T>, AdjointState<T>)> = None;
    let mut reference: Option<(f64, f64)> = None;
    for k in 0..cfg.max_outer {
        let sol = solver
            .piggyback_solve_scaled(&design, cfg.inner_tol, cfg.inner_max_iters, warm.take(), reference)
            .map_err(|e| match e {
                DriverError::Solver(err) => DriverError::Solver(err),
                other => DriverError::Solver(Error::InvalidInput(format!("inner piggyback solve failed: {other}"))),
            })?;
        if reference.is_none() {
            let first = &sol.record.iterations[0];
            reference = Some((first.state_residual, first.adjoint_residual.unwrap_or(0.0)));
        }
        let PiggybackSolution { state, adjoint, gradient, objective, record } = sol;
        let grad_norm = vector::norm2(&gradient).as_f64();
        let (cycles, steps) = tracker.delta(&mgrit.costs());
        let last = record.iterations.last().expect("non-empty");
        trace.entries.push(TraceEntry {
            iteration: k,
            design: to_f64(&design),
            objective: objective.as_f64(),
            gradient_norm: grad_norm,
            state_residual: last.state_residual,
            adjoint_residual: last.adjoint_residual.unwrap_or(0.0),
            cycles,
            steps,
            wall_seconds: tracker.start.elapsed().as_secs_f64(),
        });
        if grad_norm <= cfg.grad_tol {
            return Ok(OptimizationResult { design, state: Some(state), adjoint: Some(adjoint), trace });
        }
        check_divergence(&mut tracker, k, grad_norm, cfg.divergence_factor, || OptimizationResult {
            design: design.clone(),
            state: Some(state.clone()),
            adjoint: Some(adjoint.clone()),
            trace: trace.clone(),
        })?;
        design = design_update(&design, &gradient, theta);
        warm = Some((state, adjoint));
    }
    let (state, adjoint) = warm.map_or((None, None), |(s, a)| (Some(s), Some(a)));
    Err(DriverError::MaxItersExceeded {
        iterations: cfg.max_outer,
        partial: Box::new(OptimizationResult { design, state, adjoint, trace }),
    })
}
