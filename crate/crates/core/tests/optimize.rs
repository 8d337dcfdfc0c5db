mod common;

use common::calibrated;
use mgrit_oneshot::adjoint::{serial_adjoint, AdjointMgrit};
use mgrit_oneshot::mgrit::{serial_solve, Mgrit, MgritConfig};
use mgrit_oneshot::optimize::{
    alpha_bound, augmented_lagrangian, oneshot_run, reduced_space_parallel, reduced_space_serial, OptimizationResult, OptimizerConfig,
};
use mgrit_oneshot::{DriverError, Model, Objective, SpaceTimeState};

const N: usize = 300;
const DT: f64 = 0.01;

/// `T = 3` with a coarse field grid; the curvature of `J(rho)` near the
/// optimum matches the reference grid at the same horizon.
fn problem() -> Model {
    calibrated(20, N, DT, 3.0)
}

fn config() -> OptimizerConfig {
    OptimizerConfig { theta: THETA, ..OptimizerConfig::default() }
}

/// Step size inside the stability range of the lagged One-shot gradient on
/// this problem.
const THETA: f64 = 0.3;

fn j(model: &Model, rho: f64) -> f64 {
    let u = serial_solve(model, &[rho], DT, N).unwrap();
    model.objective().value(u.states(), &[rho]).unwrap()
}

fn fd_derivative(model: &Model, rho: f64, eps: f64) -> f64 {
    (j(model, rho + eps) - j(model, rho - eps)) / (2.0 * eps)
}

fn exact_gradient(model: &Model, rho: f64) -> f64 {
    let u = serial_solve(model, &[rho], DT, N).unwrap();
    serial_adjoint(model, &model.objective(), &u, &[rho], DT).unwrap().1[0]
}

fn oneshot(model: &Model, cfg: &OptimizerConfig) -> Result<OptimizationResult<f64>, DriverError<OptimizationResult<f64>>> {
    let mg = Mgrit::new(model, DT, N, MgritConfig::default()).unwrap();
    let obj = model.objective();
    let adj = AdjointMgrit::new(&mg, &obj);
    let u0 = mg.initial_guess();
    let a0 = SpaceTimeState::zeros(u0.dim(), N);
    oneshot_run(&adj, &[2.0], u0, a0, cfg)
}

#[test]
fn all_three_methods_reach_the_same_optimum() {
    let m = problem();
    let cfg = config();
    let serial = reduced_space_serial(&m, &m.objective(), DT, N, &[2.0], &cfg).unwrap();
    let one = oneshot(&m, &cfg).unwrap();
    let mg = Mgrit::new(&m, DT, N, MgritConfig::default()).unwrap();
    let obj = m.objective();
    let parallel = reduced_space_parallel(&AdjointMgrit::new(&mg, &obj), &[2.0], &cfg).unwrap();
    let rho = serial.design[0];
    for other in [&one, &parallel] {
        assert!((other.design[0] - rho).abs() <= 1e-5, "{} vs {rho}", other.design[0]);
    }
    for r in [&serial, &one, &parallel] {
        let g = exact_gradient(&m, r.design[0]);
        assert!(g.abs() <= cfg.grad_tol, "{}: {g}", r.trace.method);
    }
    assert!(fd_derivative(&m, rho, 1e-4).abs() <= 10.0 * cfg.grad_tol);
    // the regularization pulls the optimum just below the target
    assert!(rho < 3.0 && rho > 2.99, "{rho}");
    let jstar = j(&m, rho);
    assert!(jstar <= 10.0 * 0.5 * m.config().gamma * rho * rho);
}

#[test]
fn oneshot_gradient_drops_by_five_orders() {
    let m = problem();
    let r = oneshot(&m, &config()).unwrap();
    // the first gradient sees a zero adjoint and holds only the
    // regularization term, so measure from the largest one
    let peak = r.trace.entries.iter().map(|e| e.gradient_norm).fold(0.0, f64::max);
    let last = r.trace.last().unwrap().gradient_norm;
    assert_eq!(r.trace.entries[0].gradient_norm, m.config().gamma * 2.0);
    assert!(last <= 1e-5 * peak, "{peak} -> {last}");
    let cycles: Vec<u64> = r.trace.entries.iter().map(|e| e.cycles).collect();
    assert_eq!(cycles, (1..=r.trace.entries.len() as u64).collect::<Vec<_>>());
}

#[test]
fn serial_reduced_gradients_match_differences() {
    let m = problem();
    let cfg = OptimizerConfig { max_outer: 4, ..config() };
    let err = reduced_space_serial(&m, &m.objective(), DT, N, &[2.0], &cfg).unwrap_err();
    let trace = &err.partial().unwrap().trace;
    assert_eq!(trace.entries.len(), 4);
    let mut rho = 2.0;
    for (k, e) in trace.entries.iter().enumerate() {
        assert_eq!(e.design, vec![rho]);
        let fd = fd_derivative(&m, rho, 1e-5);
        assert!((e.gradient_norm - fd.abs()).abs() <= 1e-5 * fd.abs(), "iteration {k}");
        assert_eq!(e.steps, 2 * N as u64 * (k as u64 + 1));
        rho -= THETA * exact_gradient(&m, rho);
    }
}

#[test]
fn oneshot_is_cheapest_in_step_applications() {
    let m = problem();
    let cfg = config();
    let one = oneshot(&m, &cfg).unwrap();
    let mg = Mgrit::new(&m, DT, N, MgritConfig::default()).unwrap();
    let obj = m.objective();
    let parallel = reduced_space_parallel(&AdjointMgrit::new(&mg, &obj), &[2.0], &cfg).unwrap();
    assert!(parallel.trace.total_cycles() >= 2 * one.trace.total_cycles());
    assert!(parallel.trace.total_steps() > one.trace.total_steps());
}

#[test]
fn start_at_the_target_feels_only_the_regularization() {
    let m = problem();
    let mg = Mgrit::new(&m, DT, N, MgritConfig::default()).unwrap();
    let obj = m.objective();
    let adj = AdjointMgrit::new(&mg, &obj);
    let sol = adj.piggyback_solve(&[3.0], 1e-13, 300, None).unwrap();
    assert!((sol.gradient[0] - 3e-6).abs() <= 1e-12, "{}", sol.gradient[0]);
    let cfg = OptimizerConfig { max_outer: 3, ..config() };
    let partial = oneshot_run(&adj, &[3.0], sol.state, sol.adjoint, &cfg).unwrap_err();
    let trace = &partial.partial().unwrap().trace;
    assert!((trace.entries[0].gradient_norm - 3e-6).abs() <= 1e-12);
    for e in &trace.entries[1..] {
        assert!(e.design[0] < 3.0 && e.design[0] > 3.0 - 1e-5);
    }
}

#[test]
fn large_steps_trip_the_divergence_guard() {
    let m = problem();
    let cfg = OptimizerConfig { theta: 50.0, ..config() };
    match reduced_space_serial(&m, &m.objective(), DT, N, &[2.0], &cfg) {
        Err(DriverError::DivergenceDetected { partial, factor, .. }) => {
            assert_eq!(factor, 1e3);
            assert!(!partial.trace.entries.is_empty());
        }
        Err(DriverError::Solver(_)) => {}
        other => panic!("expected divergence, got {:?}", other.map(|r| r.design)),
    }
}

#[test]
fn augmented_lagrangian_at_the_converged_triple_is_the_objective() {
    let m = problem();
    let mg = Mgrit::new(&m, DT, N, MgritConfig::default()).unwrap();
    let obj = m.objective();
    let adj = AdjointMgrit::new(&mg, &obj);
    let sol = adj.piggyback_solve(&[2.0], 1e-13, 300, None).unwrap();
    let j = obj.value(sol.state.states(), &[2.0]).unwrap();
    for alpha in [0.0, 1.0, 100.0] {
        let la = augmented_lagrangian(&mg, &obj, &sol.state, &sol.adjoint, &[2.0], alpha).unwrap();
        assert!((la - j).abs() <= 1e-12, "alpha {alpha}: {la} vs {j}");
    }
    // away from the fixed point the penalty and coupling terms appear
    let u = mg.initial_guess();
    let plain = augmented_lagrangian(&mg, &obj, &u, &sol.adjoint, &[2.0], 0.0).unwrap();
    let penalized = augmented_lagrangian(&mg, &obj, &u, &sol.adjoint, &[2.0], 2.0).unwrap();
    let h = mg.cycle(&u, &[2.0]).unwrap();
    let expected = plain + h.diff_norm(&u).powi(2);
    assert!((penalized - expected).abs() <= 1e-10 * expected.abs());
    assert_eq!(alpha_bound(0.5, 1.0).unwrap(), 4.0);
}
