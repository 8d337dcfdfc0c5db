//! Experiment dispatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, ExperimentKind};
use super::output::{emit_csv, opt_real, real, CsvTable};
use super::report::{cost_report, summary_table, CostRole, MethodCost, SummaryRow};
use super::HarnessError;
use crate::adjoint::{serial_adjoint, AdjointMgrit};
use crate::error::DriverError;
use crate::mgrit::{estimate_contraction, serial_solve, ConvergenceRecord, Mgrit, MgritConfig};
use crate::model::{AdvectionVdp, ModelConfig, TrackingObjective};
use crate::optimize::{oneshot_run, reduced_space_parallel, reduced_space_serial, OptimizationResult, OptimizationTrace};
use crate::space_time::SpaceTimeState;
use crate::vector;

/// Everything an experiment produced.
#[derive(Debug, Clone)]
pub struct ResultBundle {
    pub kind: ExperimentKind,
    /// Convergence histories and diagnostics, one CSV file each.
    pub tables: Vec<CsvTable>,
    pub summary: Vec<SummaryRow>,
    /// Configuration text that reruns the experiment.
    pub config_echo: String,
    /// Tracking target used by the objective.
    pub a_target: f64,
    /// Solver runs that failed; their partial results are still in the
    /// tables and summary.
    pub failures: Vec<String>,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_table(&self) -> CsvTable {
        summary_table(&self.summary)
    }

    pub fn summary_row(&self, method: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.cost.method == method)
    }

    /// Writes every table, `summary.csv` and `config.txt` into `dir`;
    /// returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let mut paths = Vec::new();
        for t in self.tables.iter().chain(std::iter::once(&self.summary_table())) {
            let p = dir.join(format!("{}.csv", t.name));
            emit_csv(t, &p)?;
            paths.push(p);
        }
        let p = dir.join("config.txt");
        fs::write(&p, &self.config_echo).map_err(|e| HarnessError::io(&p, e))?;
        paths.push(p);
        Ok(paths)
    }
}

type Model = AdvectionVdp<f64>;

struct Context<'c> {
    cfg: &'c ExperimentConfig,
    model: Model,
    objective: TrackingObjective<f64>,
}

/// Result of one solver run inside an experiment.
struct Outcome {
    cost: MethodCost,
    tables: Vec<CsvTable>,
    failure: Option<String>,
    state: Option<SpaceTimeState<f64>>,
}

/// Runs the experiment named by `cfg.kind`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultBundle, HarnessError> {
    let model_cfg: ModelConfig<f64> =
        cfg.resolved_model().map_err(|e| HarnessError::solver(format!("computing a_target at rho = {}", cfg.rho_target), e))?;
    let model = AdvectionVdp::new(model_cfg.clone()).map_err(|e| HarnessError::solver("building the model", e))?;
    let objective = model.objective();
    let ctx = Context { cfg, model, objective };
    let workers = cfg.workers[0];
    let mut outcomes = Vec::new();
    let mut extra_tables = Vec::new();
    match cfg.kind {
        ExperimentKind::Piggyback => {
            outcomes.push(ctx.serial_state_adjoint()?);
            outcomes.push(ctx.run_single(ExperimentKind::Piggyback, workers)?);
        }
        ExperimentKind::ReducedSerial => {
            outcomes.push(ctx.simulation()?);
            outcomes.push(ctx.run_single(ExperimentKind::ReducedSerial, workers)?);
        }
        ExperimentKind::Oneshot | ExperimentKind::ReducedParallel => {
            outcomes.push(ctx.simulation()?);
            outcomes.push(ctx.run_single(cfg.kind, workers)?);
        }
        ExperimentKind::Compare => {
            outcomes.push(ctx.simulation()?);
            for kind in [ExperimentKind::ReducedSerial, ExperimentKind::ReducedParallel, ExperimentKind::Oneshot] {
                outcomes.push(ctx.run_single(kind, workers)?);
            }
        }
        ExperimentKind::Scaling => {
            let mut runs = Vec::new();
            for &w in &cfg.workers {
                let mut o = ctx.run_single(cfg.scaling_kind, w)?;
                o.cost.method = format!("{}_w{}", cfg.scaling_kind.name(), w);
                o.tables.iter_mut().for_each(|t| t.name = format!("{}_w{}", t.name, w));
                runs.push(o);
            }
            extra_tables.push(scaling_table(&runs));
            outcomes.extend(runs);
        }
    }
    let costs: Vec<MethodCost> = outcomes.iter().map(|o| o.cost.clone()).collect();
    let mut tables: Vec<CsvTable> = outcomes.iter_mut().flat_map(|o| std::mem::take(&mut o.tables)).collect();
    tables.extend(extra_tables);
    let failures = outcomes.iter().filter_map(|o| o.failure.clone()).collect();
    let mut config_echo = cfg.to_config_text();
    if cfg.a_target.is_none() {
        config_echo.push_str(&format!("# a_target computed from rho_target: {}\n", model_cfg.a_target));
    }
    Ok(ResultBundle {
        kind: cfg.kind,
        tables,
        summary: cost_report(&costs, model_cfg.n_steps),
        config_echo,
        a_target: model_cfg.a_target,
        failures,
    })
}

fn scaling_table(runs: &[Outcome]) -> CsvTable {
    let mut t = CsvTable::new(
        "scaling",
        &["workers", "converged", "cycles", "steps", "design", "max_state_deviation", "design_deviation", "wall_seconds", "speedup"],
    );
    let Some(first) = runs.first() else { return t };
    for r in runs {
        let state_dev = match (&first.state, &r.state) {
            (Some(a), Some(b)) => Some(a.max_abs_diff(b)),
            _ => None,
        };
        let design_dev = first.cost.design.iter().zip(&r.cost.design).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        t.push(vec![
            r.cost.workers.to_string(),
            r.cost.converged.to_string(),
            r.cost.cycles.to_string(),
            r.cost.steps.to_string(),
            join_reals(&r.cost.design),
            opt_real(state_dev),
            real(design_dev),
            real(r.cost.wall_seconds),
            real(first.cost.wall_seconds / r.cost.wall_seconds),
        ]);
    }
    t
}

fn join_reals(x: &[f64]) -> String {
    x.iter().map(|v| real(*v)).collect::<Vec<_>>().join(";")
}

impl Context<'_> {
    fn n_steps(&self) -> usize {
        self.model.config().n_steps
    }

    fn dt(&self) -> f64 {
        self.model.config().dt
    }

    fn mgrit(&self, workers: usize) -> Result<Mgrit<'_, f64, Model>, HarnessError> {
        let config = MgritConfig { workers, ..self.cfg.mgrit.clone() };
        Mgrit::new(&self.model, self.dt(), self.n_steps(), config).map_err(|e| HarnessError::solver("building the MGRIT solver", e))
    }

    /// Broadcast initial condition plus the seeded perturbation.
    fn initial_guess(&self) -> SpaceTimeState<f64> {
        let mut u = SpaceTimeState::broadcast(&crate::Stepper::initial_state(&self.model), self.n_steps());
        let amp = self.cfg.perturbation;
        if amp > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            for p in u.points_mut().iter_mut().skip(1) {
                for x in p.iter_mut() {
                    *x += amp * rng.gen_range(-1.0..=1.0);
                }
            }
        }
        u
    }

    fn base_cost(&self, method: &str, role: CostRole, workers: usize) -> MethodCost {
        MethodCost {
            method: method.to_string(),
            role,
            workers,
            converged: true,
            iterations: 0,
            cycles: 0,
            steps: 0,
            wall_seconds: 0.0,
            design: vec![self.cfg.rho],
            gradient_norm: None,
            objective: None,
        }
    }

    /// Pure forward simulation at the starting design.
    fn simulation(&self) -> Result<Outcome, HarnessError> {
        let design = [self.cfg.rho];
        let start = Instant::now();
        let u = serial_solve(&self.model, &design, self.dt(), self.n_steps())
            .map_err(|e| HarnessError::solver("serial simulation", e))?;
        let wall = start.elapsed().as_secs_f64();
        let mut cost = self.base_cost("simulation", CostRole::Simulation, 1);
        cost.iterations = 1;
        cost.steps = self.n_steps() as u64;
        cost.wall_seconds = wall;
        cost.objective = Some(crate::Objective::value(&self.objective, u.states(), &design).map_err(|e| HarnessError::solver("objective", e))?);
        Ok(Outcome { cost, tables: Vec::new(), failure: None, state: Some(u) })
    }

    /// Serial forward sweep and backward adjoint sweep at the fixed design.
    fn serial_state_adjoint(&self) -> Result<Outcome, HarnessError> {
        let design = [self.cfg.rho];
        let start = Instant::now();
        let u = serial_solve(&self.model, &design, self.dt(), self.n_steps())
            .map_err(|e| HarnessError::solver("serial forward sweep", e))?;
        let (_, gradient) = serial_adjoint(&self.model, &self.objective, &u, &design, self.dt())
            .map_err(|e| HarnessError::solver("serial adjoint sweep", e))?;
        let wall = start.elapsed().as_secs_f64();
        let mut cost = self.base_cost("serial_state_adjoint", CostRole::SerialBaseline, 1);
        cost.iterations = 1;
        cost.steps = 2 * self.n_steps() as u64;
        cost.wall_seconds = wall;
        cost.gradient_norm = Some(vector::norm2(&gradient));
        cost.objective = Some(crate::Objective::value(&self.objective, u.states(), &design).map_err(|e| HarnessError::solver("objective", e))?);
        Ok(Outcome { cost, tables: Vec::new(), failure: None, state: Some(u) })
    }

    fn run_single(&self, kind: ExperimentKind, workers: usize) -> Result<Outcome, HarnessError> {
        match kind {
            ExperimentKind::Piggyback => self.piggyback(workers),
            ExperimentKind::Oneshot | ExperimentKind::ReducedParallel | ExperimentKind::ReducedSerial => {
                self.optimizer(kind, workers)
            }
            ExperimentKind::Compare | ExperimentKind::Scaling => {
                unreachable!("composite experiment kinds are rejected by the configuration")
            }
        }
    }

    fn piggyback(&self, workers: usize) -> Result<Outcome, HarnessError> {
        let design = [self.cfg.rho];
        let mg = self.mgrit(workers)?;
        let adj = AdjointMgrit::new(&mg, &self.objective);
        let u0 = self.initial_guess();
        let a0 = SpaceTimeState::zeros(u0.dim(), u0.n_steps());
        let tol = self.cfg.mgrit.halting_tol;
        let start = Instant::now();
        let result = adj.piggyback_solve(&design, tol, self.cfg.mgrit.max_iters, Some((u0, a0)));
        let wall = start.elapsed().as_secs_f64();
        let (sol, failure) = match result {
            Ok(sol) => (sol, None),
            Err(DriverError::Solver(e)) => return Err(HarnessError::solver("piggyback iteration", e)),
            Err(e) => {
                let msg = format!("piggyback: {e}");
                match e {
                    DriverError::MaxItersExceeded { partial, .. } | DriverError::DivergenceDetected { partial, .. } => {
                        (*partial, Some(msg))
                    }
                    DriverError::Solver(_) => unreachable!(),
                }
            }
        };
        let costs = mg.costs();
        let mut cost = self.base_cost("piggyback", CostRole::Method, workers);
        cost.converged = failure.is_none();
        cost.iterations = sol.record.len();
        cost.cycles = costs.cycles;
        cost.steps = costs.serial_equivalent_steps();
        cost.wall_seconds = wall;
        cost.gradient_norm = Some(vector::norm2(&sol.gradient));
        cost.objective = Some(sol.objective);

        let serial = serial_solve(&self.model, &design, self.dt(), self.n_steps())
            .map_err(|e| HarnessError::solver("serial reference sweep", e))?;
        let (_, serial_grad) = serial_adjoint(&self.model, &self.objective, &serial, &design, self.dt())
            .map_err(|e| HarnessError::solver("serial reference adjoint", e))?;
        let tables = vec![piggyback_history(&sol.record), piggyback_diagnostics(&sol.record, &sol.gradient, &serial_grad, sol.state.max_abs_diff(&serial))];
        Ok(Outcome { cost, tables, failure, state: Some(sol.state) })
    }

    fn optimizer(&self, kind: ExperimentKind, workers: usize) -> Result<Outcome, HarnessError> {
        let design0 = [self.cfg.rho];
        let opt = &self.cfg.optimizer;
        let mg = self.mgrit(workers)?;
        let adj = AdjointMgrit::new(&mg, &self.objective);
        let start = Instant::now();
        let result = match kind {
            ExperimentKind::Oneshot => {
                let u0 = self.initial_guess();
                let a0 = SpaceTimeState::zeros(u0.dim(), u0.n_steps());
                oneshot_run(&adj, &design0, u0, a0, opt)
            }
            ExperimentKind::ReducedParallel => reduced_space_parallel(&adj, &design0, opt),
            ExperimentKind::ReducedSerial => reduced_space_serial(&self.model, &self.objective, self.dt(), self.n_steps(), &design0, opt),
            _ => unreachable!("not an optimizer"),
        };
        let wall = start.elapsed().as_secs_f64();
        let name = kind.name();
        let (res, failure): (OptimizationResult<f64>, Option<String>) = match result {
            Ok(r) => (r, None),
            Err(e) => {
                let msg = format!("{name}: {e}");
                match e {
                    DriverError::MaxItersExceeded { partial, .. } | DriverError::DivergenceDetected { partial, .. } => {
                        (*partial, Some(msg))
                    }
                    DriverError::Solver(_) => {
                        let trace = OptimizationTrace { method: name.to_string(), entries: Vec::new() };
                        (OptimizationResult { design: design0.to_vec(), state: None, adjoint: None, trace }, Some(msg))
                    }
                }
            }
        };
        let role = if kind == ExperimentKind::ReducedSerial { CostRole::SerialBaseline } else { CostRole::Method };
        let mut cost = self.base_cost(name, role, workers);
        cost.converged = failure.is_none();
        cost.iterations = res.trace.entries.len();
        cost.cycles = res.trace.total_cycles();
        cost.steps = res.trace.total_steps();
        cost.wall_seconds = wall;
        cost.design = res.design.clone();
        cost.objective = res.trace.last().map(|e| e.objective);
        // optimality of the returned design, from an exact gradient
        if failure.is_none() {
            let verified = self.exact_gradient(&res.design).map_err(|e| HarnessError::solver(format!("{name}: verifying the gradient"), e))?;
            cost.gradient_norm = Some(vector::norm2(&verified));
        } else {
            cost.gradient_norm = res.trace.last().map(|e| e.gradient_norm);
        }
        Ok(Outcome { cost, tables: vec![trace_table(&res.trace)], failure, state: res.state })
    }

    fn exact_gradient(&self, design: &[f64]) -> crate::Result<Vec<f64>> {
        let u = serial_solve(&self.model, design, self.dt(), self.n_steps())?;
        let (_, g) = serial_adjoint(&self.model, &self.objective, &u, design, self.dt())?;
        Ok(g)
    }
}

fn piggyback_history(record: &ConvergenceRecord) -> CsvTable {
    let mut t = CsvTable::new(
        "piggyback",
        &["iteration", "state_residual", "adjoint_residual", "state_relative", "adjoint_relative", "gradient_norm", "objective", "wall_seconds"],
    );
    let rs = ConvergenceRecord::relative(&record.state_residuals());
    let ra = ConvergenceRecord::relative(&record.adjoint_residuals());
    for (i, it) in record.iterations.iter().enumerate() {
        t.push(vec![
            it.iteration.to_string(),
            real(it.state_residual),
            opt_real(it.adjoint_residual),
            real(rs[i]),
            ra.get(i).map(|x| real(*x)).unwrap_or_default(),
            opt_real(it.gradient_norm),
            opt_real(it.objective),
            real(it.wall_seconds),
        ]);
    }
    t
}

fn piggyback_diagnostics(record: &ConvergenceRecord, gradient: &[f64], serial_gradient: &[f64], state_error: f64) -> CsvTable {
    let mut t = CsvTable::new("piggyback_diagnostics", &["quantity", "value"]);
    let eta = |r: &[f64]| estimate_contraction(r).ok().map(|e| e.eta);
    let diff: Vec<f64> = gradient.iter().zip(serial_gradient).map(|(a, b)| a - b).collect();
    let rows = [
        ("eta_state", eta(&record.state_residuals())),
        ("eta_adjoint", eta(&record.adjoint_residuals())),
        ("time_lag", record.time_lag_estimate(2)),
        ("gradient_norm", Some(vector::norm2(gradient))),
        ("serial_gradient_norm", Some(vector::norm2(serial_gradient))),
        ("gradient_error", Some(vector::norm2(&diff))),
        ("max_state_error", Some(state_error)),
    ];
    for (k, v) in rows {
        t.push(vec![k.to_string(), opt_real(v)]);
    }
    t
}

fn trace_table(trace: &OptimizationTrace) -> CsvTable {
    let mut t = CsvTable::new(
        &format!("trace_{}", trace.method),
        &["iteration", "design", "objective", "gradient_norm", "state_residual", "adjoint_residual", "cycles", "steps", "wall_seconds"],
    );
    for e in &trace.entries {
        t.push(vec![
            e.iteration.to_string(),
            join_reals(&e.design),
            real(e.objective),
            real(e.gradient_norm),
            real(e.state_residual),
            real(e.adjoint_residual),
            e.cycles.to_string(),
            e.steps.to_string(),
            real(e.wall_seconds),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::parse_config;

    fn small(kind: &str) -> ExperimentConfig {
        parse_config(&format!("kind = {kind}\nN = 64\nL = 10\nmax_outer = 3\nmax_iters = 30\n")).unwrap()
    }

    #[test]
    fn piggyback_bundle_has_history_and_baseline() {
        let b = run_experiment(&small("piggyback")).unwrap();
        assert!(b.failures.is_empty(), "{:?}", b.failures);
        let h = b.table("piggyback").unwrap();
        assert!(!h.rows.is_empty());
        assert_eq!(b.summary_row("serial_state_adjoint").unwrap().speedup, Some(1.0));
        assert!(b.summary_row("piggyback").unwrap().cost.cycles > 0);
    }

    #[test]
    fn failed_optimizer_is_reported_not_fatal() {
        let b = run_experiment(&small("reduced_serial")).unwrap();
        assert_eq!(b.failures.len(), 1);
        let row = b.summary_row("reduced_serial").unwrap();
        assert!(!row.cost.converged);
        assert_eq!(b.table("trace_reduced_serial").unwrap().rows.len(), 3);
        assert_eq!(b.summary_row("simulation").unwrap().time_overhead, Some(1.0));
    }

    #[test]
    fn perturbation_is_seeded() {
        let mut cfg = small("piggyback");
        cfg.perturbation = 0.1;
        let model = AdvectionVdp::new(cfg.resolved_model().unwrap()).unwrap();
        let ctx = Context { cfg: &cfg, objective: model.objective(), model };
        let a = ctx.initial_guess();
        assert_eq!(a, ctx.initial_guess());
        assert_eq!(a.initial(), &crate::Stepper::initial_state(&ctx.model)[..]);
        let mut other = cfg.clone();
        other.seed = 1;
        let ctx2 = Context { cfg: &other, objective: ctx.model.objective(), model: AdvectionVdp::new(ctx.model.config().clone()).unwrap() };
        assert_ne!(a, ctx2.initial_guess());
    }
}
