//! Cost summary: cycles, step counters, wall time, speedup and overhead.

use super::output::{opt_real, real, CsvTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRole {
    /// Pure forward simulation; the reference for overhead ratios.
    Simulation,
    /// Time-serial method against which speedups are measured.
    SerialBaseline,
    Method,
}

/// Measured cost and outcome of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodCost {
    pub method: String,
    pub role: CostRole,
    pub workers: usize,
    pub converged: bool,
    pub iterations: usize,
    pub cycles: u64,
    /// Forward plus transposed step applications on all levels.
    pub steps: u64,
    pub wall_seconds: f64,
    pub design: Vec<f64>,
    pub gradient_norm: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub cost: MethodCost,
    /// `steps / N`: step applications in units of one serial sweep.
    pub step_overhead: f64,
    /// Serial-baseline wall time over this row's wall time.
    pub speedup: Option<f64>,
    /// This row's wall time over the simulation row's.
    pub time_overhead: Option<f64>,
}

/// Summary rows for `runs`. Speedups are taken against the first
/// [`CostRole::SerialBaseline`] run and overheads against the first
/// [`CostRole::Simulation`] run of the same list; ratios whose reference is
/// absent are left empty.
pub fn cost_report(runs: &[MethodCost], n_steps: usize) -> Vec<SummaryRow> {
    let baseline = runs.iter().find(|r| r.role == CostRole::SerialBaseline).map(|r| r.wall_seconds);
    let simulation = runs.iter().find(|r| r.role == CostRole::Simulation).map(|r| r.wall_seconds);
    runs.iter()
        .map(|r| SummaryRow {
            cost: r.clone(),
            step_overhead: r.steps as f64 / n_steps.max(1) as f64,
            speedup: baseline.map(|b| ratio(b, r.wall_seconds)),
            time_overhead: simulation.map(|s| ratio(r.wall_seconds, s)),
        })
        .collect()
}

/// `num / den`, with equal operands giving exactly 1 even when both are 0.
fn ratio(num: f64, den: f64) -> f64 {
    if num == den {
        1.0
    } else {
        num / den
    }
}

pub(crate) fn summary_table(rows: &[SummaryRow]) -> CsvTable {
    let mut t = CsvTable::new(
        "summary",
        &[
            "method",
            "workers",
            "converged",
            "iterations",
            "cycles",
            "steps",
            "step_overhead",
            "design",
            "gradient_norm",
            "objective",
            "wall_seconds",
            "speedup",
            "time_overhead",
        ],
    );
    for r in rows {
        let c = &r.cost;
        t.push(vec![
            c.method.clone(),
            c.workers.to_string(),
            c.converged.to_string(),
            c.iterations.to_string(),
            c.cycles.to_string(),
            c.steps.to_string(),
            real(r.step_overhead),
            c.design.iter().map(|d| real(*d)).collect::<Vec<_>>().join(";"),
            opt_real(c.gradient_norm),
            opt_real(c.objective),
            real(c.wall_seconds),
            opt_real(r.speedup),
            opt_real(r.time_overhead),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(method: &str, role: CostRole, steps: u64, wall: f64) -> MethodCost {
        MethodCost {
            method: method.into(),
            role,
            workers: 1,
            converged: true,
            iterations: 1,
            cycles: 0,
            steps,
            wall_seconds: wall,
            design: vec![3.0],
            gradient_norm: None,
            objective: None,
        }
    }

    #[test]
    fn single_serial_run_has_unit_speedup() {
        let rows = cost_report(&[run("reduced_serial", CostRole::SerialBaseline, 20, 0.37)], 10);
        assert_eq!(rows[0].speedup, Some(1.0));
        assert_eq!(rows[0].time_overhead, None);
        assert_eq!(rows[0].step_overhead, 2.0);
    }

    #[test]
    fn simulation_row_has_unit_overhead() {
        let runs = [
            run("simulation", CostRole::Simulation, 10, 0.5),
            run("reduced_serial", CostRole::SerialBaseline, 200, 20.0),
            run("oneshot", CostRole::Method, 100, 4.0),
        ];
        let rows = cost_report(&runs, 10);
        assert_eq!(rows[0].time_overhead, Some(1.0));
        assert_eq!(rows[0].step_overhead, 1.0);
        assert_eq!(rows[1].time_overhead, Some(40.0));
        assert_eq!(rows[2].speedup, Some(5.0));
        assert_eq!(rows[2].time_overhead, Some(8.0));
    }
}
