use std::fs;
use std::path::Path;
use std::process::Command;

use mgrit_oneshot::harness::{parse_config, read_csv, run_experiment, CsvTable, ExperimentKind};

/// Small problem with the reference horizon `T = 3`.
const SMALL: &str = "N = 300\nT = 3\nL = 20\ntheta = 0.3\nmax_outer = 100\n";

fn config(extra: &str) -> mgrit_oneshot::harness::ExperimentConfig {
    parse_config(&format!("{SMALL}{extra}")).unwrap()
}

fn written_tables(dir: &Path) -> Vec<CsvTable> {
    let mut names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "csv")).collect();
    names.sort();
    names.iter().map(|p| read_csv(p).unwrap()).collect()
}

#[test]
fn reruns_reproduce_every_csv_except_timings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("kind = piggyback\nperturbation = 0.05\nseed = 17\n");
    let first = run_experiment(&cfg).unwrap();
    first.write(&dir.path().join("a")).unwrap();
    // the echoed configuration alone reruns the experiment
    let echoed = parse_config(&first.config_echo).unwrap();
    assert_eq!(echoed, cfg);
    run_experiment(&echoed).unwrap().write(&dir.path().join("b")).unwrap();
    let (a, b) = (written_tables(&dir.path().join("a")), written_tables(&dir.path().join("b")));
    assert_eq!(a.len(), 3);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.without_timing(), y.without_timing(), "table {}", x.name);
    }
    assert_eq!(fs::read_to_string(dir.path().join("a/config.txt")).unwrap(), fs::read_to_string(dir.path().join("b/config.txt")).unwrap());

    let other_seed = run_experiment(&config("kind = piggyback\nperturbation = 0.05\nseed = 18\n")).unwrap();
    assert_ne!(other_seed.table("piggyback").unwrap().without_timing(), a.iter().find(|t| t.name == "piggyback").unwrap().without_timing());
}

#[test]
fn piggyback_history_decays_in_both_residuals() {
    let b = run_experiment(&config("kind = piggyback\nrho = 2\n")).unwrap();
    let h = b.table("piggyback").unwrap();
    let state = h.reals("state_relative").unwrap();
    let adjoint = h.reals("adjoint_relative").unwrap();
    assert_eq!(state[0], 1.0);
    assert!(*state.last().unwrap() <= 1e-9 && *adjoint.last().unwrap() <= 1e-9);
    let d = b.table("piggyback_diagnostics").unwrap();
    let value = |q: &str| d.rows.iter().find(|r| r[0] == q).unwrap()[1].parse::<f64>().unwrap();
    assert!(value("eta_state") < 1.0 && value("eta_adjoint") < 1.0);
    assert!(value("gradient_error") <= 1e-8 * value("serial_gradient_norm"));
}

#[test]
fn compare_orders_methods_by_overhead() {
    let b = run_experiment(&config("kind = compare\n")).unwrap();
    assert!(b.failures.is_empty(), "{:?}", b.failures);
    let row = |m: &str| b.summary_row(m).unwrap();
    assert_eq!(row("simulation").step_overhead, 1.0);
    assert_eq!(row("simulation").time_overhead, Some(1.0));
    assert_eq!(row("reduced_serial").speedup, Some(1.0));
    let rho = row("reduced_serial").cost.design[0];
    for m in ["reduced_parallel", "oneshot"] {
        assert!((row(m).cost.design[0] - rho).abs() <= 1e-5);
        assert!(row(m).cost.gradient_norm.unwrap() <= 1e-7);
    }
    assert!(row("oneshot").cost.steps < row("reduced_parallel").cost.steps);
    for name in ["trace_reduced_serial", "trace_reduced_parallel", "trace_oneshot", "summary"] {
        assert!(name == "summary" || b.table(name).is_some(), "{name}");
    }
}

#[test]
fn scaling_rows_agree_across_worker_counts() {
    let b = run_experiment(&config("kind = scaling\nscaling_kind = piggyback\nworkers = 1,2,4\n")).unwrap();
    let t = b.table("scaling").unwrap();
    assert_eq!(t.rows.len(), 3);
    for x in t.reals("max_state_deviation").unwrap().into_iter().chain(t.reals("design_deviation").unwrap()) {
        assert!(x <= 1e-10);
    }
    let steps = t.reals("steps").unwrap();
    assert!(steps.iter().all(|&s| s == steps[0]));
    assert_eq!(b.kind, ExperimentKind::Scaling);
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgrit-oneshot"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.txt");
    fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("out");

    let ok = cli().args(["run", cfg.to_str().unwrap(), "--kind", "piggyback", "--workers", "2", "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    for f in ["piggyback.csv", "piggyback_diagnostics.csv", "summary.csv", "config.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let echoed = parse_config(&fs::read_to_string(out.join("config.txt")).unwrap()).unwrap();
    assert_eq!(echoed.workers, vec![2]);

    let bad = cli().args(["run", cfg.to_str().unwrap(), "--override", "m=1"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let missing = cli().args(["run", dir.path().join("absent.txt").to_str().unwrap()]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    // the optimizer runs out of iterations: a solver failure
    let failing = cli()
        .args(["run", cfg.to_str().unwrap(), "--kind", "reduced_serial", "--override", "max_outer=2", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(3));
    assert!(out.join("trace_reduced_serial.csv").exists());
}
