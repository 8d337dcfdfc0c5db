use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mgrit_oneshot::harness::{parse_config_with_overrides, run_experiment, HarnessError};

#[derive(Parser)]
#[command(version, about = "Time-parallel One-shot optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Experiment kind, replacing `kind` from the file.
        #[arg(long)]
        kind: Option<String>,
        /// Worker count, or comma-separated list for scaling runs.
        #[arg(long)]
        workers: Option<String>,
        /// Output directory for the CSV files.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `key=value` replacing a configuration entry; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    let Command::Run { config, kind, workers, out, overrides } = Cli::parse().command;
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut args = Vec::new();
    if let Some(k) = kind {
        args.push(format!("kind={k}"));
    }
    if let Some(w) = workers {
        args.push(format!("workers={w}"));
    }
    if let Some(o) = out {
        args.push(format!("out={}", o.display()));
    }
    args.extend(overrides);
    let cfg = match parse_config_with_overrides(&text, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let bundle = match run_experiment(&cfg) {
        Ok(b) => b,
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    };
    match bundle.write(&cfg.out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SOLVER);
        }
    }
    for row in &bundle.summary {
        let c = &row.cost;
        eprintln!(
            "{:<22} converged={:<5} iterations={:<4} steps={:<10} overhead={:.1} design={:?}",
            c.method, c.converged, c.iterations, c.steps, row.step_overhead, c.design
        );
    }
    if bundle.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &bundle.failures {
            eprintln!("solver failure: {f}");
        }
        ExitCode::from(EXIT_SOLVER)
    }
}
