use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nash_cli::config::ScheduleKindConfig;
use nash_cli::{parse_config, run, Outcome};

#[derive(Parser)]
#[command(name = "nash", version, about = "Asynchronous block-iterative Nash equilibrium solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a configuration file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        schedule: Option<ScheduleKindConfig>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_lag: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Evaluate block updates on a thread pool.
        #[arg(long)]
        parallel: bool,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> anyhow::Result<i32> {
    let Command::Solve { config, schedule, seed, max_lag, window, max_iters, tol, trace, summary, parallel } =
        Cli::parse().command;
    let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", config.display()))?;
    if let Some(kind) = schedule {
        cfg.schedule.kind = kind;
    }
    if let Some(seed) = seed {
        cfg.schedule.seed = seed;
    }
    if let Some(d) = max_lag {
        cfg.schedule.max_lag = d;
    }
    if let Some(p) = window {
        cfg.schedule.window = p;
    }
    if let Some(n) = max_iters {
        cfg.params.max_iters = n;
    }
    if let Some(t) = tol {
        cfg.params.tol = t;
    }
    if trace.is_some() {
        cfg.output.trace = trace;
    }
    if summary.is_some() {
        cfg.output.summary = summary;
    }
    cfg.params.parallel |= parallel;

    let outcome = run(&cfg).context("writing output")?;
    match &outcome {
        Outcome::Solved { result, elapsed } => {
            eprintln!(
                "{:?} after {} ticks in {:.3}s, residual {:.3e}",
                result.status,
                result.iterations(),
                elapsed.as_secs_f64(),
                result.certificate.max_residual
            );
            for (i, x) in result.x().iter().enumerate() {
                println!("x[{i}] = {x:?}");
            }
        }
        Outcome::Refused(why) => eprintln!("refused:\n{why}"),
        Outcome::Aborted(why) => eprintln!("aborted: {why}"),
    }
    Ok(outcome.exit_code())
}
