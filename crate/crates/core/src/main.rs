use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use plateflow::galerkin::RunStatus;
use plateflow::verify::{self, Level};
use plateflow::{app, parallel, Error, Result};

/// Free-surface flow under an elastic plate on the periodic line.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write its time series and snapshots.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` of the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the built-in checks and print a pass/fail table.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Quick)]
        level: LevelArg,
    },
    /// Run a family of truncations from the same data and compare them.
    Converge {
        config: PathBuf,
        /// Comma-separated, strictly increasing truncations.
        #[arg(long, default_value = "8,16,32,64")]
        truncations: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Quick,
    Full,
}

fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("PLATEFLOW_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Validation {
                key: "PLATEFLOW_THREADS".into(),
                line: None,
                message: format!("expected a positive integer, got {v:?}"),
            }),
        },
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, output } => {
            let cfg = app::load_config(&config)?;
            let out = output.unwrap_or_else(|| cfg.output_dir.clone());
            let result = app::run(&cfg, &out)?;
            let traj = &result.trajectory;
            let last = traj.samples.last();
            println!(
                "status {}, {} steps, t = {:.6}, energy drift {:.3e}",
                traj.status,
                traj.steps,
                traj.final_state.t,
                last.map(|s| s.energy_drift).unwrap_or(0.0)
            );
            println!("time series: {}", result.timeseries.display());
            if let Some(m) = &traj.message {
                eprintln!("{m}");
            }
            Ok(if traj.status == RunStatus::Completed { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
        Command::Verify { level } => {
            let level = match level {
                LevelArg::Quick => Level::Quick,
                LevelArg::Full => Level::Full,
            };
            let checks = verify::run_checks(level);
            print!("{}", verify::format_table(&checks));
            Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Converge { config, truncations, output } => {
            let cfg = app::load_config(&config)?;
            let truncations = app::parse_truncations(&truncations)?;
            let out = output.unwrap_or_else(|| cfg.output_dir.clone());
            let report = app::converge(&cfg, &truncations, &out)?;
            print!("{}", app::format_convergence(&report));
            for m in report.members.iter().filter(|m| m.status != RunStatus::Completed) {
                eprintln!("n = {}: {} {}", m.n, m.status, m.message.as_deref().unwrap_or(""));
            }
            Ok(if report.completed() { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = thread_limit().and_then(|threads| parallel::with_thread_limit(threads, || execute(cli)));
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
