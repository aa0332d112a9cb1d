//! Command-line front end: configuration parsing, experiment orchestration
//! (single runs and parameter sweeps) and machine-readable output.

mod config;
mod emit;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use run::{Mode, RunError};

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_ENGINE: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dimersim",
    version,
    about = "Exact solver for the driven-dissipative Bose-Hubbard dimer",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one configuration key, e.g. --set system.j_over_u=0.26
    /// (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format: csv or json (overrides output.format).
    #[arg(long, global = true)]
    format: Option<String>,

    /// Worker threads for sweeps and block diagonalization
    /// (0 = hardware parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Dissipative quantum dynamics of the occupations from a Fock state.
    Dynamics,
    /// Steady state of the vectorized Lindbladian.
    Steady,
    /// Steady-state spectral and correlation functions with sum rules.
    Greens,
    /// Semiclassical equations of motion and self-trapping analytics.
    Semiclassical,
    /// Fan one parameter over a list of values.
    Sweep,
    /// Run the engine invariant suite and print a report.
    Check,
}

fn build_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for entry in &cli.sets {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{entry}`"))?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(dir) = &cli.output {
        config.output.dir = dir.display().to_string();
    }
    if let Some(format) = &cli.format {
        config.output.format = format.clone();
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not errors
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(EXIT_VALIDATION);
            }
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
    };

    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        if jobs > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global()
            {
                eprintln!("warning: could not size the worker pool: {e}");
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs.is_some() {
        eprintln!("warning: this binary was built without the `parallel` feature; --jobs ignored");
    }

    let mode = match cli.command {
        Command::Dynamics => Mode::Dynamics,
        Command::Steady => Mode::Steady,
        Command::Greens => Mode::Greens,
        Command::Semiclassical => Mode::Semiclassical,
        Command::Sweep => Mode::Sweep,
        Command::Check => Mode::Check,
    };

    let config = match build_config(&cli) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("invalid configuration: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    let results = match run::run(mode, &config) {
        Ok(results) => results,
        Err(RunError::Validation(e)) => {
            eprintln!("invalid configuration: {e:#}");
            return ExitCode::from(EXIT_VALIDATION);
        }
        Err(RunError::Engine(e)) => {
            eprintln!("engine error: {e:#}");
            return ExitCode::from(EXIT_ENGINE);
        }
    };

    if mode == Mode::Check {
        let mut failed = 0usize;
        for check in &results.metadata.checks {
            println!(
                "{}  {:<44} |value| = {:.3e}  (limit {:.1e})",
                if check.passed { "PASS" } else { "FAIL" },
                check.name,
                check.value.abs(),
                check.threshold
            );
            if !check.passed {
                failed += 1;
            }
        }
        println!(
            "{} checks, {} failed, {:.2} s",
            results.metadata.checks.len(),
            failed,
            results.metadata.wall_time_s
        );
        return if failed == 0 {
            ExitCode::from(EXIT_OK)
        } else {
            ExitCode::from(EXIT_CHECK_FAILED)
        };
    }

    let dir = PathBuf::from(&config.output.dir);
    match emit::emit(&results, &dir, &config.output.format) {
        Ok(paths) => {
            for path in paths {
                println!("wrote {}", path.display());
            }
            if !results.all_checks_passed() {
                for check in results.metadata.checks.iter().filter(|c| !c.passed) {
                    eprintln!(
                        "warning: check {} at {:.3e} exceeds {:.1e}",
                        check.name, check.value, check.threshold
                    );
                }
            }
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("output error: {e:#}");
            ExitCode::from(EXIT_ENGINE)
        }
    }
}
