use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nfteig_harness::catalog::list_experiments;
use nfteig_harness::{exit, run_experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(
    name = "nfteig",
    version,
    about = "Eigenvalue noise experiments for the nonlinear Fourier transform"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifact set.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the experiment catalog.
    List,
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn fail(e: &HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    code(e.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in list_experiments() {
                println!("{}\t{}\t{}", e.id, e.figures, e.title);
            }
            code(exit::PASS)
        }
        Command::Validate { config } => match ExperimentConfig::from_path(&config) {
            Ok(cfg) => {
                println!("{}: ok ({} runs, seed {})", cfg.id(), cfg.runs, cfg.seed);
                code(exit::PASS)
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            output_dir,
            workers,
            seed,
        } => {
            let mut cfg = match ExperimentConfig::from_path(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let Some(dir) = output_dir.or_else(|| cfg.output_dir.clone()) else {
                return fail(&HarnessError::config(
                    "output_dir",
                    "set it in the config or pass --output-dir",
                ));
            };
            match run_experiment(&cfg, &dir, workers) {
                Ok(report) => {
                    for c in &report.artifacts.checks {
                        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    for e in &report.artifacts.errors {
                        eprintln!("error in {}: {}", e.case, e.error);
                    }
                    println!(
                        "{} finished in {:.1} s, artifacts in {}",
                        cfg.id(),
                        report.manifest.wall_clock_seconds,
                        dir.display()
                    );
                    code(report.exit_code)
                }
                Err(e) => fail(&e),
            }
        }
    }
}
