use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use noiselab_cli::{config_for_target, run_to_dir, verify_determinism, CliError, Preset};

#[derive(Parser)]
#[command(name = "noiselab", version, about = "Seeded experiments on correlated quantum noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a JSON config file.
    Run {
        /// Preset name or path to a config `.json`.
        target: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: `runs/<experiment>-seed<seed>`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for parallel units.
        #[arg(long)]
        threads: Option<usize>,
        /// Override a config field, e.g. `--set noise.p=0.02`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// List the preset catalog.
    ListPresets,
    /// Check that results.json is byte-identical across thread counts.
    VerifyDeterminism {
        target: String,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 4, 8])]
        threads: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListPresets => {
            for p in Preset::ALL {
                println!("{:<18} {}", p.name(), p.description());
            }
            ExitCode::SUCCESS
        }
        Command::Run { target, seed, out, threads, set } => {
            let cfg = match config_for_target(&target, seed, &set) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let dir = out.unwrap_or_else(|| cfg.default_output_dir());
            match run_to_dir(&cfg, &dir, threads) {
                Ok(m) => {
                    println!("{}: {} ({} files in {})", m.experiment, m.status, m.files.len() + 1, dir.display());
                    for f in &m.failures {
                        println!("  failed: {f}");
                    }
                    ExitCode::from(m.exit_code() as u8)
                }
                Err(e) => fail(&e),
            }
        }
        Command::VerifyDeterminism { target, threads, seed, set } => {
            let cfg = match config_for_target(&target, seed, &set) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            match verify_determinism(&cfg, &threads) {
                Ok(r) => {
                    for run in &r.runs {
                        println!("threads {:>2}: {}", run.threads, run.sha256);
                    }
                    match &r.diff {
                        None => {
                            println!("{}: deterministic", r.experiment);
                            ExitCode::SUCCESS
                        }
                        Some(d) => {
                            println!("{}: results differ, {d}", r.experiment);
                            ExitCode::from(1)
                        }
                    }
                }
                Err(e) => fail(&e),
            }
        }
    }
}
