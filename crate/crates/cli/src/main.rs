use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dyadic_cli::{config, experiments};

/// Dyadic shell model experiment runner.
///
/// Experiments are described by flat `section.key = value` files; see the
/// presets directory for one file per experiment kind. Exit codes: 0 ok,
/// 2 config error, 3 numerical divergence, 4 oracle mismatch.
#[derive(Parser)]
#[command(name = "dyadic", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment configuration and write CSV outputs + manifest.
    Run {
        /// Path to the configuration file.
        config_file: PathBuf,
        /// Override numerics.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override output.dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads for path ensembles. Outputs are byte-identical
        /// across thread counts.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Validate a configuration and print derived quantities.
    Validate {
        /// Path to the configuration file.
        config_file: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<config::ExperimentConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    config::load(&text).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config_file, seed, out_dir, threads } => {
            let mut cfg = match load_config(&config_file) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error[config]: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(dir) = out_dir {
                cfg.out_dir = dir;
            }
            match experiments::run(&cfg, threads.max(1)) {
                Ok(outcome) => {
                    for (k, v) in &outcome.summary {
                        println!("{k} = {v}");
                    }
                    println!("wrote {} files to {}", outcome.files.len(), cfg.out_dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    let code = e.exit_code();
                    eprintln!("error[{code}]: {e}");
                    ExitCode::from(code as u8)
                }
            }
        }
        Command::Validate { config_file } => {
            let cfg = match load_config(&config_file) {
                Ok(c) => c,
                Err(e) => {
                    // the report names the failure; the exit code still
                    // signals a config problem for scripting
                    println!("verdict = rejected ({e})");
                    return ExitCode::from(2);
                }
            };
            print!("{}", experiments::validate(&cfg));
            ExitCode::SUCCESS
        }
    }
}
