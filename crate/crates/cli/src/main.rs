use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use p2psim::{execute, Command, RunManifest};

/// Whitewashing-defence simulator and analytics.
#[derive(Debug, Parser)]
#[command(name = "p2psim", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON config; an empty file selects every default.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let manifest = RunManifest {
        command: args.command,
        config_path: args.config,
        output_dir: args.out,
        seed_override: args.seed,
        quiet: args.quiet,
    };
    match execute(&manifest) {
        Ok(files) => {
            if !manifest.quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
