use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use heatbesov::cli::{run, Command, ExperimentConfig};

/// Besov-Lipschitz and heat-kernel seminorm experiments on the gasket and tori.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    command: Command,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `space.level`.
    #[arg(long)]
    level: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = ExperimentConfig::load(&args.config).and_then(|mut cfg| {
        if let Some(out) = args.out {
            cfg.outputs.dir = out;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(level) = args.level {
            cfg.space.level = level;
        }
        run(&cfg, args.command)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
