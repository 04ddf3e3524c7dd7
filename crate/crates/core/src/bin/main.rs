use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use star_ris_aoi::cli::{execute, load_config, parse_modes, parse_sweep, CliError, RunSpec};

/// Age-of-information simulation over a transmitting and reflecting surface.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// Configuration file (`key = value`, optional sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sweep, e.g. `gamma_th_db=0,3,6,9`. Overrides the file's [sweep].
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated modes: es, ms, conv, random.
    #[arg(long)]
    modes: Option<String>,
    /// Monte Carlo runs per mode and sweep value.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for results.csv, summary.csv and manifest.txt.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Suppress the summary table.
    #[arg(long)]
    quiet: bool,
}

fn run(args: &Args) -> Result<(), CliError> {
    let mut spec = match &args.config {
        Some(p) => load_config(p)?,
        None => RunSpec::default(),
    };
    if let Some(s) = &args.sweep {
        spec.sweep = Some(parse_sweep(s)?);
    }
    if let Some(m) = &args.modes {
        spec.modes = parse_modes(m)?;
    }
    if let Some(r) = args.runs {
        spec.runs = r;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let manifest = execute(&spec, args.config.as_deref(), &args.out)?;
    if !args.quiet {
        let summary = std::fs::read_to_string(args.out.join("summary.csv")).unwrap_or_default();
        print!("{summary}");
        println!("wrote {} rows to {}", manifest.rows, args.out.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
