use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jcrenorm::scenario::{self, Scenario, ScenarioError};

/// Spin-mode renormalisation scenarios: shift profiles, Ramsey sweeps,
/// time-resolved signals, model comparisons and map-based extraction.
#[derive(Parser)]
#[command(name = "jcrenorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    file: PathBuf,
    /// Worker threads for grid sweeps (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: `output.dir`, else the current directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Checks a scenario without running it.
    Validate { file: PathBuf },
    /// Runs any scenario.
    Run(RunArgs),
    /// Runs a `shift_profile` scenario.
    ShiftProfile(RunArgs),
    /// Runs a `ramsey_average_sweep` scenario.
    RamseyAverageSweep(RunArgs),
    /// Runs a `time_resolved` scenario.
    TimeResolved(RunArgs),
    /// Runs a `compare_models` scenario.
    CompareModels(RunArgs),
    /// Runs a `tcl_extract` scenario.
    TclExtract(RunArgs),
}

fn exit_code(e: &ScenarioError) -> u8 {
    if e.is_validation() {
        2
    } else if e.is_numeric() {
        3
    } else {
        1
    }
}

fn validate(file: &Path) -> Result<(), ScenarioError> {
    let v = Scenario::load(file)?.validate()?;
    println!(
        "ok: {} ({}, model {})",
        v.scenario.name,
        v.scenario.protocol.name(),
        v.scenario.model
    );
    Ok(())
}

fn run(args: &RunArgs, expected: Option<&str>) -> Result<(), ScenarioError> {
    let scenario = Scenario::load(&args.file)?.with_seed(args.seed);
    if let Some(kind) = expected {
        if scenario.protocol.name() != kind {
            return Err(ScenarioError::Invalid {
                key: "protocol.kind".into(),
                message: format!(
                    "this subcommand runs `{kind}`, the file has `{}`",
                    scenario.protocol.name()
                ),
            });
        }
    }
    let v = scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
        .map_err(|e| ScenarioError::Compute(e.to_string()))?;
    let out = pool.install(|| scenario::run(&v))?;
    let dir = scenario::output_dir(&v.scenario, args.out.as_deref());
    let written = scenario::write_outputs(&out, &dir)?;
    println!("{}", out.summary);
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { file } => validate(file),
        Command::Run(a) => run(a, None),
        Command::ShiftProfile(a) => run(a, Some("shift_profile")),
        Command::RamseyAverageSweep(a) => run(a, Some("ramsey_average_sweep")),
        Command::TimeResolved(a) => run(a, Some("time_resolved")),
        Command::CompareModels(a) => run(a, Some("compare_models")),
        Command::TclExtract(a) => run(a, Some("tcl_extract")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
