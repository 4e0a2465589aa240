use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use steerdim::harness::{
    emit_report, emit_sweep, load_scenario, run_once, run_sweep, HarnessError, HarnessResult,
    OutputFormat, ScenarioConfig, SweepDocument, TOOL_VERSION,
};

/// Dimension witnesses for steering-based state preparation.
#[derive(Debug, Parser)]
#[command(name = "steerdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a scenario file.
    Check(Common),
    /// Run one scenario and write its report.
    Run(Common),
    /// Run the sweep embedded in a scenario file.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to structured for `run` and tabular for `sweep`.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Structured,
    Tabular,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Structured => OutputFormat::Structured,
            Format::Tabular => OutputFormat::Tabular,
        }
    }
}

fn load(args: &Common) -> HarnessResult<ScenarioConfig> {
    let mut config = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn write_output(out: Option<&Path>, text: &str) -> HarnessResult<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> HarnessResult<()> {
    match command {
        Command::Check(args) => {
            let config = load(&args)?;
            let scenario = config.build_scenario()?;
            let sweep = config
                .sweep
                .as_ref()
                .map(|s| format!(", sweep over {} ({} points)", s.parameter, s.steps))
                .unwrap_or_default();
            let text = format!(
                "ok: {}x{} scenario{}\n",
                scenario.dim_a(),
                scenario.dim_b(),
                sweep
            );
            write_output(args.out.as_deref(), &text)
        }
        Command::Run(args) => {
            let config = load(&args)?;
            let doc = run_once(&config)?;
            let format = args.format.map_or(OutputFormat::Structured, Into::into);
            write_output(args.out.as_deref(), &emit_report(&doc, format))
        }
        Command::Sweep(args) => {
            let config = load(&args)?;
            let spec = config.sweep.clone().ok_or_else(|| {
                HarnessError::Sweep("scenario file has no `sweep` section".into())
            })?;
            let records = run_sweep(&config, &spec)?;
            let doc = SweepDocument {
                tool_version: TOOL_VERSION.to_string(),
                seed_used: config.seed,
                config_echo: config,
                records,
            };
            let format = args.format.map_or(OutputFormat::Tabular, Into::into);
            write_output(args.out.as_deref(), &emit_sweep(&doc, format))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
