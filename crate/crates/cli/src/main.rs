//! `phaselab`: run seeded Lasso / Basis Pursuit experiments from JSON configs.
//!
//! Exit status is 0 on success, 1 when the config cannot be read or is
//! invalid, and 2 when the run itself fails (files already written are
//! left in place).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phaselab::experiments::{
    emit_outputs, load_config, run_equivalence_experiment, run_fit, run_sweep_with,
    run_unbounded_construction, run_width_table, EquivalenceConfig, FitConfig, Format,
    ProblemSource, RunOptions, SweepConfig, UnboundedConfig, Validate, WidthConfig,
};

#[derive(Parser)]
#[command(name = "phaselab", version, about = "Phase-transition experiments for the Lasso")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep over a (delta, rho) grid
    Sweep(CommonArgs),
    /// Sparsity/risk contingency on both sides of the transition
    Equivalence(CommonArgs),
    /// Risk growth along b* = t·b0 for a certified BP failure
    Unbounded(CommonArgs),
    /// Gaussian-width table
    Width(CommonArgs),
    /// Fit the Lasso on one instance
    Fit(CommonArgs),
    /// Fit one instance and report its diagnostics
    Diagnose(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config)
    #[arg(long)]
    seed: Option<u64>,
    /// Replications, seeds or samples, depending on the command
    #[arg(long)]
    replications: Option<usize>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Output formats; repeat or separate with commas
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv", "json", "svg"])]
    format: Vec<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Svg => Format::Svg,
        }
    }
}

enum Failure {
    Config(String),
    Runtime(String),
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn output_dir(args: &CommonArgs, configured: &Option<String>) -> PathBuf {
    args.out
        .clone()
        .or_else(|| configured.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("phaselab-out"))
}

fn no_replications(args: &CommonArgs, command: &str) -> Result<(), Failure> {
    match args.replications {
        Some(_) => Err(Failure::Config(format!("--replications does not apply to `{command}`"))),
        None => Ok(()),
    }
}

fn revalidate<T: Validate>(config: &T) -> Result<(), Failure> {
    config.validate().map_err(config_err)
}

fn emit<T: phaselab::experiments::Emit + ?Sized>(
    result: &T,
    args: &CommonArgs,
    dir: &Path,
) -> Result<(), Failure> {
    let formats: Vec<Format> = args.format.iter().map(|&f| f.into()).collect();
    for path in emit_outputs(result, &formats, dir).map_err(runtime_err)? {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sweep(args) => {
            let mut config: SweepConfig = load_config(&args.config).map_err(config_err)?;
            config.seed = args.seed.unwrap_or(config.seed);
            config.replications = args.replications.unwrap_or(config.replications);
            revalidate(&config)?;
            let options = RunOptions { workers: args.workers };
            let result = run_sweep_with(&config, &options).map_err(runtime_err)?;
            emit(&result, &args, &output_dir(&args, &config.output_dir))
        }
        Command::Equivalence(args) => {
            let mut config: EquivalenceConfig = load_config(&args.config).map_err(config_err)?;
            config.seed = args.seed.unwrap_or(config.seed);
            if let Some(r) = args.replications {
                config.below.seeds = r;
                if let Some(above) = config.above.as_mut() {
                    above.seeds = r;
                }
            }
            revalidate(&config)?;
            let options = RunOptions { workers: args.workers };
            let report = run_equivalence_experiment(&config, &options).map_err(runtime_err)?;
            emit(&report, &args, &output_dir(&args, &config.output_dir))
        }
        Command::Unbounded(args) => {
            let mut config: UnboundedConfig = load_config(&args.config).map_err(config_err)?;
            config.seed = args.seed.unwrap_or(config.seed);
            config.seeds = args.replications.unwrap_or(config.seeds);
            revalidate(&config)?;
            let options = RunOptions { workers: args.workers };
            let result = run_unbounded_construction(&config, &options).map_err(runtime_err)?;
            if !result.bp_failure_certified {
                log::warn!("no certified BP failure in this cell");
            }
            emit(&result, &args, &output_dir(&args, &config.output_dir))
        }
        Command::Width(args) => {
            let mut config: WidthConfig = load_config(&args.config).map_err(config_err)?;
            config.seed = args.seed.unwrap_or(config.seed);
            config.samples = args.replications.unwrap_or(config.samples);
            revalidate(&config)?;
            let options = RunOptions { workers: args.workers };
            let rows = run_width_table(&config, &options).map_err(runtime_err)?;
            emit(rows.as_slice(), &args, &output_dir(&args, &config.output_dir))
        }
        Command::Fit(args) => single(args, false),
        Command::Diagnose(args) => single(args, true),
    }
}

fn single(args: CommonArgs, with_diagnostics: bool) -> Result<(), Failure> {
    let command = if with_diagnostics { "diagnose" } else { "fit" };
    no_replications(&args, command)?;
    let mut config: FitConfig = load_config(&args.config).map_err(config_err)?;
    if let (Some(seed), ProblemSource::Generate(g)) = (args.seed, &mut config.problem) {
        g.seed = seed;
    }
    revalidate(&config)?;
    let base = args.config.parent().map(Path::to_path_buf);
    let output = run_fit(&config, base.as_deref(), with_diagnostics).map_err(runtime_err)?;
    let dir = output_dir(&args, &config.output_dir);
    emit(&output, &args, &dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("run failed: {msg}");
            ExitCode::from(2)
        }
    }
}
