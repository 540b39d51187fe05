mod config;
mod error;
mod output;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "cqlattice", version, about = "Run cavity lattice experiments from TOML files")]
struct Cli {
    /// Worker threads for sweeps and trajectories.
    #[arg(long, global = true, env = "CQLATTICE_THREADS")]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Directory for CSV output.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Override `[solver] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single configuration.
    Run(RunArgs),
    /// Run every point of the `[sweep]` axis.
    Sweep(RunArgs),
    /// Bundled experiment files.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset to stdout.
    Emit { name: String },
}

fn load(args: &RunArgs) -> Result<config::ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let mut cfg = config::parse(&text, &args.config.display().to_string())?;
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    Ok(cfg)
}

fn execute(command: &str, args: &RunArgs) -> Result<(), CliError> {
    let mut cfg = load(args)?;
    let outcome = match (command, &cfg.sweep) {
        ("run", None) => run::run_config(&cfg)?,
        ("run", Some(_)) => {
            return Err(CliError::Config(
                "config has a [sweep] section; use `cqlattice sweep`".into(),
            ))
        }
        (_, Some(s)) if s.axis()?.is_empty() => {
            info!("empty sweep axis, nothing to do");
            return Ok(());
        }
        _ => run::run_sweep(&cfg)?,
    };
    if cfg.model.n_max.is_none() {
        cfg.model.n_max = outcome.n_max;
    }
    let path = output::csv_path(&cfg, &args.config, &args.out_dir);
    output::write(&path, &output::render(command, &cfg, &outcome))?;
    println!("{}", path.display());
    Ok(())
}

fn presets(action: &PresetAction) -> Result<(), CliError> {
    match action {
        PresetAction::List => {
            for p in presets::PRESETS {
                println!("{:<6}  {}", p.name, p.summary);
            }
        }
        PresetAction::Emit { name } => {
            let p = presets::find(name).ok_or_else(|| {
                CliError::Config(format!("unknown preset `{name}`; see `cqlattice presets list`"))
            })?;
            print!("{}", p.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Run(a) => execute("run", a),
        Command::Sweep(a) => execute("sweep", a),
        Command::Presets { action } => presets(action),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
