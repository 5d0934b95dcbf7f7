use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use fednids_cli::config::{ConfigError, ExperimentConfig, Scenario};
use fednids_cli::runner::run_experiment;
use fednids_core::fixture::write_fixture_pair;

/// Federated network-intrusion-detection experiments over NetFlow CSVs.
#[derive(Parser)]
#[command(name = "fednids", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Generate the two-organisation sample dataset pair.
    GenFixture(GenFixtureArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario override: federated, centralised, localised or all.
    #[arg(long)]
    scenario: Option<String>,
    /// Output directory, overriding the config and FEDNIDS_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop the per-organisation row cap and use every balanced row.
    #[arg(long)]
    full_data: bool,
}

#[derive(Args)]
struct GenFixtureArgs {
    /// Directory for the generated CSVs.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Rows per organisation.
    #[arg(long, default_value_t = 2000)]
    rows: usize,
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = dispatch(cli) {
        eprintln!("error: {error:#}");
        std::process::exit(exit_code(&error));
    }
}

/// Input problems (bad config, unreadable or malformed datasets) exit with
/// 2; everything else unexpected exits with 1.
fn exit_code(error: &anyhow::Error) -> i32 {
    if error.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match error.downcast_ref::<fednids_core::Error>() {
        Some(core) if core.is_input_error() => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let mut config = ExperimentConfig::from_file(&args.config)?;
            if let Some(seed) = args.seed {
                config.seed = seed;
                config.local.seed = seed;
            }
            if let Some(scenario) = &args.scenario {
                config.scenario = Scenario::parse(scenario)?;
            }
            if args.full_data {
                config.subsample_cap = None;
            }
            if let Some(out) = args.out {
                config.out_dir = Some(out);
            } else if let Ok(out) = std::env::var("FEDNIDS_OUT") {
                config.out_dir = Some(PathBuf::from(out));
            }

            let outputs = run_experiment(&config)?;
            println!(
                "{} scenario(s) complete, {} files in {}",
                config.scenario.expand().len(),
                outputs.files.len(),
                outputs.out_dir.display()
            );
            for file in &outputs.files {
                println!("  {}", file.file_name().unwrap_or_default().to_string_lossy());
            }
            Ok(())
        }
        Command::GenFixture(args) => {
            std::fs::create_dir_all(&args.out)?;
            let (enterprise, iot) = write_fixture_pair(&args.out, args.rows, args.seed)?;
            println!("{}", enterprise.display());
            println!("{}", iot.display());
            Ok(())
        }
    }
}
