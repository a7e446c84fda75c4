//! Command-line front end for the entailment benchmark harness.
//!
//! Every stage reads the same experiment configuration file; flags override
//! the seed and output directory without editing it.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use req_nli::experiment::{
    ingest_summary, prepare_pairs, reproduce, run_experiment, sweep_report, train_single,
    ExperimentConfig, ReproTable,
};
use req_nli::registry::MethodRegistry;
use req_nli::{Error, Result};

const DEFAULT_CONFIG: &str = "req-nli.toml";

#[derive(Parser)]
#[command(
    name = "req-nli",
    about = "Requirements-engineering tasks recast as binary entailment",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration file; built-in defaults apply when the
    /// default path does not exist.
    #[arg(long, global = true, default_value = DEFAULT_CONFIG)]
    config: PathBuf,
    /// Run with exactly this seed, overriding the configured seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where run directories and artifacts go.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Load the configured datasets and print their shapes.
    Ingest,
    /// Build the entailment pairs and write audit dumps.
    Prepare,
    /// Fit the configured method for one seed and save its artifacts.
    Train,
    /// Run the experiment across its seeds and write aggregate reports.
    Evaluate {
        /// Run seeds concurrently in isolated run directories.
        #[arg(long)]
        parallel: bool,
    },
    /// Rebuild one of the published result tables end to end.
    Reproduce {
        /// Which table: t4 (classification), t5 (defects), t7 (conflicts).
        table: ReproTable,
        /// Run seeds concurrently in isolated run directories.
        #[arg(long)]
        parallel: bool,
    },
    /// Hyperparameter sweep for the configured method.
    Sweep,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = if cli.config.exists() {
        ExperimentConfig::load(&cli.config)?
    } else if cli.config == Path::new(DEFAULT_CONFIG) {
        ExperimentConfig::default()
    } else {
        return Err(Error::Data(format!(
            "config file {} not found",
            cli.config.display()
        )));
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
        cfg.experiment.seeds = Some(vec![seed]);
    }
    if let Some(dir) = &cli.out_dir {
        cfg.experiment.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let registry = MethodRegistry::standard();
    match &cli.command {
        Command::Ingest => {
            cfg.validate(&registry)?;
            print!("{}", ingest_summary(&cfg)?);
        }
        Command::Prepare => {
            cfg.validate(&registry)?;
            print!("{}", prepare_pairs(&cfg, cfg.seeds()[0])?);
        }
        Command::Train => {
            cfg.validate(&registry)?;
            print!("{}", train_single(&cfg, cfg.seeds()[0])?);
        }
        Command::Evaluate { parallel } => {
            let outcome = run_experiment(&cfg, &registry, *parallel)?;
            for output in &outcome.per_seed {
                println!("run {} -> {}", output.record.record_id, output.dir.display());
            }
            println!();
            print!(
                "{}",
                fs::read_to_string(outcome.aggregate_dir.join("report.txt"))?
            );
            println!("aggregate -> {}", outcome.aggregate_dir.display());
        }
        Command::Reproduce { table, parallel } => {
            cfg.validate_data_sections()?;
            let outcome = reproduce(*table, &cfg, &registry, *parallel)?;
            print!(
                "{}",
                fs::read_to_string(outcome.bundle_dir.join("report.txt"))?
            );
            println!("bundle -> {}", outcome.bundle_dir.display());
        }
        Command::Sweep => {
            cfg.validate(&registry)?;
            print!("{}", sweep_report(&cfg, cfg.seeds()[0])?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
