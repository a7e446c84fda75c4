//! Regenerates the committed fixtures under `data/`.
//!
//! The output is byte-stable for a given crate version, so running this
//! after a checkout is a no-op unless the generator itself changed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Parser)]
#[command(
    name = "req-nli-datagen",
    about = "Write the seeded benchmark fixtures (classification, defects, conflicts, verbalizations)"
)]
struct Args {
    /// Output directory for the fixture tree.
    #[arg(long, default_value = "data")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match req_nli::synth::write_fixtures(&args.out_dir) {
        Ok(()) => {
            log::info!("fixtures written to {}", args.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
