//! Quick fixture sanity report: run one method on one task and print the
//! per-category table. Useful when swapping in new data files.
//!
//!     cargo run --release --example fixture_report -- \
//!         --task classify --method nli --seed 1 --epochs 12 --lr 1e-3

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Parser;

use req_nli::corpus::{load_classification_csv, load_conflict_project, load_defect_csv, make_splits, ResampleMode, SplitFractions};
use req_nli::encoder::TrainConfig;
use req_nli::eval::{weighted_average, ReportRow, WEIGHTED_ROW};
use req_nli::indicator::SweepGrid;
use req_nli::nli::{NegativeMode, VerbalizationCatalog};
use req_nli::registry::{CategoricalContext, ConflictContext, MethodRegistry, TaskKind};
use req_nli::conflict::{NegativePolicy, SymmetryMode};
use req_nli::synth::conflict_project_names;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "classify")]
    task: TaskKind,
    #[arg(long, default_value = "nli")]
    method: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    d_model: usize,
    #[arg(long, default_value_t = 64)]
    d_ff: usize,
    #[arg(long, default_value = "none")]
    resample: ResampleMode,
    /// Negatives per row in training pairs; omit for all-mode.
    #[arg(long)]
    sampled_k: Option<usize>,
    /// Conflicts only: run a single named fold instead of all projects.
    #[arg(long)]
    fold: Option<String>,
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = TrainConfig {
        epochs: args.epochs,
        lr: args.lr,
        seed: args.seed,
        d_model: args.d_model,
        d_ff: args.d_ff,
        ..TrainConfig::default()
    };
    let registry = MethodRegistry::standard();
    let method = registry.get(&args.method)?;
    let started = std::time::Instant::now();

    let tables = match args.task {
        TaskKind::Conflicts => {
            let mut projects = Vec::new();
            for name in conflict_project_names() {
                projects.push(load_conflict_project(
                    name,
                    args.data_dir.join(format!("conflicts/{name}_reqs.csv")),
                    args.data_dir.join(format!("conflicts/{name}_pairs.csv")),
                )?);
            }
            if let Some(fold) = &args.fold {
                let outcome = req_nli::conflict::run_fold(
                    &projects,
                    fold,
                    cfg,
                    NegativePolicy::default(),
                    SymmetryMode::Max,
                )?;
                vec![(outcome.project.clone(), outcome.counts)]
            } else {
                let ctx = ConflictContext {
                    projects: &projects,
                    train_cfg: cfg,
                    negative_policy: NegativePolicy::default(),
                    symmetry: SymmetryMode::Max,
                    chat: None,
                    artifacts_dir: None,
                };
                method
                    .run_conflicts(&ctx)?
                    .into_iter()
                    .map(|o| (o.project, o.counts))
                    .collect()
            }
        }
        task => {
            let (dataset, verb_task) = match task {
                TaskKind::Classify => (
                    load_classification_csv(args.data_dir.join("classification.csv"))?,
                    "classify",
                ),
                TaskKind::Defects => {
                    (load_defect_csv(args.data_dir.join("defects.csv"))?, "defects")
                }
                TaskKind::Conflicts => unreachable!(),
            };
            let verbalizations: BTreeMap<String, String> =
                VerbalizationCatalog::load(args.data_dir.join("verbalizations.csv"))?
                    .for_task(verb_task)?
                    .clone();
            let splits = make_splits(&dataset.rows, SplitFractions::default(), args.seed)?;
            let ctx = CategoricalContext {
                task,
                splits: &splits,
                catalog: &dataset.catalog,
                verbalizations: &verbalizations,
                train_cfg: cfg,
                negative_mode: args
                    .sampled_k
                    .map_or(NegativeMode::All, NegativeMode::Sampled),
                resample: args.resample,
                indicator_grid: SweepGrid::default(),
                cv_folds: 10,
                chat: None,
                artifacts_dir: None,
            };
            method.run_categorical(&ctx)?
        }
    };

    let mut rows = Vec::new();
    let mut per_category = Vec::new();
    for (category, counts) in &tables {
        let m = counts.metrics();
        per_category.push(m);
        rows.push(ReportRow {
            method: args.method.clone(),
            task: args.task.to_string(),
            category: category.clone(),
            metrics: m,
            runs: 1,
            stddev: 0.0,
        });
    }
    rows.push(ReportRow {
        method: args.method.clone(),
        task: args.task.to_string(),
        category: WEIGHTED_ROW.to_string(),
        metrics: weighted_average(&per_category),
        runs: 1,
        stddev: 0.0,
    });
    let title = format!("{} / {}", args.task, args.method);
    print!("{}", req_nli::eval::render_table(&title, &rows));
    eprintln!("elapsed: {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
