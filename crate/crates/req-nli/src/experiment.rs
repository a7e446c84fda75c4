//! Experiment configuration, orchestration, persistence, and the
//! table-reproduction recipes that tie the task modules together.
//!
//! A run is identified by the hash of its canonicalized configuration plus
//! its seed; identical config and seed produce byte-identical report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chat::ChatSettings;
use crate::conflict::{NegativePolicy, SymmetryMode};
use crate::corpus::{
    load_classification_csv, load_conflict_project, load_defect_csv, make_splits,
    resample_training, ConflictProject, Dataset, ResampleMode, SplitFractions,
};
use crate::encoder::{checkpoint, lr_sweep, TrainConfig, LR_SWEEP};
use crate::eval::{
    aggregate_runs, render_csv, render_table, weighted_average, ConfusionCounts, Metrics,
    ReportRow, WEIGHTED_ROW,
};
use crate::indicator::{mine_weights, sweep_thresholds, SweepGrid};
use crate::nli::{prepare_nli_pairs, NegativeMode, NliPair, VerbalizationCatalog};
use crate::registry::{
    CategoricalContext, ChatRuntime, ConflictContext, MethodRegistry, TaskKind, METHOD_CHATBOT,
    METHOD_INDICATOR, METHOD_NLI, METHOD_PER_CATEGORY, METHOD_PROMPT,
};
use crate::{Error, Result};

/// Full experiment description, loadable from a TOML file. Every section
/// has defaults, so a minimal file only names the task and method.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    pub split: SplitFractions,
    pub pairs: PairsSection,
    pub train: TrainConfig,
    pub resample: ResampleSection,
    pub indicator: IndicatorSection,
    pub conflicts: ConflictSection,
    pub chat: ChatSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub task: TaskKind,
    pub method: String,
    /// Number of seeds when `seeds` is not given: seed, seed+1, ...
    pub runs: usize,
    pub seed: u64,
    /// Explicit seed list; overrides `runs`/`seed`.
    pub seeds: Option<Vec<u64>>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            task: TaskKind::Classify,
            method: METHOD_NLI.to_string(),
            runs: 3,
            seed: 1,
            seeds: None,
            out_dir: PathBuf::from("runs"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub classification: PathBuf,
    pub defects: PathBuf,
    pub verbalizations: PathBuf,
    pub conflicts_dir: PathBuf,
    /// Conflict project names; `<name>_reqs.csv` and `<name>_pairs.csv`
    /// are expected under `conflicts_dir`.
    pub projects: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            classification: PathBuf::from("data/classification.csv"),
            defects: PathBuf::from("data/defects.csv"),
            verbalizations: PathBuf::from("data/verbalizations.csv"),
            conflicts_dir: PathBuf::from("data/conflicts"),
            projects: crate::synth::conflict_project_names()
                .into_iter()
                .map(str::to_string)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsSection {
    /// "all" or "sampled".
    pub negative_mode: String,
    /// Negatives per requirement when `negative_mode = "sampled"`.
    pub sampled_k: usize,
}

impl Default for PairsSection {
    fn default() -> Self {
        PairsSection {
            negative_mode: "all".into(),
            sampled_k: 3,
        }
    }
}

impl PairsSection {
    pub fn mode(&self) -> Result<NegativeMode> {
        match self.negative_mode.as_str() {
            "all" => Ok(NegativeMode::All),
            "sampled" => Ok(NegativeMode::Sampled(self.sampled_k)),
            other => Err(Error::Config(format!(
                "negative_mode must be \"all\" or \"sampled\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleSection {
    pub mode: ResampleMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicatorSection {
    pub classification_thresholds: Vec<f64>,
    pub indicator_thresholds: Vec<f64>,
    pub cv_folds: usize,
}

impl Default for IndicatorSection {
    fn default() -> Self {
        let grid = SweepGrid::default();
        IndicatorSection {
            classification_thresholds: grid.classification_thresholds,
            indicator_thresholds: grid.indicator_thresholds,
            cv_folds: 10,
        }
    }
}

impl IndicatorSection {
    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            classification_thresholds: self.classification_thresholds.clone(),
            indicator_thresholds: self.indicator_thresholds.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConflictSection {
    pub symmetry: SymmetryMode,
    /// "all" or a positive integer (negatives kept per positive).
    pub negative_policy: String,
    /// Optional subset of `data.projects` to evaluate.
    pub projects: Option<Vec<String>>,
}

impl Default for ConflictSection {
    fn default() -> Self {
        ConflictSection {
            symmetry: SymmetryMode::Max,
            negative_policy: "5".into(),
            projects: None,
        }
    }
}

impl ConflictSection {
    pub fn policy(&self) -> Result<NegativePolicy> {
        self.negative_policy.parse()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatSection {
    pub cache_dir: PathBuf,
}

impl Default for ChatSection {
    fn default() -> Self {
        ChatSection {
            cache_dir: PathBuf::from("chat-cache"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| {
            Error::Data(format!("cannot read config {}: {e}", path.display()))
        })?;
        Ok(toml::from_str(&raw)?)
    }

    /// Reject impossible settings before any work happens.
    pub fn validate(&self, registry: &MethodRegistry) -> Result<()> {
        let method = registry.get(&self.experiment.method)?;
        if !method.supports(self.experiment.task) {
            return Err(Error::InvalidArgument(format!(
                "method {:?} is not compatible with task {:?}",
                self.experiment.method,
                self.experiment.task.to_string()
            )));
        }
        self.validate_data_sections()
    }

    /// The section checks that hold regardless of task and method; the
    /// reproduction recipes use this because they pin their own pairings.
    pub fn validate_data_sections(&self) -> Result<()> {
        if self.experiment.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if matches!(&self.experiment.seeds, Some(s) if s.is_empty()) {
            return Err(Error::Config("seeds list must not be empty".into()));
        }
        self.split.validate()?;
        self.pairs.mode()?;
        self.conflicts.policy()?;
        if self.indicator.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }

    /// First 8 hex characters of the hash of the canonical serialized form;
    /// formatting differences in the source file do not change it.
    pub fn hash(&self) -> Result<String> {
        let canonical = toml::to_string(self)
            .map_err(|e| Error::Config(format!("config not serializable: {e}")))?;
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(8);
        for byte in &digest[..4] {
            out.push_str(&format!("{byte:02x}"));
        }
        Ok(out)
    }

    /// The seeds this experiment runs, in order.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.experiment.seeds {
            Some(s) => s.clone(),
            None => (0..self.experiment.runs as u64)
                .map(|i| self.experiment.seed + i)
                .collect(),
        }
    }
}

/// Persisted metadata for one seed's run. Timestamps live here and not in
/// the report files, which must stay byte-identical across repeats.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub record_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_at_unix: u64,
    pub finished_at_unix: u64,
    /// Files the run produced, relative to its directory.
    pub artifacts: Vec<String>,
    pub rows: Vec<ReportRow>,
}

/// One seed's outputs: the record, its report rows, and its directory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub rows: Vec<ReportRow>,
    pub dir: PathBuf,
}

/// A full experiment: per-seed outputs plus the aggregate report.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub per_seed: Vec<RunOutput>,
    pub aggregate_rows: Vec<ReportRow>,
    pub aggregate_dir: PathBuf,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_secs()
}

fn task_dataset(cfg: &ExperimentConfig, task: TaskKind) -> Result<Dataset> {
    match task {
        TaskKind::Classify => load_classification_csv(&cfg.data.classification),
        TaskKind::Defects => load_defect_csv(&cfg.data.defects),
        TaskKind::Conflicts => Err(Error::InvalidArgument(
            "the conflict task has no categorical dataset".into(),
        )),
    }
}

fn load_projects(cfg: &ExperimentConfig) -> Result<Vec<ConflictProject>> {
    let names: Vec<&String> = match &cfg.conflicts.projects {
        Some(subset) => subset.iter().collect(),
        None => cfg.data.projects.iter().collect(),
    };
    if names.is_empty() {
        return Err(Error::Config("no conflict projects configured".into()));
    }
    names
        .into_iter()
        .map(|name| {
            load_conflict_project(
                name,
                cfg.data.conflicts_dir.join(format!("{name}_reqs.csv")),
                cfg.data.conflicts_dir.join(format!("{name}_pairs.csv")),
            )
        })
        .collect()
}

fn verbalizations_for(cfg: &ExperimentConfig, task: TaskKind) -> Result<BTreeMap<String, String>> {
    Ok(VerbalizationCatalog::load(&cfg.data.verbalizations)?
        .for_task(&task.to_string())?
        .clone())
}

fn chat_runtime(cfg: &ExperimentConfig) -> Option<ChatRuntime> {
    ChatSettings::from_env().ok().map(|settings| ChatRuntime {
        settings,
        cache_dir: cfg.chat.cache_dir.clone(),
    })
}

fn rows_from_tables(
    method: &str,
    task: TaskKind,
    tables: &[(String, ConfusionCounts)],
) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(tables.len() + 1);
    let mut per_class = Vec::with_capacity(tables.len());
    for (category, counts) in tables {
        let metrics = counts.metrics();
        per_class.push(metrics);
        rows.push(ReportRow {
            method: method.to_string(),
            task: task.to_string(),
            category: category.clone(),
            metrics,
            runs: 1,
            stddev: 0.0,
        });
    }
    rows.push(ReportRow {
        method: method.to_string(),
        task: task.to_string(),
        category: WEIGHTED_ROW.to_string(),
        metrics: weighted_average(&per_class),
        runs: 1,
        stddev: 0.0,
    });
    rows
}

fn write_report(dir: &Path, title: &str, rows: &[ReportRow]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.csv"), render_csv(rows))?;
    fs::write(dir.join("report.txt"), render_table(title, rows))?;
    Ok(())
}

fn relative_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else if let Ok(rel) = path.strip_prefix(base) {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Execute one seed of the configured experiment and persist its artifacts.
pub fn run_single(
    cfg: &ExperimentConfig,
    registry: &MethodRegistry,
    seed: u64,
) -> Result<RunOutput> {
    let method = registry.get(&cfg.experiment.method)?;
    let task = cfg.experiment.task;
    let config_hash = cfg.hash()?;
    let record_id = format!("{config_hash}-s{seed}");
    let dir = cfg
        .experiment
        .out_dir
        .join(format!("{}-{}", task, method.name()))
        .join(&record_id);
    fs::create_dir_all(&dir)?;
    let started_at_unix = unix_now();

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    let chat = chat_runtime(cfg);

    let tables: Vec<(String, ConfusionCounts)> = match task {
        TaskKind::Conflicts => {
            let projects = load_projects(cfg)?;
            let ctx = ConflictContext {
                projects: &projects,
                train_cfg,
                negative_policy: cfg.conflicts.policy()?,
                symmetry: cfg.conflicts.symmetry,
                chat: chat.as_ref(),
                artifacts_dir: Some(&dir),
            };
            method
                .run_conflicts(&ctx)?
                .into_iter()
                .map(|o| (o.project, o.counts))
                .collect()
        }
        _ => {
            let dataset = task_dataset(cfg, task)?;
            let verbalizations = verbalizations_for(cfg, task)?;
            let splits = make_splits(&dataset.rows, cfg.split, seed)?;
            let ctx = CategoricalContext {
                task,
                splits: &splits,
                catalog: &dataset.catalog,
                verbalizations: &verbalizations,
                train_cfg,
                negative_mode: cfg.pairs.mode()?,
                resample: cfg.resample.mode,
                indicator_grid: cfg.indicator.grid(),
                cv_folds: cfg.indicator.cv_folds,
                chat: chat.as_ref(),
                artifacts_dir: Some(&dir),
            };
            method.run_categorical(&ctx)?
        }
    };

    let rows = rows_from_tables(method.name(), task, &tables);
    let title = format!("{} / {} / record {record_id}", task, method.name());
    write_report(&dir, &title, &rows)?;

    let record = RunRecord {
        record_id,
        config_hash,
        seed,
        started_at_unix,
        finished_at_unix: unix_now(),
        artifacts: relative_files(&dir)?,
        rows: rows.clone(),
    };
    let serialized = toml::to_string_pretty(&record)
        .map_err(|e| Error::Config(format!("record not serializable: {e}")))?;
    fs::write(dir.join("record.toml"), serialized)?;

    Ok(RunOutput { record, rows, dir })
}

/// Mean metrics per category across seeds, with the sample standard
/// deviation of F1 attached; the weighted row averages the per-seed
/// weighted rows.
pub fn aggregate_outputs(outputs: &[RunOutput]) -> Result<Vec<ReportRow>> {
    if outputs.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    let reference = &outputs[0].rows;
    let mut aggregated = Vec::with_capacity(reference.len());
    for (i, row) in reference.iter().enumerate() {
        let mut series: Vec<&Metrics> = Vec::with_capacity(outputs.len());
        for output in outputs {
            let peer = output.rows.get(i).ok_or_else(|| {
                Error::State("runs produced differing report shapes".into())
            })?;
            if peer.category != row.category {
                return Err(Error::State(format!(
                    "category order diverged across runs: {:?} vs {:?}",
                    peer.category, row.category
                )));
            }
            series.push(&peer.metrics);
        }
        let n = series.len() as f64;
        let mean = |f: fn(&Metrics) -> f64| series.iter().map(|m| f(m)).sum::<f64>() / n;
        let f1s: Vec<f64> = series.iter().map(|m| m.f1).collect();
        let (_, stddev) = aggregate_runs(&f1s)?;
        let support =
            (series.iter().map(|m| m.support).sum::<usize>() as f64 / n).round() as usize;
        aggregated.push(ReportRow {
            method: row.method.clone(),
            task: row.task.clone(),
            category: row.category.clone(),
            metrics: Metrics {
                precision: mean(|m| m.precision),
                recall: mean(|m| m.recall),
                f1: mean(|m| m.f1),
                accuracy: mean(|m| m.accuracy),
                support,
            },
            runs: outputs.len(),
            stddev,
        });
    }
    Ok(aggregated)
}

/// Run every configured seed, then write the aggregate report; `parallel`
/// runs seeds on separate threads (isolated run directories).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &MethodRegistry,
    parallel: bool,
) -> Result<ExperimentOutcome> {
    cfg.validate(registry)?;
    let seeds = cfg.seeds();

    let per_seed: Vec<RunOutput> = if parallel && seeds.len() > 1 {
        let results: Vec<Result<RunOutput>> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| scope.spawn(move || run_single(cfg, registry, seed)))
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::State("a run thread panicked".into())))
                })
                .collect()
        });
        results.into_iter().collect::<Result<Vec<_>>>()?
    } else {
        let mut outputs = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            outputs.push(run_single(cfg, registry, seed)?);
        }
        outputs
    };

    let aggregate_rows = aggregate_outputs(&per_seed)?;
    let config_hash = cfg.hash()?;
    let aggregate_dir = cfg
        .experiment
        .out_dir
        .join(format!(
            "{}-{}",
            cfg.experiment.task, cfg.experiment.method
        ))
        .join(format!("{config_hash}-aggregate"));
    let title = format!(
        "{} / {} / {} run(s), config {config_hash}",
        cfg.experiment.task,
        cfg.experiment.method,
        per_seed.len()
    );
    write_report(&aggregate_dir, &title, &aggregate_rows)?;
    let mut records = String::new();
    for output in &per_seed {
        records.push_str(&output.record.record_id);
        records.push('\n');
    }
    fs::write(aggregate_dir.join("records.txt"), records)?;

    Ok(ExperimentOutcome {
        per_seed,
        aggregate_rows,
        aggregate_dir,
    })
}

/// The three preconfigured reproduction recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReproTable {
    /// Category classification: every local method.
    T4,
    /// Defect detection: encoder methods (indicator terms excluded by
    /// default, the term-frequency approach was not applied there).
    T5,
    /// Zero-shot conflicts: entailment only.
    T7,
}

impl std::str::FromStr for ReproTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReproTable> {
        match s.to_ascii_lowercase().as_str() {
            "t4" => Ok(ReproTable::T4),
            "t5" => Ok(ReproTable::T5),
            "t7" => Ok(ReproTable::T7),
            other => Err(Error::InvalidArgument(format!(
                "unknown table {other:?} (expected t4, t5, or t7)"
            ))),
        }
    }
}

impl std::fmt::Display for ReproTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReproTable::T4 => "t4",
            ReproTable::T5 => "t5",
            ReproTable::T7 => "t7",
        })
    }
}

impl ReproTable {
    pub fn task(&self) -> TaskKind {
        match self {
            ReproTable::T4 => TaskKind::Classify,
            ReproTable::T5 => TaskKind::Defects,
            ReproTable::T7 => TaskKind::Conflicts,
        }
    }

    /// Locally runnable methods of the recipe, in report order.
    pub fn methods(&self) -> Vec<&'static str> {
        match self {
            ReproTable::T4 => vec![
                METHOD_NLI,
                METHOD_PER_CATEGORY,
                METHOD_PROMPT,
                METHOD_INDICATOR,
            ],
            ReproTable::T5 => vec![METHOD_NLI, METHOD_PER_CATEGORY, METHOD_PROMPT],
            ReproTable::T7 => vec![METHOD_NLI],
        }
    }
}

/// What a reproduction produced: one aggregate per method, plus notices for
/// anything skipped.
#[derive(Debug, Clone)]
pub struct ReproduceOutcome {
    pub table: ReproTable,
    pub combined_rows: Vec<ReportRow>,
    pub notices: Vec<String>,
    pub bundle_dir: PathBuf,
}

/// Run a table's recipe for every locally runnable method; chatbot rows
/// join only when credentials are present in the environment.
pub fn reproduce(
    table: ReproTable,
    base: &ExperimentConfig,
    registry: &MethodRegistry,
    parallel: bool,
) -> Result<ReproduceOutcome> {
    let bundle_dir = base.experiment.out_dir.join(table.to_string());
    fs::create_dir_all(&bundle_dir)?;

    let mut methods = table.methods();
    let mut notices = Vec::new();
    if ChatSettings::from_env().is_ok() {
        methods.push(METHOD_CHATBOT);
    } else {
        notices.push(format!(
            "chatbot: skipped (set {} to include live chatbot rows)",
            crate::chat::API_KEY_VAR
        ));
    }

    let mut combined_rows = Vec::new();
    for method in methods {
        let mut cfg = base.clone();
        cfg.experiment.task = table.task();
        cfg.experiment.method = method.to_string();
        cfg.experiment.out_dir = bundle_dir.clone();
        // the one-model-per-category baseline balances each binary
        // problem; the shared-encoder methods keep the configured mode
        if method == METHOD_PER_CATEGORY {
            cfg.resample.mode = ResampleMode::Oversample;
        }
        log::info!("reproducing {table}: {method}");
        let outcome = run_experiment(&cfg, registry, parallel)?;
        combined_rows.extend(outcome.aggregate_rows);
    }

    let title = format!("table {table} reproduction");
    fs::write(bundle_dir.join("report.csv"), render_csv(&combined_rows))?;
    let mut txt = render_table(&title, &combined_rows);
    for notice in &notices {
        txt.push_str(notice);
        txt.push('\n');
    }
    fs::write(bundle_dir.join("report.txt"), txt)?;

    Ok(ReproduceOutcome {
        table,
        combined_rows,
        notices,
        bundle_dir,
    })
}

/// Load the configured datasets and describe their shapes.
pub fn ingest_summary(cfg: &ExperimentConfig) -> Result<String> {
    let mut out = String::new();
    match cfg.experiment.task {
        TaskKind::Conflicts => {
            let projects = load_projects(cfg)?;
            let mut total_reqs = 0;
            let mut total_gold = 0;
            for p in &projects {
                out.push_str(&format!(
                    "{}: {} requirements, {} candidate pairs, {} gold conflicts\n",
                    p.name,
                    p.requirements.len(),
                    p.candidate_pair_count(),
                    p.gold_pairs.len()
                ));
                total_reqs += p.requirements.len();
                total_gold += p.gold_pairs.len();
            }
            out.push_str(&format!(
                "total: {} projects, {} requirements, {} gold conflicts\n",
                projects.len(),
                total_reqs,
                total_gold
            ));
        }
        task => {
            let dataset = task_dataset(cfg, task)?;
            let verbalizations = verbalizations_for(cfg, task)?;
            for (category, count) in dataset.category_counts() {
                let verbalized = if verbalizations.contains_key(&category) {
                    "verbalized"
                } else {
                    "NO VERBALIZATION"
                };
                out.push_str(&format!("{category}: {count} rows ({verbalized})\n"));
            }
            out.push_str(&format!(
                "total: {} rows, {} categories\n",
                dataset.rows.len(),
                dataset.catalog.len()
            ));
        }
    }
    Ok(out)
}

fn pair_stats(pairs: &[NliPair]) -> (usize, usize) {
    let positives = pairs.iter().filter(|p| p.label == 1).count();
    (pairs.len(), positives)
}

/// Build the configured task's pair sets for one seed and write audit dumps
/// under `<out_dir>/pairs/`.
pub fn prepare_pairs(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let dir = cfg.experiment.out_dir.join("pairs");
    fs::create_dir_all(&dir)?;
    let mut out = String::new();
    match cfg.experiment.task {
        TaskKind::Conflicts => {
            let projects = load_projects(cfg)?;
            for project in &projects {
                let pairs: Vec<NliPair> = crate::conflict::candidate_samples(project)
                    .into_iter()
                    .map(|s| NliPair {
                        premise: s.premise,
                        hypothesis: s.hypothesis,
                        label: s.label,
                        req_id: format!("{}~{}", s.id_a, s.id_b),
                        category: s.project,
                    })
                    .collect();
                let path = dir.join(format!("{}_candidates.csv", project.name));
                crate::nli::write_pair_dump(&path, &pairs)?;
                let (n, pos) = pair_stats(&pairs);
                out.push_str(&format!(
                    "{}: {n} candidate pairs ({pos} conflicting) -> {}\n",
                    project.name,
                    path.display()
                ));
            }
        }
        task => {
            let dataset = task_dataset(cfg, task)?;
            let verbalizations = crate::registry::catalog_verbalizations(
                &dataset.catalog,
                &verbalizations_for(cfg, task)?,
            )?;
            let splits = make_splits(&dataset.rows, cfg.split, seed)?;
            let mode = cfg.pairs.mode()?;
            // the validation and test dumps always use the full catalog so
            // per-category evaluation is well defined
            for (name, rows, split_mode) in [
                ("train", &splits.train, mode),
                ("val", &splits.val, NegativeMode::All),
                ("test", &splits.test, NegativeMode::All),
            ] {
                let pairs = prepare_nli_pairs(rows, &verbalizations, split_mode, seed)?;
                let path = dir.join(format!("{name}_pairs.csv"));
                crate::nli::write_pair_dump(&path, &pairs)?;
                let (n, pos) = pair_stats(&pairs);
                out.push_str(&format!(
                    "{name}: {} rows -> {n} pairs ({pos} entailing) -> {}\n",
                    rows.len(),
                    path.display()
                ));
            }
        }
    }
    Ok(out)
}

/// Fit the configured method on one seed, save its artifacts, and describe
/// what was produced. The chatbot method has no training stage.
pub fn train_single(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    let out_dir = &cfg.experiment.out_dir;
    let method = cfg.experiment.method.as_str();
    let task = cfg.experiment.task;
    let mut out = String::new();

    if method == METHOD_CHATBOT {
        return Err(Error::InvalidArgument(
            "the chatbot method has no training stage; run evaluate instead".into(),
        ));
    }

    if task == TaskKind::Conflicts {
        if method != METHOD_NLI {
            return Err(Error::InvalidArgument(format!(
                "method {method:?} is not compatible with task \"conflicts\""
            )));
        }
        let projects = load_projects(cfg)?;
        let model = crate::conflict::train_pooled(
            &projects,
            train_cfg,
            cfg.conflicts.policy()?,
            cfg.conflicts.symmetry,
        )?;
        let dir = out_dir.join(format!("models/nli/conflicts-pooled/{seed}"));
        checkpoint::save(model.encoder(), &dir)?;
        let report = model.encoder().report()?;
        out.push_str(&format!(
            "conflict model: best epoch {} (val loss {:.6}) -> {}\n",
            report.best_epoch,
            report.best_val_loss,
            dir.display()
        ));
        return Ok(out);
    }

    let dataset = task_dataset(cfg, task)?;
    let splits = make_splits(&dataset.rows, cfg.split, seed)?;
    match method {
        METHOD_NLI | METHOD_PROMPT => {
            let verbalizations = crate::registry::catalog_verbalizations(
                &dataset.catalog,
                &verbalizations_for(cfg, task)?,
            )?;
            let train_rows = resample_training(&splits.train, cfg.resample.mode, seed);
            let model = if method == METHOD_NLI {
                crate::nli::train_nli(
                    &train_rows,
                    &splits.val,
                    &verbalizations,
                    train_cfg,
                    cfg.pairs.mode()?,
                )?
            } else {
                crate::baselines::train_prompt(
                    &train_rows,
                    &splits.val,
                    &dataset.catalog,
                    train_cfg,
                    cfg.pairs.mode()?,
                )?
            };
            let dir = out_dir.join(format!("models/{method}/shared/{seed}"));
            checkpoint::save(model.encoder(), &dir)?;
            let report = model.report()?;
            out.push_str(&format!(
                "{method}: best epoch {} (val loss {:.6}) -> {}\n",
                report.best_epoch,
                report.best_val_loss,
                dir.display()
            ));
        }
        METHOD_PER_CATEGORY => {
            let model = crate::baselines::train_per_category(
                &splits.train,
                &splits.val,
                &dataset.catalog,
                train_cfg,
                cfg.resample.mode,
            )?;
            for category in model.categories() {
                let encoder = model.encoder(category)?;
                let dir = out_dir.join(format!(
                    "models/per_category/{}/{seed}",
                    crate::registry::slug(category)
                ));
                checkpoint::save(encoder, &dir)?;
                let report = encoder.report()?;
                out.push_str(&format!(
                    "{category}: best epoch {} (val loss {:.6}) -> {}\n",
                    report.best_epoch,
                    report.best_val_loss,
                    dir.display()
                ));
            }
            for category in model.skipped() {
                out.push_str(&format!("{category}: skipped (no positive training rows)\n"));
            }
        }
        METHOD_INDICATOR => {
            let mut pool = splits.train.clone();
            pool.extend(splits.val.iter().cloned());
            let choice = sweep_thresholds(
                &pool,
                &dataset.catalog,
                &cfg.indicator.grid(),
                cfg.indicator.cv_folds,
                seed,
            )?;
            let weights = mine_weights(&pool, choice.indicator_threshold)?;
            fs::create_dir_all(out_dir)?;
            let path = out_dir.join("indicator_terms.csv");
            weights.export_csv(&path)?;
            out.push_str(&format!(
                "indicator terms: classification threshold {}, indicator threshold {} (cv weighted F1 {:.4}) -> {}\n",
                choice.classification_threshold,
                choice.indicator_threshold,
                choice.mean_weighted_f1,
                path.display()
            ));
        }
        other => {
            return Err(Error::Reference(format!("unknown method {other:?}")));
        }
    }
    Ok(out)
}

/// Hyperparameter sweep for the configured method: learning rates for
/// encoder methods, the threshold grid for indicator terms.
pub fn sweep_report(cfg: &ExperimentConfig, seed: u64) -> Result<String> {
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seed;
    let task = cfg.experiment.task;
    let method = cfg.experiment.method.as_str();
    let mut out = String::new();

    match method {
        METHOD_INDICATOR => {
            let dataset = task_dataset(cfg, task)?;
            let splits = make_splits(&dataset.rows, cfg.split, seed)?;
            let mut pool = splits.train.clone();
            pool.extend(splits.val.iter().cloned());
            let choice = sweep_thresholds(
                &pool,
                &dataset.catalog,
                &cfg.indicator.grid(),
                cfg.indicator.cv_folds,
                seed,
            )?;
            out.push_str(&format!(
                "chosen: classification threshold {}, indicator threshold {} (cv weighted F1 {:.4})\n",
                choice.classification_threshold, choice.indicator_threshold, choice.mean_weighted_f1
            ));
        }
        METHOD_NLI | METHOD_PROMPT => {
            let dataset = task_dataset(cfg, task)?;
            let splits = make_splits(&dataset.rows, cfg.split, seed)?;
            let train_rows = resample_training(&splits.train, cfg.resample.mode, seed);
            let hypotheses: BTreeMap<String, String> = if method == METHOD_NLI {
                crate::registry::catalog_verbalizations(
                    &dataset.catalog,
                    &verbalizations_for(cfg, task)?,
                )?
            } else {
                crate::baselines::prompt_map(&dataset.catalog)?
            };
            let train = prepare_nli_pairs(&train_rows, &hypotheses, cfg.pairs.mode()?, seed)?;
            let val = prepare_nli_pairs(&splits.val, &hypotheses, NegativeMode::All, seed)?;
            let to_labeled = |pairs: &[NliPair]| {
                pairs.iter().map(NliPair::to_labeled).collect::<Vec<_>>()
            };
            let (chosen, entries) =
                lr_sweep(&to_labeled(&train), &to_labeled(&val), &train_cfg, &LR_SWEEP)?;
            for e in &entries {
                out.push_str(&format!(
                    "lr {:>8.0e}: final val loss {:.6}, best val loss {:.6}\n",
                    e.lr, e.final_val_loss, e.best_val_loss
                ));
            }
            out.push_str(&format!("chosen: lr {chosen:.0e} (lowest final validation loss)\n"));
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "method {other:?} has no sweep stage"
            )));
        }
    }
    Ok(out)
}
