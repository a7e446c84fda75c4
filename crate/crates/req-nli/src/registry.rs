//! Strategy registry: each evaluation method implements the `Method` trait
//! and is registered by name, so tasks select methods at runtime and new
//! methods plug in without touching the orchestration code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{train_per_category, train_prompt};
use crate::chat::{
    classification_sample_id, conflict_sample_id, run_batch, ChatClient, ChatSettings,
    PromptTemplate, Verdict,
};
use crate::conflict::{
    candidate_samples, run_zero_shot, FoldOutcome, NegativePolicy, PredictionRow, SymmetryMode,
};
use crate::corpus::{resample_training, ConflictProject, ResampleMode, Splits};
use crate::encoder::{checkpoint, TrainConfig};
use crate::eval::ConfusionCounts;
use crate::indicator::{evaluate_split, mine_weights, sweep_thresholds, SweepGrid};
use crate::nli::{evaluate_per_category, train_nli, NegativeMode, CLASSIFY_THRESHOLD};
use crate::{Error, Result};

/// The three benchmark tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classify,
    Defects,
    Conflicts,
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<TaskKind> {
        match s.to_ascii_lowercase().as_str() {
            "classify" => Ok(TaskKind::Classify),
            "defects" => Ok(TaskKind::Defects),
            "conflicts" => Ok(TaskKind::Conflicts),
            other => Err(Error::InvalidArgument(format!(
                "unknown task {other:?} (expected classify, defects, or conflicts)"
            ))),
        }
    }
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::Classify => "classify",
            TaskKind::Defects => "defects",
            TaskKind::Conflicts => "conflicts",
        })
    }
}

/// Chat credentials plus the response cache location.
pub struct ChatRuntime {
    pub settings: ChatSettings,
    pub cache_dir: PathBuf,
}

/// Everything a method needs to run a categorical task (classification or
/// defect detection).
pub struct CategoricalContext<'a> {
    pub task: TaskKind,
    pub splits: &'a Splits,
    /// Category universe of the dataset, the per-class evaluation axis.
    pub catalog: &'a [String],
    /// Category descriptions for hypothesis construction.
    pub verbalizations: &'a BTreeMap<String, String>,
    pub train_cfg: TrainConfig,
    pub negative_mode: NegativeMode,
    pub resample: ResampleMode,
    pub indicator_grid: SweepGrid,
    pub cv_folds: usize,
    pub chat: Option<&'a ChatRuntime>,
    /// When set, methods persist checkpoints and auxiliary files here.
    pub artifacts_dir: Option<&'a Path>,
}

/// Everything a method needs for the conflict task.
pub struct ConflictContext<'a> {
    pub projects: &'a [ConflictProject],
    pub train_cfg: TrainConfig,
    pub negative_policy: NegativePolicy,
    pub symmetry: SymmetryMode,
    pub chat: Option<&'a ChatRuntime>,
    pub artifacts_dir: Option<&'a Path>,
}

/// One evaluation method, selectable by name.
///
/// `Send + Sync` so independent runs can share the registry across threads.
pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;

    fn supports(&self, task: TaskKind) -> bool;

    /// Per-category confusion tables on the test split.
    fn run_categorical(&self, _ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        Err(Error::InvalidArgument(format!(
            "method {:?} does not handle categorical tasks",
            self.name()
        )))
    }

    /// One outcome per leave-one-project-out fold.
    fn run_conflicts(&self, _ctx: &ConflictContext) -> Result<Vec<FoldOutcome>> {
        Err(Error::InvalidArgument(format!(
            "method {:?} does not handle the conflict task",
            self.name()
        )))
    }
}

pub const METHOD_NLI: &str = "nli";
pub const METHOD_PER_CATEGORY: &str = "per_category";
pub const METHOD_PROMPT: &str = "prompt";
pub const METHOD_CHATBOT: &str = "chatbot";
pub const METHOD_INDICATOR: &str = "indicator_terms";

/// Name-keyed method lookup.
pub struct MethodRegistry {
    methods: BTreeMap<&'static str, Box<dyn Method>>,
}

impl MethodRegistry {
    /// All five built-in methods.
    pub fn standard() -> MethodRegistry {
        let mut registry = MethodRegistry {
            methods: BTreeMap::new(),
        };
        for method in [
            Box::new(NliMethod) as Box<dyn Method>,
            Box::new(PerCategoryMethod),
            Box::new(PromptMethod),
            Box::new(ChatbotMethod),
            Box::new(IndicatorMethod),
        ] {
            registry.register(method).expect("built-in names are unique");
        }
        registry
    }

    pub fn register(&mut self, method: Box<dyn Method>) -> Result<()> {
        let name = method.name();
        if self.methods.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "method {name:?} is already registered"
            )));
        }
        self.methods.insert(name, method);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods.get(name).map(Box::as_ref).ok_or_else(|| {
            Error::Reference(format!(
                "unknown method {name:?} (available: {:?})",
                self.names()
            ))
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }
}

/// Filesystem-safe directory name for a category.
pub fn slug(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    let mut last_dash = true;
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
            last_dash = false;
        } else if !last_dash {
            out.push('-');
            last_dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        "unnamed".into()
    } else {
        out
    }
}

/// Restrict the verbalization table to the dataset's catalog so pairing is
/// driven by the data, not by extra catalog entries.
pub fn catalog_verbalizations(
    catalog: &[String],
    verbalizations: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for category in catalog {
        match verbalizations.get(category) {
            Some(d) => {
                out.insert(category.clone(), d.clone());
            }
            None => missing.push(category.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Reference(format!(
            "no verbalizations for categories: {missing:?}"
        )));
    }
    Ok(out)
}

fn model_dir(artifacts: &Path, method: &str, bucket: &str, seed: u64) -> PathBuf {
    artifacts
        .join("models")
        .join(method)
        .join(bucket)
        .join(seed.to_string())
}

struct NliMethod;

impl Method for NliMethod {
    fn name(&self) -> &'static str {
        METHOD_NLI
    }

    fn supports(&self, _task: TaskKind) -> bool {
        true
    }

    fn run_categorical(&self, ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        let verbs = catalog_verbalizations(ctx.catalog, ctx.verbalizations)?;
        let train_rows =
            resample_training(&ctx.splits.train, ctx.resample, ctx.train_cfg.seed);
        let model = train_nli(
            &train_rows,
            &ctx.splits.val,
            &verbs,
            ctx.train_cfg.clone(),
            ctx.negative_mode,
        )?;
        if let Some(dir) = ctx.artifacts_dir {
            checkpoint::save(
                model.encoder(),
                &model_dir(dir, self.name(), "shared", ctx.train_cfg.seed),
            )?;
        }
        evaluate_per_category(
            |text, category| model.proba(text, category),
            &ctx.splits.test,
            ctx.catalog,
            CLASSIFY_THRESHOLD,
        )
    }

    fn run_conflicts(&self, ctx: &ConflictContext) -> Result<Vec<FoldOutcome>> {
        let outcomes = run_zero_shot(
            ctx.projects,
            ctx.train_cfg.clone(),
            ctx.negative_policy,
            ctx.symmetry,
        )?;
        write_fold_predictions(ctx.artifacts_dir, &outcomes)?;
        Ok(outcomes)
    }
}

struct PerCategoryMethod;

impl Method for PerCategoryMethod {
    fn name(&self) -> &'static str {
        METHOD_PER_CATEGORY
    }

    fn supports(&self, task: TaskKind) -> bool {
        task != TaskKind::Conflicts
    }

    fn run_categorical(&self, ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        let model = train_per_category(
            &ctx.splits.train,
            &ctx.splits.val,
            ctx.catalog,
            ctx.train_cfg.clone(),
            ctx.resample,
        )?;
        if let Some(dir) = ctx.artifacts_dir {
            for category in model.categories() {
                checkpoint::save(
                    model.encoder(category)?,
                    &model_dir(dir, self.name(), &slug(category), ctx.train_cfg.seed),
                )?;
            }
        }
        evaluate_per_category(
            |text, category| model.proba(text, category),
            &ctx.splits.test,
            ctx.catalog,
            CLASSIFY_THRESHOLD,
        )
    }
}

struct PromptMethod;

impl Method for PromptMethod {
    fn name(&self) -> &'static str {
        METHOD_PROMPT
    }

    fn supports(&self, task: TaskKind) -> bool {
        task != TaskKind::Conflicts
    }

    fn run_categorical(&self, ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        let train_rows =
            resample_training(&ctx.splits.train, ctx.resample, ctx.train_cfg.seed);
        let model = train_prompt(
            &train_rows,
            &ctx.splits.val,
            ctx.catalog,
            ctx.train_cfg.clone(),
            ctx.negative_mode,
        )?;
        if let Some(dir) = ctx.artifacts_dir {
            checkpoint::save(
                model.encoder(),
                &model_dir(dir, self.name(), "shared", ctx.train_cfg.seed),
            )?;
        }
        evaluate_per_category(
            |text, category| model.proba(text, category),
            &ctx.splits.test,
            ctx.catalog,
            CLASSIFY_THRESHOLD,
        )
    }
}

struct IndicatorMethod;

impl Method for IndicatorMethod {
    fn name(&self) -> &'static str {
        METHOD_INDICATOR
    }

    fn supports(&self, task: TaskKind) -> bool {
        task != TaskKind::Conflicts
    }

    /// Thresholds come from cross-validated sweeping over the pooled
    /// train+val rows; the test split stays untouched until the final
    /// evaluation. No resampling: the weight formula is built from raw
    /// frequency ratios.
    fn run_categorical(&self, ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        let mut pool = ctx.splits.train.clone();
        pool.extend(ctx.splits.val.iter().cloned());
        let choice = sweep_thresholds(
            &pool,
            ctx.catalog,
            &ctx.indicator_grid,
            ctx.cv_folds,
            ctx.train_cfg.seed,
        )?;
        if let Some(dir) = ctx.artifacts_dir {
            let weights = mine_weights(&pool, choice.indicator_threshold)?;
            std::fs::create_dir_all(dir)?;
            weights.export_csv(dir.join("indicator_terms.csv"))?;
        }
        evaluate_split(
            &pool,
            &ctx.splits.test,
            ctx.catalog,
            choice.classification_threshold,
            choice.indicator_threshold,
        )
    }
}

struct ChatbotMethod;

impl Method for ChatbotMethod {
    fn name(&self) -> &'static str {
        METHOD_CHATBOT
    }

    fn supports(&self, _task: TaskKind) -> bool {
        true
    }

    /// Queries the endpoint once per (test row, category); a yes verdict
    /// predicts membership, anything else (no or unparseable) does not.
    fn run_categorical(&self, ctx: &CategoricalContext) -> Result<Vec<(String, ConfusionCounts)>> {
        let runtime = ctx.chat.ok_or_else(|| {
            Error::External("chatbot method needs credentials (set CHAT_API_KEY)".into())
        })?;
        let verbs = catalog_verbalizations(ctx.catalog, ctx.verbalizations)?;
        let template = PromptTemplate::classification();
        let mut jobs = Vec::new();
        for row in &ctx.splits.test {
            for category in ctx.catalog {
                jobs.push((
                    classification_sample_id(&row.id, category),
                    template.render_classification(category, &verbs[category], &row.text)?,
                ));
            }
        }
        let mut client = ChatClient::new(runtime.settings.clone(), &runtime.cache_dir);
        let outcome = run_batch(&mut client, &template.content_hash(), &jobs);
        write_failure_manifest(ctx.artifacts_dir, &outcome.failures)?;

        let mut tables: Vec<(String, ConfusionCounts)> = ctx
            .catalog
            .iter()
            .map(|c| (c.clone(), ConfusionCounts::default()))
            .collect();
        let mut verdicts = outcome.verdicts.iter();
        for row in &ctx.splits.test {
            for (category, table) in tables.iter_mut() {
                let verdict = verdicts.next().expect("one verdict per job").verdict;
                table.observe(&row.category == category, verdict == Verdict::Yes);
            }
        }
        Ok(tables)
    }

    /// Zero-shot by construction: every candidate pair is asked directly.
    fn run_conflicts(&self, ctx: &ConflictContext) -> Result<Vec<FoldOutcome>> {
        let runtime = ctx.chat.ok_or_else(|| {
            Error::External("chatbot method needs credentials (set CHAT_API_KEY)".into())
        })?;
        let template = PromptTemplate::conflict();
        let mut client = ChatClient::new(runtime.settings.clone(), &runtime.cache_dir);
        let mut outcomes = Vec::new();
        let mut failures = Vec::new();
        for project in ctx.projects {
            let samples = candidate_samples(project);
            let mut jobs = Vec::with_capacity(samples.len());
            for s in &samples {
                jobs.push((
                    conflict_sample_id(&s.project, &s.id_a, &s.id_b),
                    template.render_conflict(&s.premise, &s.hypothesis)?,
                ));
            }
            let batch = run_batch(&mut client, &template.content_hash(), &jobs);
            failures.extend(batch.failures);
            let mut counts = ConfusionCounts::default();
            let mut predictions = Vec::with_capacity(samples.len());
            for (s, v) in samples.iter().zip(&batch.verdicts) {
                let predicted = v.verdict == Verdict::Yes;
                let gold = s.label == 1;
                counts.observe(gold, predicted);
                predictions.push(PredictionRow {
                    project: s.project.clone(),
                    id_a: s.id_a.clone(),
                    id_b: s.id_b.clone(),
                    probability: if predicted { 1.0 } else { 0.0 },
                    predicted,
                    gold,
                });
            }
            predictions.sort_by(|x, y| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)));
            outcomes.push(FoldOutcome {
                project: project.name.clone(),
                counts,
                predictions,
            });
        }
        write_failure_manifest(ctx.artifacts_dir, &failures)?;
        write_fold_predictions(ctx.artifacts_dir, &outcomes)?;
        Ok(outcomes)
    }
}

fn write_fold_predictions(dir: Option<&Path>, outcomes: &[FoldOutcome]) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    let predictions_dir = dir.join("predictions");
    std::fs::create_dir_all(&predictions_dir)?;
    for outcome in outcomes {
        crate::conflict::write_predictions_csv(
            predictions_dir.join(format!("{}.csv", slug(&outcome.project))),
            &outcome.predictions,
        )?;
    }
    Ok(())
}

fn write_failure_manifest(dir: Option<&Path>, failures: &[(String, String)]) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    if failures.is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(dir)?;
    let mut writer = csv::Writer::from_path(dir.join("chat_failures.csv"))?;
    writer.write_record(["sample_id", "error"])?;
    for (id, error) in failures {
        writer.write_record([id.as_str(), error.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Requirement;

    #[test]
    fn standard_registry_lists_all_methods() {
        let registry = MethodRegistry::standard();
        assert_eq!(
            registry.names(),
            vec!["chatbot", "indicator_terms", "nli", "per_category", "prompt"]
        );
        assert!(registry.get("nli").is_ok());
        let Err(err) = registry.get("svm") else {
            panic!("unknown method must not resolve");
        };
        assert!(matches!(err, Error::Reference(_)));
        assert!(err.to_string().contains("nli"));
    }

    #[test]
    fn duplicate_registration_is_rejected() {
        let mut registry = MethodRegistry::standard();
        assert!(matches!(
            registry.register(Box::new(NliMethod)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn compatibility_matrix_limits_conflicts_to_nli_and_chatbot() {
        let registry = MethodRegistry::standard();
        for (name, conflicts_ok) in [
            ("nli", true),
            ("chatbot", true),
            ("per_category", false),
            ("prompt", false),
            ("indicator_terms", false),
        ] {
            let m = registry.get(name).unwrap();
            assert!(m.supports(TaskKind::Classify), "{name} must support classify");
            assert!(m.supports(TaskKind::Defects), "{name} must support defects");
            assert_eq!(m.supports(TaskKind::Conflicts), conflicts_ok, "{name} conflicts support");
        }
    }

    #[test]
    fn slugs_are_filesystem_safe() {
        assert_eq!(slug("Look & Feel"), "look-feel");
        assert_eq!(slug("Fault Tolerance"), "fault-tolerance");
        assert_eq!(slug("Security"), "security");
        assert_eq!(slug("***"), "unnamed");
    }

    #[test]
    fn indicator_method_runs_through_the_trait() {
        let mk = |id: &str, text: &str, cat: &str| Requirement {
            id: id.into(),
            text: text.into(),
            category: cat.into(),
        };
        let mut train = Vec::new();
        for i in 0..10 {
            train.push(mk(
                &format!("p{i}"),
                "the system workload capacity grows elastically",
                "Performance",
            ));
            train.push(mk(
                &format!("s{i}"),
                "the system encrypts credentials before storage",
                "Security",
            ));
        }
        let splits = Splits {
            train,
            val: vec![
                mk("v1", "workload capacity grows elastically", "Performance"),
                mk("v2", "encrypts credentials before storage", "Security"),
            ],
            test: vec![
                mk("t1", "the workload capacity grows", "Performance"),
                mk("t2", "the system encrypts credentials", "Security"),
            ],
        };
        let catalog = vec!["Performance".to_string(), "Security".to_string()];
        let verbalizations: BTreeMap<String, String> = catalog
            .iter()
            .map(|c| (c.clone(), format!("This requirement describes {c}.")))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let ctx = CategoricalContext {
            task: TaskKind::Classify,
            splits: &splits,
            catalog: &catalog,
            verbalizations: &verbalizations,
            train_cfg: TrainConfig::default(),
            negative_mode: NegativeMode::All,
            resample: ResampleMode::None,
            indicator_grid: SweepGrid::default(),
            cv_folds: 4,
            chat: None,
            artifacts_dir: Some(dir.path()),
        };
        let registry = MethodRegistry::standard();
        let tables = registry
            .get(METHOD_INDICATOR)
            .unwrap()
            .run_categorical(&ctx)
            .unwrap();
        assert_eq!(tables.len(), 2);
        let total: usize = tables.iter().map(|(_, t)| t.total()).sum();
        assert_eq!(total, 4);
        assert!(dir.path().join("indicator_terms.csv").exists());
        // conflict entry point rejects categorical-only methods
        assert!(registry
            .get(METHOD_INDICATOR)
            .unwrap()
            .run_conflicts(&ConflictContext {
                projects: &[],
                train_cfg: TrainConfig::default(),
                negative_policy: NegativePolicy::default(),
                symmetry: SymmetryMode::Max,
                chat: None,
                artifacts_dir: None,
            })
            .is_err());
    }

    #[test]
    fn chatbot_method_requires_credentials() {
        let splits = Splits {
            train: vec![],
            val: vec![],
            test: vec![],
        };
        let catalog = vec!["Security".to_string()];
        let verbalizations: BTreeMap<String, String> =
            [("Security".to_string(), "Protects things.".to_string())].into();
        let ctx = CategoricalContext {
            task: TaskKind::Classify,
            splits: &splits,
            catalog: &catalog,
            verbalizations: &verbalizations,
            train_cfg: TrainConfig::default(),
            negative_mode: NegativeMode::All,
            resample: ResampleMode::None,
            indicator_grid: SweepGrid::default(),
            cv_folds: 10,
            chat: None,
            artifacts_dir: None,
        };
        let registry = MethodRegistry::standard();
        assert!(matches!(
            registry.get(METHOD_CHATBOT).unwrap().run_categorical(&ctx),
            Err(Error::External(_))
        ));
    }
}
