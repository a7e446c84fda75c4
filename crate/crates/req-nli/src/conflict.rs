//! Conflict detection as requirement-vs-requirement entailment with
//! leave-one-project-out zero-shot evaluation: every fold trains on the
//! other projects' pairs only and a leakage guard hard-aborts if anything
//! from the held-out project reaches the training side.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::ConflictProject;
use crate::encoder::{Encoder, LabeledPair, TrainConfig};
use crate::eval::ConfusionCounts;
use crate::nli::CLASSIFY_THRESHOLD;
use crate::rng;
use crate::{Error, Result};

/// One candidate pair in canonical id order; label 1 means gold conflict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictSample {
    pub project: String,
    pub id_a: String,
    pub id_b: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: u8,
}

/// How many non-conflicting pairs to keep per conflicting one when
/// preparing a training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativePolicy {
    /// Keep every candidate pair.
    All,
    /// Keep a seeded sample of `ratio * positives` negatives.
    Ratio(u32),
}

impl Default for NegativePolicy {
    fn default() -> Self {
        NegativePolicy::Ratio(5)
    }
}

impl std::str::FromStr for NegativePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<NegativePolicy> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(NegativePolicy::All);
        }
        let ratio: u32 = s.parse().map_err(|_| {
            Error::InvalidArgument(format!(
                "negative policy must be \"all\" or a positive integer ratio, got {s:?}"
            ))
        })?;
        if ratio == 0 {
            return Err(Error::InvalidArgument(
                "negative ratio must be at least 1".into(),
            ));
        }
        Ok(NegativePolicy::Ratio(ratio))
    }
}

/// How a pair is scored given that conflict is an unordered relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryMode {
    /// Larger of the two direction scores.
    #[default]
    Max,
    /// Mean of the two direction scores.
    Avg,
    /// Canonical direction only.
    ForwardOnly,
}

impl std::str::FromStr for SymmetryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<SymmetryMode> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(SymmetryMode::Max),
            "avg" => Ok(SymmetryMode::Avg),
            "forward_only" => Ok(SymmetryMode::ForwardOnly),
            other => Err(Error::InvalidArgument(format!(
                "unknown symmetry mode {other:?} (expected max, avg, or forward_only)"
            ))),
        }
    }
}

impl std::fmt::Display for SymmetryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SymmetryMode::Max => "max",
            SymmetryMode::Avg => "avg",
            SymmetryMode::ForwardOnly => "forward_only",
        })
    }
}

/// Every unordered pair of the project's requirements, canonical id order,
/// labeled 1 when the pair is a gold conflict.
pub fn candidate_samples(project: &ConflictProject) -> Vec<ConflictSample> {
    let reqs = &project.requirements;
    let mut out = Vec::with_capacity(project.candidate_pair_count());
    for i in 0..reqs.len() {
        for j in (i + 1)..reqs.len() {
            let (mut a, mut b) = (&reqs[i], &reqs[j]);
            if a.id > b.id {
                std::mem::swap(&mut a, &mut b);
            }
            out.push(ConflictSample {
                project: project.name.clone(),
                id_a: a.id.clone(),
                id_b: b.id.clone(),
                premise: a.text.clone(),
                hypothesis: b.text.clone(),
                label: u8::from(project.is_gold(&a.id, &b.id)),
            });
        }
    }
    out
}

/// Keep all positives and a seeded sample of negatives per the policy.
pub fn downsample_negatives(
    samples: &[ConflictSample],
    policy: NegativePolicy,
    seed: u64,
) -> Vec<ConflictSample> {
    let ratio = match policy {
        NegativePolicy::All => return samples.to_vec(),
        NegativePolicy::Ratio(r) => r as usize,
    };
    let positives: Vec<&ConflictSample> = samples.iter().filter(|s| s.label == 1).collect();
    let negatives: Vec<&ConflictSample> = samples.iter().filter(|s| s.label == 0).collect();
    let keep = (positives.len() * ratio).min(negatives.len());
    let mut rng = rng::seeded("conflict-negatives", seed, b"");
    let picks = rand::seq::index::sample(&mut rng, negatives.len(), keep);
    let kept: BTreeSet<usize> = picks.iter().collect();
    let mut out: Vec<ConflictSample> = samples
        .iter()
        .filter(|s| s.label == 0)
        .enumerate()
        .filter(|(i, _)| kept.contains(i))
        .map(|(_, s)| s.clone())
        .collect();
    out.extend(positives.into_iter().cloned());
    out.sort_by(|x, y| (&x.project, &x.id_a, &x.id_b).cmp(&(&y.project, &y.id_a, &y.id_b)));
    out
}

/// Hard abort if any sample references the held-out project.
pub fn verify_no_leakage(samples: &[ConflictSample], holdout: &str) -> Result<()> {
    let leaked = samples.iter().filter(|s| s.project == holdout).count();
    if leaked > 0 {
        return Err(Error::State(format!(
            "{leaked} training sample(s) reference held-out project {holdout:?}; refusing to train"
        )));
    }
    Ok(())
}

/// A fitted pair scorer with its symmetry policy.
pub struct ConflictModel {
    encoder: Encoder,
    symmetry: SymmetryMode,
}

impl ConflictModel {
    pub fn new(encoder: Encoder, symmetry: SymmetryMode) -> ConflictModel {
        ConflictModel { encoder, symmetry }
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Conflict probability for an unordered pair of requirement texts.
    pub fn score(&self, text_a: &str, text_b: &str) -> Result<f64> {
        let forward = self.encoder.predict_proba(text_a, text_b)?;
        match self.symmetry {
            SymmetryMode::ForwardOnly => Ok(forward),
            SymmetryMode::Max => Ok(forward.max(self.encoder.predict_proba(text_b, text_a)?)),
            SymmetryMode::Avg => {
                Ok(0.5 * (forward + self.encoder.predict_proba(text_b, text_a)?))
            }
        }
    }

    pub fn predict(&self, text_a: &str, text_b: &str) -> Result<bool> {
        Ok(self.score(text_a, text_b)? >= CLASSIFY_THRESHOLD)
    }
}

/// One scored holdout pair as written to the predictions CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub project: String,
    pub id_a: String,
    pub id_b: String,
    pub probability: f64,
    pub predicted: bool,
    pub gold: bool,
}

/// Result of one leave-one-project-out fold.
pub struct FoldOutcome {
    pub project: String,
    pub counts: ConfusionCounts,
    pub predictions: Vec<PredictionRow>,
}

/// Train on every project except `holdout`, then score all of the holdout's
/// candidate pairs.
///
/// Training keeps a downsampled negative set per source project and both
/// orientations of each kept pair; a seeded tenth of the kept pairs (before
/// orientation expansion, at least one) serves as the validation set for
/// best-epoch selection. The holdout is always scored on its complete
/// candidate set.
pub fn run_fold(
    projects: &[ConflictProject],
    holdout: &str,
    cfg: TrainConfig,
    policy: NegativePolicy,
    symmetry: SymmetryMode,
) -> Result<FoldOutcome> {
    let holdout_project = projects
        .iter()
        .find(|p| p.name == holdout)
        .ok_or_else(|| Error::Reference(format!("no project named {holdout:?}")))?;
    if projects.len() < 2 {
        return Err(Error::InvalidArgument(
            "zero-shot folds need at least two projects".into(),
        ));
    }

    let sources: Vec<&ConflictProject> =
        projects.iter().filter(|p| p.name != holdout).collect();
    let model = fit_model(&sources, Some(holdout), cfg, policy, symmetry)?;

    let predictions = detect_conflicts(&model, holdout_project, CLASSIFY_THRESHOLD)?;
    let mut counts = ConfusionCounts::default();
    for row in &predictions {
        counts.observe(row.gold, row.predicted);
    }
    Ok(FoldOutcome {
        project: holdout.to_string(),
        counts,
        predictions,
    })
}

/// Fit a conflict model on every given project, holding nothing out.
///
/// Intended for training a deployable detector on all available data; the
/// zero-shot evaluation protocol goes through [`run_zero_shot`] instead.
pub fn train_pooled(
    projects: &[ConflictProject],
    cfg: TrainConfig,
    policy: NegativePolicy,
    symmetry: SymmetryMode,
) -> Result<ConflictModel> {
    if projects.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train a conflict model on zero projects".into(),
        ));
    }
    let sources: Vec<&ConflictProject> = projects.iter().collect();
    fit_model(&sources, None, cfg, policy, symmetry)
}

/// Downsample, split off validation, and fit; `guard`, when set, asserts
/// that no training or validation sample references that project.
fn fit_model(
    sources: &[&ConflictProject],
    guard: Option<&str>,
    cfg: TrainConfig,
    policy: NegativePolicy,
    symmetry: SymmetryMode,
) -> Result<ConflictModel> {
    let mut kept = Vec::new();
    for project in sources {
        let candidates = candidate_samples(project);
        let seed = cfg.seed ^ u64::from(crc_name(&project.name));
        kept.extend(downsample_negatives(&candidates, policy, seed));
    }
    if kept.iter().all(|s| s.label == 0) {
        return Err(Error::Data(
            "no gold conflicts among the training projects; nothing to learn from".into(),
        ));
    }

    let val_context = guard.unwrap_or("pooled");
    let mut shuffle_rng = rng::seeded("conflict-val", cfg.seed, val_context.as_bytes());
    kept.shuffle(&mut shuffle_rng);
    let val_len = (kept.len() / 10).max(1);
    let (val_kept, train_kept) = kept.split_at(val_len);

    if let Some(holdout) = guard {
        verify_no_leakage(train_kept, holdout)?;
        verify_no_leakage(val_kept, holdout)?;
    }

    let mut train = Vec::with_capacity(train_kept.len() * 2);
    for s in train_kept {
        train.push(LabeledPair::new(s.premise.clone(), s.hypothesis.clone(), s.label));
        train.push(LabeledPair::new(s.hypothesis.clone(), s.premise.clone(), s.label));
    }
    let val: Vec<LabeledPair> = val_kept
        .iter()
        .map(|s| LabeledPair::new(s.premise.clone(), s.hypothesis.clone(), s.label))
        .collect();

    let mut encoder = Encoder::new(cfg)?;
    encoder.fit(&train, &val)?;
    Ok(ConflictModel::new(encoder, symmetry))
}

/// Score every candidate pair of a project; a pair is predicted conflicting
/// when its aggregated probability reaches the threshold. Rows come back
/// sorted by canonical pair id.
pub fn detect_conflicts(
    model: &ConflictModel,
    project: &ConflictProject,
    threshold: f64,
) -> Result<Vec<PredictionRow>> {
    let mut predictions = Vec::with_capacity(project.candidate_pair_count());
    for sample in candidate_samples(project) {
        let probability = model.score(&sample.premise, &sample.hypothesis)?;
        predictions.push(PredictionRow {
            project: sample.project,
            id_a: sample.id_a,
            id_b: sample.id_b,
            probability,
            predicted: probability >= threshold,
            gold: sample.label == 1,
        });
    }
    predictions.sort_by(|x, y| (&x.id_a, &x.id_b).cmp(&(&y.id_a, &y.id_b)));
    Ok(predictions)
}

/// Every project once as the holdout, in input order.
pub fn run_zero_shot(
    projects: &[ConflictProject],
    cfg: TrainConfig,
    policy: NegativePolicy,
    symmetry: SymmetryMode,
) -> Result<Vec<FoldOutcome>> {
    projects
        .iter()
        .map(|p| run_fold(projects, &p.name, cfg.clone(), policy, symmetry))
        .collect()
}

/// F1 of a count-matched uniform random predictor: `predicted` pairs drawn
/// without replacement from `candidates`, scored against `gold` positives.
pub fn random_predictions_f1(
    candidates: usize,
    gold: usize,
    predicted: usize,
    seed: u64,
) -> Result<f64> {
    if gold > candidates || predicted > candidates {
        return Err(Error::InvalidArgument(
            "gold and predicted counts cannot exceed the candidate count".into(),
        ));
    }
    let mut rng = rng::seeded("random-baseline", seed, b"");
    let picks = rand::seq::index::sample(&mut rng, candidates, predicted);
    let mut counts = ConfusionCounts::default();
    let chosen: BTreeSet<usize> = picks.iter().collect();
    for index in 0..candidates {
        counts.observe(index < gold, chosen.contains(&index));
    }
    Ok(counts.f1())
}

/// Write prediction rows as CSV
/// (`project,id_a,id_b,probability,predicted,gold`).
pub fn write_predictions_csv(path: impl AsRef<Path>, rows: &[PredictionRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["project", "id_a", "id_b", "probability", "predicted", "gold"])?;
    for row in rows {
        writer.write_record([
            row.project.as_str(),
            row.id_a.as_str(),
            row.id_b.as_str(),
            &format!("{:.6}", row.probability),
            if row.predicted { "1" } else { "0" },
            if row.gold { "1" } else { "0" },
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Small stable hash so per-project seeds differ without extra state.
fn crc_name(name: &str) -> u32 {
    name.bytes().fold(0u32, |acc, b| {
        let mixed = acc.wrapping_mul(31).wrapping_add(u32::from(b));
        mixed ^ (mixed >> 16)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{canonical_pair, ConflictRequirement};

    fn toy_project(name: &str, texts: &[(&str, &str)], gold: &[(&str, &str)]) -> ConflictProject {
        ConflictProject {
            name: name.to_string(),
            requirements: texts
                .iter()
                .map(|(id, text)| ConflictRequirement {
                    id: id.to_string(),
                    text: text.to_string(),
                })
                .collect(),
            gold_pairs: gold
                .iter()
                .map(|(a, b)| canonical_pair(a, b))
                .collect(),
        }
    }

    fn conflicting_projects() -> Vec<ConflictProject> {
        // Conflicts pair a "shall always" rule with a "shall never" rule on
        // the same object; decoys share the object without the negation.
        let mk = |name: &str, offset: usize| {
            let objects = ["valve", "pump", "sensor", "relay", "filter"];
            let mut texts: Vec<(String, String)> = Vec::new();
            let mut gold = Vec::new();
            for (i, object) in objects.iter().enumerate() {
                let n = offset + i;
                texts.push((format!("r{n}a"), format!("the {object} shall always stay open")));
                texts.push((format!("r{n}b"), format!("the {object} shall never stay open")));
                texts.push((format!("r{n}c"), format!("the {object} shall report its status")));
                gold.push((format!("r{n}a"), format!("r{n}b")));
            }
            ConflictProject {
                name: name.to_string(),
                requirements: texts
                    .into_iter()
                    .map(|(id, text)| ConflictRequirement { id, text })
                    .collect(),
                gold_pairs: gold
                    .iter()
                    .map(|(a, b)| canonical_pair(a, b))
                    .collect(),
            }
        };
        vec![mk("alpha", 0), mk("beta", 10), mk("gamma", 20)]
    }

    #[test]
    fn candidate_samples_cover_all_unordered_pairs() {
        let project = toy_project(
            "demo",
            &[
                ("a", "the door shall lock"),
                ("b", "the door shall not lock"),
                ("c", "the light shall blink"),
                ("d", "the light shall stay dark"),
                ("e", "the fan shall spin"),
            ],
            &[("b", "a"), ("c", "d")],
        );
        let samples = candidate_samples(&project);
        assert_eq!(samples.len(), 10);
        assert_eq!(samples.len(), project.candidate_pair_count());
        assert_eq!(samples.iter().filter(|s| s.label == 1).count(), 2);
        assert!(samples.iter().all(|s| s.id_a < s.id_b));
    }

    #[test]
    fn downsampling_keeps_positives_and_ratio_negatives() {
        let project = toy_project(
            "demo",
            &[
                ("a", "t1"),
                ("b", "t2"),
                ("c", "t3"),
                ("d", "t4"),
                ("e", "t5"),
                ("f", "t6"),
            ],
            &[("a", "b")],
        );
        let samples = candidate_samples(&project);
        assert_eq!(samples.len(), 15);
        let kept = downsample_negatives(&samples, NegativePolicy::Ratio(3), 7);
        assert_eq!(kept.iter().filter(|s| s.label == 1).count(), 1);
        assert_eq!(kept.iter().filter(|s| s.label == 0).count(), 3);
        let again = downsample_negatives(&samples, NegativePolicy::Ratio(3), 7);
        assert_eq!(kept, again);
        assert_eq!(
            downsample_negatives(&samples, NegativePolicy::All, 7).len(),
            15
        );
    }

    #[test]
    fn negative_policy_parses_all_and_ratios() {
        assert_eq!("all".parse::<NegativePolicy>().unwrap(), NegativePolicy::All);
        assert_eq!("5".parse::<NegativePolicy>().unwrap(), NegativePolicy::Ratio(5));
        assert!("0".parse::<NegativePolicy>().is_err());
        assert!("five".parse::<NegativePolicy>().is_err());
    }

    #[test]
    fn leakage_guard_aborts_on_holdout_samples() {
        let project = toy_project("held", &[("a", "t1"), ("b", "t2")], &[]);
        let samples = candidate_samples(&project);
        assert!(matches!(
            verify_no_leakage(&samples, "held"),
            Err(Error::State(_))
        ));
        verify_no_leakage(&samples, "other").unwrap();
    }

    #[test]
    fn symmetry_modes_agree_with_direct_probabilities() {
        let projects = conflicting_projects();
        let cfg = TrainConfig {
            epochs: 4,
            lr: 2e-3,
            batch_size: 8,
            max_length: 24,
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            seed: 5,
            ..TrainConfig::default()
        };
        let outcome = run_fold(
            &projects,
            "alpha",
            cfg.clone(),
            NegativePolicy::Ratio(2),
            SymmetryMode::Max,
        )
        .unwrap();
        assert_eq!(outcome.counts.total(), projects[0].candidate_pair_count());

        // Rebuild the same fold under each symmetry mode and cross-check one
        // pair against raw direction probabilities.
        let (a, b) = (
            "the valve shall always stay open",
            "the valve shall never stay open",
        );
        for symmetry in [SymmetryMode::Max, SymmetryMode::Avg, SymmetryMode::ForwardOnly] {
            let fold = run_fold(
                &projects,
                "alpha",
                cfg.clone(),
                NegativePolicy::Ratio(2),
                symmetry,
            )
            .unwrap();
            let model = ConflictModel::new(
                {
                    // retrain an identical encoder for direct probing
                    let mut kept = Vec::new();
                    for project in projects.iter().filter(|p| p.name != "alpha") {
                        let candidates = candidate_samples(project);
                        let seed = cfg.seed ^ u64::from(super::crc_name(&project.name));
                        kept.extend(downsample_negatives(&candidates, NegativePolicy::Ratio(2), seed));
                    }
                    let mut rng = rng::seeded("conflict-val", cfg.seed, "alpha".as_bytes());
                    kept.shuffle(&mut rng);
                    let val_len = (kept.len() / 10).max(1);
                    let (val_kept, train_kept) = kept.split_at(val_len);
                    let mut train = Vec::new();
                    for s in train_kept {
                        train.push(LabeledPair::new(s.premise.clone(), s.hypothesis.clone(), s.label));
                        train.push(LabeledPair::new(s.hypothesis.clone(), s.premise.clone(), s.label));
                    }
                    let val: Vec<LabeledPair> = val_kept
                        .iter()
                        .map(|s| LabeledPair::new(s.premise.clone(), s.hypothesis.clone(), s.label))
                        .collect();
                    let mut encoder = Encoder::new(cfg.clone()).unwrap();
                    encoder.fit(&train, &val).unwrap();
                    encoder
                },
                symmetry,
            );
            let forward = model.encoder().predict_proba(a, b).unwrap();
            let reverse = model.encoder().predict_proba(b, a).unwrap();
            let expected = match symmetry {
                SymmetryMode::Max => forward.max(reverse),
                SymmetryMode::Avg => 0.5 * (forward + reverse),
                SymmetryMode::ForwardOnly => forward,
            };
            assert!((model.score(a, b).unwrap() - expected).abs() < 1e-12);
            // the fold itself scored this gold pair identically
            let row = fold
                .predictions
                .iter()
                .find(|r| r.id_a == "r0a" && r.id_b == "r0b")
                .unwrap();
            assert!((row.probability - expected).abs() < 1e-12);
            assert!(row.gold);

            if symmetry == SymmetryMode::Max {
                // prediction sets shrink monotonically with the threshold
                let low = detect_conflicts(&model, &projects[0], 0.0).unwrap();
                let mid = detect_conflicts(&model, &projects[0], CLASSIFY_THRESHOLD).unwrap();
                let top = detect_conflicts(&model, &projects[0], 1.0).unwrap();
                assert!(low.iter().all(|r| r.predicted));
                for (m, l) in mid.iter().zip(&low) {
                    assert!(!m.predicted || l.predicted);
                }
                for (t, m) in top.iter().zip(&mid) {
                    assert!(!t.predicted || m.predicted);
                }
                // sigmoid probabilities sit strictly below 1 here
                assert!(top.iter().all(|r| !r.predicted));
            }
        }
    }

    #[test]
    fn zero_shot_runs_each_fold_and_writes_predictions() {
        let projects = conflicting_projects();
        let cfg = TrainConfig {
            epochs: 3,
            lr: 2e-3,
            batch_size: 8,
            max_length: 24,
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            seed: 5,
            ..TrainConfig::default()
        };
        let outcomes =
            run_zero_shot(&projects, cfg, NegativePolicy::Ratio(2), SymmetryMode::Max).unwrap();
        assert_eq!(outcomes.len(), 3);
        for (outcome, project) in outcomes.iter().zip(&projects) {
            assert_eq!(outcome.project, project.name);
            assert_eq!(outcome.counts.total(), project.candidate_pair_count());
            assert_eq!(outcome.predictions.len(), project.candidate_pair_count());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("predictions.csv");
        write_predictions_csv(&path, &outcomes[0].predictions).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("project,id_a,id_b,probability,predicted,gold\n"));
        assert_eq!(text.lines().count(), 1 + outcomes[0].predictions.len());
    }

    #[test]
    fn unknown_holdout_is_a_reference_error() {
        let projects = conflicting_projects();
        let cfg = TrainConfig::default();
        assert!(matches!(
            run_fold(&projects, "missing", cfg, NegativePolicy::default(), SymmetryMode::Max),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn random_baseline_matches_hand_counts() {
        // 10 candidates, 3 gold (indices 0..3), predict 4: tp = overlap.
        let f1 = random_predictions_f1(10, 3, 4, 1).unwrap();
        assert!((0.0..=1.0).contains(&f1));
        // deterministic per seed
        assert_eq!(f1, random_predictions_f1(10, 3, 4, 1).unwrap());
        // predicting everything recalls everything: P = 3/10, R = 1.
        let all = random_predictions_f1(10, 3, 10, 2).unwrap();
        let expected = 2.0 * 0.3 / 1.3;
        assert!((all - expected).abs() < 1e-12);
        assert!(random_predictions_f1(5, 6, 2, 1).is_err());
    }
}
