//! Binary entailment formulation: the requirement is the premise, a
//! verbalized category description is the hypothesis, and the label says
//! whether the pair entails (1) or contradicts (0).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Requirement;
use crate::encoder::{Encoder, LabeledPair, TrainConfig, TrainReport};
use crate::eval::ConfusionCounts;
use crate::rng;
use crate::{Error, Result};

/// Probability at or above this classifies as entailment.
pub const CLASSIFY_THRESHOLD: f64 = 0.5;

/// Category descriptions per task, keyed `task -> category -> description`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbalizationCatalog {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl VerbalizationCatalog {
    /// Load from CSV with columns `task,category,description`.
    pub fn load(path: impl AsRef<Path>) -> Result<VerbalizationCatalog> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
        let headers: Vec<&str> = reader.headers()?.iter().collect();
        if headers != ["task", "category", "description"] {
            return Err(Error::Data(format!(
                "{}: expected header [task, category, description], got {:?}",
                path.display(),
                headers
            )));
        }
        let mut map: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let get = |i: usize, name: &str| -> Result<String> {
                let v = record.get(i).unwrap_or("").trim().to_string();
                if v.is_empty() {
                    return Err(Error::Data(format!(
                        "{}: line {line}: empty {name}",
                        path.display()
                    )));
                }
                Ok(v)
            };
            let task = get(0, "task")?;
            let category = get(1, "category")?;
            let description = get(2, "description")?;
            if map
                .entry(task.clone())
                .or_default()
                .insert(category.clone(), description)
                .is_some()
            {
                return Err(Error::Data(format!(
                    "{}: line {line}: duplicate verbalization for task {task:?} category {category:?}",
                    path.display()
                )));
            }
        }
        if map.is_empty() {
            return Err(Error::Data(format!(
                "{}: no verbalizations",
                path.display()
            )));
        }
        Ok(VerbalizationCatalog { map })
    }

    pub fn for_task(&self, task: &str) -> Result<&BTreeMap<String, String>> {
        self.map.get(task).ok_or_else(|| {
            Error::Reference(format!(
                "no verbalizations for task {task:?} (have: {:?})",
                self.map.keys().collect::<Vec<_>>()
            ))
        })
    }

    /// Every category in `catalog` must have a description; the error names
    /// each gap.
    pub fn verify_complete(&self, task: &str, catalog: &[String]) -> Result<()> {
        let verbs = self.for_task(task)?;
        let missing: Vec<&String> = catalog.iter().filter(|c| !verbs.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(Error::Reference(format!(
                "task {task:?} lacks verbalizations for categories: {missing:?}"
            )));
        }
        Ok(())
    }
}

/// How many contradiction pairs each requirement contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeMode {
    /// One negative per non-gold category.
    All,
    /// A seeded sample of this many non-gold categories.
    Sampled(usize),
}

/// One prepared premise/hypothesis pair with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
    pub label: u8,
    pub req_id: String,
    pub category: String,
}

impl NliPair {
    pub fn to_labeled(&self) -> LabeledPair {
        LabeledPair::new(self.premise.clone(), self.hypothesis.clone(), self.label)
    }
}

/// Expand rows into entailment pairs against the verbalized categories.
///
/// `All` mode yields `rows * catalog` pairs of which `rows` are positive.
/// `Sampled(k)` keeps the positive plus `k` distinct seeded negatives; `k`
/// must be below the catalog size. The hypothesis is always the category's
/// description, never its bare name.
pub fn prepare_nli_pairs(
    rows: &[Requirement],
    verbalizations: &BTreeMap<String, String>,
    mode: NegativeMode,
    seed: u64,
) -> Result<Vec<NliPair>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to prepare".into()));
    }
    if verbalizations.is_empty() {
        return Err(Error::InvalidArgument("empty verbalization table".into()));
    }
    if let NegativeMode::Sampled(k) = mode {
        if k == 0 || k >= verbalizations.len() {
            return Err(Error::InvalidArgument(format!(
                "sampled negative count {k} must be between 1 and the catalog size minus one ({})",
                verbalizations.len() - 1
            )));
        }
    }

    let categories: Vec<&String> = verbalizations.keys().collect();
    let mut out = Vec::new();
    for row in rows {
        if !verbalizations.contains_key(&row.category) {
            return Err(Error::Reference(format!(
                "row {:?} has category {:?} with no verbalization",
                row.id, row.category
            )));
        }
        match mode {
            NegativeMode::All => {
                for category in &categories {
                    out.push(NliPair {
                        premise: row.text.clone(),
                        hypothesis: verbalizations[*category].clone(),
                        label: u8::from(**category == row.category),
                        req_id: row.id.clone(),
                        category: (*category).clone(),
                    });
                }
            }
            NegativeMode::Sampled(k) => {
                out.push(NliPair {
                    premise: row.text.clone(),
                    hypothesis: verbalizations[&row.category].clone(),
                    label: 1,
                    req_id: row.id.clone(),
                    category: row.category.clone(),
                });
                let others: Vec<&String> = categories
                    .iter()
                    .copied()
                    .filter(|c| **c != row.category)
                    .collect();
                let mut rng = rng::seeded("nli-negatives", seed, row.id.as_bytes());
                let picks = rand::seq::index::sample(&mut rng, others.len(), k);
                for pick in picks.iter() {
                    let category = others[pick];
                    out.push(NliPair {
                        premise: row.text.clone(),
                        hypothesis: verbalizations[category].clone(),
                        label: 0,
                        req_id: row.id.clone(),
                        category: category.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Write pairs as CSV (`premise,hypothesis,label,req_id,category`).
pub fn write_pair_dump(path: impl AsRef<Path>, pairs: &[NliPair]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["premise", "hypothesis", "label", "req_id", "category"])?;
    for p in pairs {
        writer.write_record([
            p.premise.as_str(),
            p.hypothesis.as_str(),
            if p.label == 1 { "1" } else { "0" },
            p.req_id.as_str(),
            p.category.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// A fitted entailment classifier bound to its verbalization table.
pub struct NliModel {
    encoder: Encoder,
    verbalizations: BTreeMap<String, String>,
}

/// Train the entailment encoder on prepared pairs.
///
/// Training pairs follow `mode`. Validation pairs are balanced (one seeded
/// negative per row) so epoch selection weighs entailment and contradiction
/// equally; all-mode validation loss is dominated by the easy negatives and
/// stops tracking generalization on the entailing side.
pub fn train_nli(
    train_rows: &[Requirement],
    val_rows: &[Requirement],
    verbalizations: &BTreeMap<String, String>,
    cfg: TrainConfig,
    mode: NegativeMode,
) -> Result<NliModel> {
    let seed = cfg.seed;
    let train_pairs = prepare_nli_pairs(train_rows, verbalizations, mode, seed)?;
    let val_pairs = prepare_nli_pairs(val_rows, verbalizations, NegativeMode::Sampled(1), seed)?;
    let train: Vec<LabeledPair> = train_pairs.iter().map(NliPair::to_labeled).collect();
    let val: Vec<LabeledPair> = val_pairs.iter().map(NliPair::to_labeled).collect();
    let mut encoder = Encoder::new(cfg)?;
    encoder.fit(&train, &val)?;
    Ok(NliModel {
        encoder,
        verbalizations: verbalizations.clone(),
    })
}

impl NliModel {
    pub fn from_parts(encoder: Encoder, verbalizations: BTreeMap<String, String>) -> NliModel {
        NliModel {
            encoder,
            verbalizations,
        }
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn report(&self) -> Result<&TrainReport> {
        self.encoder.report()
    }

    /// Entailment probability of a requirement against a category.
    pub fn proba(&self, text: &str, category: &str) -> Result<f64> {
        let hypothesis = self.verbalizations.get(category).ok_or_else(|| {
            Error::Reference(format!("category {category:?} has no verbalization"))
        })?;
        self.encoder.predict_proba(text, hypothesis)
    }

    /// Binary decision at the fixed threshold (entail at or above 0.5).
    pub fn classify_binary(&self, text: &str, category: &str) -> Result<bool> {
        Ok(self.proba(text, category)? >= CLASSIFY_THRESHOLD)
    }
}

/// Per-category binary evaluation shared by every scoring method: each test
/// row is scored against each category and compared with its gold label.
pub fn evaluate_per_category<F>(
    mut score: F,
    rows: &[Requirement],
    catalog: &[String],
    threshold: f64,
) -> Result<Vec<(String, ConfusionCounts)>>
where
    F: FnMut(&str, &str) -> Result<f64>,
{
    let mut tables: Vec<(String, ConfusionCounts)> = catalog
        .iter()
        .map(|c| (c.clone(), ConfusionCounts::default()))
        .collect();
    for row in rows {
        for (category, table) in tables.iter_mut() {
            let gold = &row.category == category;
            let predicted = score(&row.text, category)? >= threshold;
            table.observe(gold, predicted);
        }
    }
    Ok(tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn demo_verbs() -> BTreeMap<String, String> {
        [
            ("Performance", "This requirement describes how fast the system responds."),
            ("Security", "This requirement describes protection against unauthorized access."),
            ("Usability", "This requirement describes how easily users learn the system."),
        ]
        .into_iter()
        .map(|(c, d)| (c.to_string(), d.to_string()))
        .collect()
    }

    fn demo_rows() -> Vec<Requirement> {
        vec![
            Requirement {
                id: "r1".into(),
                text: "the system shall respond within two seconds".into(),
                category: "Performance".into(),
            },
            Requirement {
                id: "r2".into(),
                text: "the system shall encrypt passwords".into(),
                category: "Security".into(),
            },
        ]
    }

    #[test]
    fn all_mode_counts_follow_the_pairing_identity() {
        let pairs = prepare_nli_pairs(&demo_rows(), &demo_verbs(), NegativeMode::All, 1).unwrap();
        assert_eq!(pairs.len(), 2 * 3);
        assert_eq!(pairs.iter().filter(|p| p.label == 1).count(), 2);
        // hypotheses are descriptions, never bare names
        assert!(pairs.iter().all(|p| p.hypothesis.len() > p.category.len()));
    }

    #[test]
    fn sampled_mode_keeps_the_positive_and_k_negatives() {
        let pairs =
            prepare_nli_pairs(&demo_rows(), &demo_verbs(), NegativeMode::Sampled(1), 1).unwrap();
        assert_eq!(pairs.len(), 2 * 2);
        assert_eq!(pairs.iter().filter(|p| p.label == 1).count(), 2);
        let again =
            prepare_nli_pairs(&demo_rows(), &demo_verbs(), NegativeMode::Sampled(1), 1).unwrap();
        assert_eq!(pairs, again);
    }

    #[test]
    fn sampled_mode_rejects_k_at_or_above_catalog_size() {
        for k in [0, 3, 4] {
            assert!(matches!(
                prepare_nli_pairs(&demo_rows(), &demo_verbs(), NegativeMode::Sampled(k), 1),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn unknown_row_category_is_a_reference_error() {
        let mut rows = demo_rows();
        rows[0].category = "Nonexistent".into();
        assert!(matches!(
            prepare_nli_pairs(&rows, &demo_verbs(), NegativeMode::All, 1),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn catalog_loads_and_reports_gaps_by_name() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "task,category,description").unwrap();
        writeln!(f, "classify,Security,Describes protection of the system.").unwrap();
        writeln!(f, "classify,Performance,Describes system speed.").unwrap();
        let catalog = VerbalizationCatalog::load(f.path()).unwrap();
        catalog
            .verify_complete("classify", &["Security".into(), "Performance".into()])
            .unwrap();
        let err = catalog
            .verify_complete(
                "classify",
                &["Security".into(), "Usability".into(), "Legal".into()],
            )
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("Usability") && msg.contains("Legal"));
        assert!(matches!(err, Error::Reference(_)));
        assert!(matches!(
            catalog.for_task("defects"),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn duplicate_verbalizations_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "task,category,description").unwrap();
        writeln!(f, "classify,Security,First.").unwrap();
        writeln!(f, "classify,Security,Second.").unwrap();
        assert!(matches!(
            VerbalizationCatalog::load(f.path()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn pair_dump_roundtrips_via_csv() {
        let pairs = prepare_nli_pairs(&demo_rows(), &demo_verbs(), NegativeMode::All, 1).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_pair_dump(f.path(), &pairs).unwrap();
        let mut reader = csv::Reader::from_path(f.path()).unwrap();
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), pairs.len());
        assert_eq!(&rows[0][0], pairs[0].premise.as_str());
        assert_eq!(&rows[0][2], "1");
    }

    #[test]
    fn end_to_end_training_and_binary_classification() {
        let verbs = demo_verbs();
        let mut train_rows = Vec::new();
        for i in 0..12 {
            train_rows.push(Requirement {
                id: format!("p{i}"),
                text: format!("the system shall respond in {i} seconds"),
                category: "Performance".into(),
            });
            train_rows.push(Requirement {
                id: format!("s{i}"),
                text: format!("the system shall encrypt record {i}"),
                category: "Security".into(),
            });
            train_rows.push(Requirement {
                id: format!("u{i}"),
                text: format!("novice users shall learn screen {i} quickly"),
                category: "Usability".into(),
            });
        }
        let val_rows = vec![
            Requirement {
                id: "v1".into(),
                text: "the system shall respond in four seconds".into(),
                category: "Performance".into(),
            },
            Requirement {
                id: "v2".into(),
                text: "the system shall encrypt archives".into(),
                category: "Security".into(),
            },
        ];
        let cfg = TrainConfig {
            epochs: 20,
            lr: 2e-3,
            batch_size: 8,
            max_length: 48,
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            seed: 3,
            ..TrainConfig::default()
        };
        let model = train_nli(&train_rows, &val_rows, &verbs, cfg, NegativeMode::All).unwrap();
        let pos = model
            .proba("the system shall respond in nine seconds", "Performance")
            .unwrap();
        let neg = model
            .proba("the system shall respond in nine seconds", "Security")
            .unwrap();
        assert!(pos > neg, "gold category should outscore a wrong one ({pos} vs {neg})");

        let tables = evaluate_per_category(
            |text, cat| model.proba(text, cat),
            &val_rows,
            &["Performance".to_string(), "Security".to_string(), "Usability".to_string()],
            CLASSIFY_THRESHOLD,
        )
        .unwrap();
        assert_eq!(tables.len(), 3);
        let total: usize = tables.iter().map(|(_, t)| t.total()).sum();
        assert_eq!(total, 2 * 3);
    }
}
