//! Probabilistic indicator-term classifier.
//!
//! Terms are mined per category from training text; a requirement's score
//! for a category is the sum of that category's term weights over the
//! requirement's preprocessed tokens, scaled by 100. Classification is
//! per-category binary: score at or above the classification threshold.

pub mod porter;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Requirement;
use crate::eval::{weighted_average, ConfusionCounts};
use crate::{Error, Result};

pub use porter::stem;

/// Shipped stopword list (see `stopwords.txt`, version 1).
pub fn stopwords() -> &'static BTreeSet<&'static str> {
    static SET: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        include_str!("stopwords.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

/// Normalize text to stemmed tokens.
///
/// Order is fixed: strip non-alphanumeric characters, collapse whitespace,
/// lowercase, tokenize, drop stopwords, stem.
pub fn preprocess(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned
        .to_lowercase()
        .split_whitespace()
        .filter(|t| !stopwords().contains(t))
        .map(stem)
        .collect()
}

/// Mined term weights per category, pruned at the indicator threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorWeights {
    pub indicator_threshold: f64,
    pub weights: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Mine indicator-term weights from training rows.
///
/// For term t and category c the weight is the product of three ratios:
/// term share within the category's tokens, category share of the term's
/// corpus-wide occurrences, and the fraction of the category's documents
/// containing the term. Weights below `indicator_threshold` are pruned.
pub fn mine_weights(rows: &[Requirement], indicator_threshold: f64) -> Result<IndicatorWeights> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot mine indicator terms from zero rows".into(),
        ));
    }
    if !(indicator_threshold > 0.0) {
        return Err(Error::InvalidArgument(
            "indicator threshold must be positive".into(),
        ));
    }

    let mut term_freq: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    let mut doc_freq: BTreeMap<&str, BTreeMap<String, usize>> = BTreeMap::new();
    let mut tokens_in: BTreeMap<&str, usize> = BTreeMap::new();
    let mut docs_in: BTreeMap<&str, usize> = BTreeMap::new();
    let mut global_freq: BTreeMap<String, usize> = BTreeMap::new();

    for row in rows {
        let tokens = preprocess(&row.text);
        *docs_in.entry(row.category.as_str()).or_default() += 1;
        *tokens_in.entry(row.category.as_str()).or_default() += tokens.len();
        let tf = term_freq.entry(row.category.as_str()).or_default();
        let mut seen = BTreeSet::new();
        for t in tokens {
            *global_freq.entry(t.clone()).or_default() += 1;
            *tf.entry(t.clone()).or_default() += 1;
            seen.insert(t);
        }
        let df = doc_freq.entry(row.category.as_str()).or_default();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }

    let mut weights: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (category, tf) in &term_freq {
        let n_tokens = tokens_in[category] as f64;
        let n_docs = docs_in[category] as f64;
        let mut table = BTreeMap::new();
        for (term, &freq) in tf {
            if n_tokens == 0.0 {
                continue;
            }
            let share_of_category = freq as f64 / n_tokens;
            let share_of_term = freq as f64 / global_freq[term] as f64;
            let doc_coverage = doc_freq[category][term] as f64 / n_docs;
            let w = share_of_category * share_of_term * doc_coverage;
            if w >= indicator_threshold {
                table.insert(term.clone(), w);
            }
        }
        weights.insert(category.to_string(), table);
    }

    Ok(IndicatorWeights {
        indicator_threshold,
        weights,
    })
}

impl IndicatorWeights {
    /// Sum of term weights over the text's tokens, scaled by 100.
    pub fn score(&self, category: &str, text: &str) -> f64 {
        let Some(table) = self.weights.get(category) else {
            return 0.0;
        };
        preprocess(text)
            .iter()
            .filter_map(|t| table.get(t))
            .sum::<f64>()
            * 100.0
    }

    pub fn scores(&self, text: &str) -> BTreeMap<String, f64> {
        self.weights
            .keys()
            .map(|c| (c.clone(), self.score(c, text)))
            .collect()
    }

    /// Write the table as `category,term,weight` CSV, heaviest terms first
    /// (ties by category then term), for inspection.
    pub fn export_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut rows: Vec<(&String, &String, f64)> = self
            .weights
            .iter()
            .flat_map(|(c, terms)| terms.iter().map(move |(t, w)| (c, t, *w)))
            .collect();
        rows.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        let mut writer = csv::Writer::from_path(path.as_ref())?;
        writer.write_record(["category", "term", "weight"])?;
        for (category, term, weight) in rows {
            writer.write_record([category.as_str(), term.as_str(), &format!("{weight:.8}")])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// The trained classifier: mined weights plus a classification threshold.
#[derive(Debug, Clone)]
pub struct IndicatorClassifier {
    pub classification_threshold: f64,
    pub indicator_threshold: f64,
    weights: Option<IndicatorWeights>,
}

impl IndicatorClassifier {
    pub fn new(classification_threshold: f64, indicator_threshold: f64) -> Self {
        IndicatorClassifier {
            classification_threshold,
            indicator_threshold,
            weights: None,
        }
    }

    pub fn train(&mut self, rows: &[Requirement]) -> Result<()> {
        self.weights = Some(mine_weights(rows, self.indicator_threshold)?);
        Ok(())
    }

    pub fn weights(&self) -> Result<&IndicatorWeights> {
        self.weights
            .as_ref()
            .ok_or_else(|| Error::State("indicator classifier is not trained".into()))
    }

    /// Binary per-category decision: score at or above the threshold.
    pub fn predict_binary(&self, category: &str, text: &str) -> Result<bool> {
        Ok(self.weights()?.score(category, text) >= self.classification_threshold)
    }
}

/// Evaluate mined weights on held-out rows, one binary table per category.
pub fn evaluate_split(
    train: &[Requirement],
    eval: &[Requirement],
    catalog: &[String],
    classification_threshold: f64,
    indicator_threshold: f64,
) -> Result<Vec<(String, ConfusionCounts)>> {
    let weights = mine_weights(train, indicator_threshold)?;
    let mut tables: Vec<(String, ConfusionCounts)> = catalog
        .iter()
        .map(|c| (c.clone(), ConfusionCounts::default()))
        .collect();
    for row in eval {
        for (category, table) in tables.iter_mut() {
            let gold = &row.category == category;
            let predicted = weights.score(category, &row.text) >= classification_threshold;
            table.observe(gold, predicted);
        }
    }
    Ok(tables)
}

/// The sweep grid: classification thresholds crossed with indicator
/// thresholds, scored by cross-validated weighted F1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub classification_thresholds: Vec<f64>,
    pub indicator_thresholds: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            classification_thresholds: vec![
                1.0, 3.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0,
            ],
            indicator_thresholds: vec![0.001, 0.0001, 0.00001],
        }
    }
}

/// Winning thresholds and their cross-validated score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepChoice {
    pub classification_threshold: f64,
    pub indicator_threshold: f64,
    pub mean_weighted_f1: f64,
}

/// Deterministic stratified fold assignment: seeded shuffle per category,
/// then round-robin over folds.
fn assign_folds(rows: &[Requirement], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_category: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        by_category.entry(r.category.as_str()).or_default().push(i);
    }
    let mut fold_of = vec![0usize; rows.len()];
    for (category, mut members) in by_category {
        let mut hasher = Sha256::new();
        hasher.update(b"folds");
        hasher.update(seed.to_le_bytes());
        hasher.update(category.as_bytes());
        let mut rng: rand_chacha::ChaCha8Rng =
            rand::SeedableRng::from_seed(hasher.finalize().into());
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            fold_of[idx] = pos % folds;
        }
    }
    fold_of
}

/// Cross-validated grid sweep.
///
/// Every grid cell is scored by mean weighted F1 over the folds; ties prefer
/// the smaller classification threshold, then the larger (more aggressively
/// pruning) indicator threshold.
pub fn sweep_thresholds(
    rows: &[Requirement],
    catalog: &[String],
    grid: &SweepGrid,
    folds: usize,
    seed: u64,
) -> Result<SweepChoice> {
    if folds < 2 || folds > rows.len() {
        return Err(Error::InvalidArgument(format!(
            "fold count {} must be between 2 and the number of rows ({})",
            folds,
            rows.len()
        )));
    }
    if grid.classification_thresholds.is_empty() || grid.indicator_thresholds.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let fold_of = assign_folds(rows, folds, seed);

    let mut best: Option<SweepChoice> = None;
    for &ct in &grid.classification_thresholds {
        for &it in &grid.indicator_thresholds {
            let mut fold_scores = Vec::with_capacity(folds);
            for fold in 0..folds {
                let train: Vec<Requirement> = rows
                    .iter()
                    .zip(&fold_of)
                    .filter(|(_, &f)| f != fold)
                    .map(|(r, _)| r.clone())
                    .collect();
                let eval: Vec<Requirement> = rows
                    .iter()
                    .zip(&fold_of)
                    .filter(|(_, &f)| f == fold)
                    .map(|(r, _)| r.clone())
                    .collect();
                if train.is_empty() || eval.is_empty() {
                    continue;
                }
                let tables = evaluate_split(&train, &eval, catalog, ct, it)?;
                let metrics: Vec<_> = tables.iter().map(|(_, t)| t.metrics()).collect();
                fold_scores.push(weighted_average(&metrics).f1);
            }
            if fold_scores.is_empty() {
                continue;
            }
            let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            let candidate = SweepChoice {
                classification_threshold: ct,
                indicator_threshold: it,
                mean_weighted_f1: mean,
            };
            let better = match &best {
                None => true,
                Some(b) => {
                    mean > b.mean_weighted_f1
                        || (mean == b.mean_weighted_f1
                            && (ct < b.classification_threshold
                                || (ct == b.classification_threshold
                                    && it > b.indicator_threshold)))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("sweep produced no usable folds".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, text: &str, category: &str) -> Requirement {
        Requirement {
            id: id.into(),
            text: text.into(),
            category: category.into(),
        }
    }

    #[test]
    fn preprocess_worked_example() {
        let tokens = preprocess("The system shall prevent unauthorized connections!");
        assert_eq!(
            tokens,
            vec!["system", "shall", "prevent", "unauthor", "connect"]
        );
    }

    #[test]
    fn preprocess_strips_punctuation_and_case() {
        assert_eq!(
            preprocess("  Response-Time:   2 Seconds!!  "),
            vec!["respons", "time", "2", "second"]
        );
    }

    #[test]
    fn stopwords_keep_requirement_modals() {
        let s = stopwords();
        assert!(s.contains("the"));
        assert!(!s.contains("shall"));
        assert!(!s.contains("must"));
        assert!(!s.contains("may"));
    }

    #[test]
    fn weight_formula_hand_check() {
        let rows = vec![
            row("1", "alpha beta", "A"),
            row("2", "alpha gamma", "A"),
            row("3", "beta beta delta", "B"),
        ];
        let w = mine_weights(&rows, 1e-9).unwrap();
        // alpha in A: (2/4) * (2/2) * (2/2)
        assert!((w.weights["A"]["alpha"] - 0.5).abs() < 1e-12);
        // beta in A: (1/4) * (1/3) * (1/2)
        assert!((w.weights["A"]["beta"] - 1.0 / 24.0).abs() < 1e-12);
        // beta in B: (2/3) * (2/3) * (1/1)
        assert!((w.weights["B"]["beta"] - 4.0 / 9.0).abs() < 1e-12);
        // score is the weight sum times 100, per occurrence
        let score = w.score("B", "beta beta");
        assert!((score - 2.0 * (4.0 / 9.0) * 100.0).abs() < 1e-9);
    }

    #[test]
    fn pruning_drops_weak_terms() {
        let rows = vec![
            row("1", "alpha beta", "A"),
            row("2", "alpha gamma", "A"),
            row("3", "beta beta delta", "B"),
        ];
        let w = mine_weights(&rows, 0.1).unwrap();
        assert!(w.weights["A"].contains_key("alpha"));
        assert!(!w.weights["A"].contains_key("beta"));
    }

    #[test]
    fn untrained_classifier_is_a_state_error() {
        let c = IndicatorClassifier::new(5.0, 0.001);
        assert!(matches!(
            c.predict_binary("A", "anything"),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn sweep_is_deterministic_and_prefers_smaller_thresholds_on_ties() {
        let mut rows = Vec::new();
        for i in 0..12 {
            rows.push(row(
                &format!("a{i}"),
                "encrypt all stored passwords securely",
                "A",
            ));
            rows.push(row(&format!("b{i}"), "respond within two seconds", "B"));
        }
        let catalog = vec!["A".to_string(), "B".to_string()];
        let grid = SweepGrid::default();
        let a = sweep_thresholds(&rows, &catalog, &grid, 4, 9).unwrap();
        let b = sweep_thresholds(&rows, &catalog, &grid, 4, 9).unwrap();
        assert_eq!(a, b);
        // perfectly separable text: several cells tie at F1 = 1, so the
        // smallest classification threshold and largest pruning win
        assert_eq!(a.classification_threshold, 1.0);
        assert_eq!(a.indicator_threshold, 0.001);
        assert!((a.mean_weighted_f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fold_assignment_partitions_rows() {
        let rows: Vec<Requirement> = (0..25)
            .map(|i| row(&format!("r{i}"), "text body here", ["A", "B"][i % 2]))
            .collect();
        let folds = assign_folds(&rows, 10, 3);
        assert_eq!(folds.len(), 25);
        assert!(folds.iter().all(|&f| f < 10));
    }

    #[test]
    fn term_table_export_is_sorted_by_weight() {
        let mut weights = IndicatorWeights {
            indicator_threshold: 0.001,
            weights: BTreeMap::new(),
        };
        weights.weights.entry("A".into()).or_default().insert("alpha".into(), 0.2);
        weights.weights.entry("B".into()).or_default().insert("beta".into(), 0.5);
        let f = tempfile::NamedTempFile::new().unwrap();
        weights.export_csv(f.path()).unwrap();
        let text = std::fs::read_to_string(f.path()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "category,term,weight");
        assert!(lines[1].starts_with("B,beta,0.5"));
        assert!(lines[2].starts_with("A,alpha,0.2"));
    }
}
