//! Datasets, loaders, deterministic splits, and training-set resampling.

mod load;
mod resample;
mod split;

pub use load::{
    load_classification_csv, load_conflict_project, load_defect_csv, write_dataset_csv,
    DEFECT_CATEGORIES,
};
pub use resample::{resample_training, ResampleMode};
pub use split::{make_splits, SplitFractions, Splits};

use serde::{Deserialize, Serialize};

/// One labeled requirement row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub text: String,
    pub category: String,
}

/// A loaded categorical dataset plus the catalog of categories it uses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub rows: Vec<Requirement>,
    /// Sorted unique category names present after loading.
    pub catalog: Vec<String>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Requirement>) -> Self {
        let mut catalog: Vec<String> = rows.iter().map(|r| r.category.clone()).collect();
        catalog.sort();
        catalog.dedup();
        Dataset { rows, catalog }
    }

    /// Rows per category, in catalog order.
    pub fn category_counts(&self) -> Vec<(String, usize)> {
        self.catalog
            .iter()
            .map(|c| {
                let n = self.rows.iter().filter(|r| &r.category == c).count();
                (c.clone(), n)
            })
            .collect()
    }
}

/// One requirement inside a conflict-detection project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRequirement {
    pub id: String,
    pub text: String,
}

/// A conflict-detection project: requirements plus gold conflicting pairs.
///
/// Pairs are unordered; each is stored exactly once in canonical
/// (lexicographically smaller id first) form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictProject {
    pub name: String,
    pub requirements: Vec<ConflictRequirement>,
    pub gold_pairs: Vec<(String, String)>,
}

impl ConflictProject {
    /// Number of unordered candidate pairs, n(n-1)/2.
    pub fn candidate_pair_count(&self) -> usize {
        let n = self.requirements.len();
        n * (n - 1) / 2
    }

    pub fn is_gold(&self, a: &str, b: &str) -> bool {
        let key = canonical_pair(a, b);
        self.gold_pairs
            .iter()
            .any(|(x, y)| (x.as_str(), y.as_str()) == (key.0.as_str(), key.1.as_str()))
    }
}

/// Canonical unordered form of a pair of ids.
pub fn canonical_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}
