//! Fine-tuned baseline methods: prompt-suffix binary matching (one shared
//! model, the hypothesis names the category in a fixed sentence) and
//! per-category one-vs-rest models (one binary encoder per category).

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;

use crate::corpus::{resample_training, Requirement, ResampleMode};
use crate::encoder::{Encoder, LabeledPair, TrainConfig};
use crate::nli::{prepare_nli_pairs, train_nli, NegativeMode, NliModel, NliPair};
use crate::rng;
use crate::{Error, Result};

/// Fixed sentence stem that names the candidate category.
pub const PROMPT_MARKER: &str = "This requirement is ";

/// Pseudo-labels used when a dataset is recast as one binary problem.
pub const POSITIVE_LABEL: &str = "pos";
pub const NEGATIVE_LABEL: &str = "neg";

/// Hypothesis sentence for the prompt method: `This requirement is X.`
pub fn prompt_hypothesis(category: &str) -> String {
    format!("{PROMPT_MARKER}{category}.")
}

/// Flattened single-sequence form, used for dumps and audits.
pub fn prompt_text(requirement: &str, category: &str) -> String {
    format!("{requirement}. {}", prompt_hypothesis(category))
}

/// Recover `(requirement, category)` from a flattened prompt sample.
pub fn split_prompt_text(sample: &str) -> Option<(String, String)> {
    let marker = format!(". {PROMPT_MARKER}");
    let idx = sample.rfind(&marker)?;
    let requirement = &sample[..idx];
    let rest = &sample[idx + marker.len()..];
    let category = rest.strip_suffix('.')?;
    if requirement.is_empty() || category.is_empty() {
        return None;
    }
    Some((requirement.to_string(), category.to_string()))
}

/// The catalog's prompt hypotheses keyed by category.
pub fn prompt_map(catalog: &[String]) -> Result<BTreeMap<String, String>> {
    let map: BTreeMap<String, String> = catalog
        .iter()
        .map(|c| (c.clone(), prompt_hypothesis(c)))
        .collect();
    if map.len() != catalog.len() {
        return Err(Error::InvalidArgument(
            "catalog contains duplicate categories".into(),
        ));
    }
    Ok(map)
}

/// Prompt samples follow the same pairing identity as the entailment pairs;
/// only the hypothesis text differs (category name in a fixed sentence
/// instead of a full description).
pub fn prepare_prompt_samples(
    rows: &[Requirement],
    catalog: &[String],
    mode: NegativeMode,
    seed: u64,
) -> Result<Vec<NliPair>> {
    prepare_nli_pairs(rows, &prompt_map(catalog)?, mode, seed)
}

/// Train the shared prompt-matching model.
pub fn train_prompt(
    train_rows: &[Requirement],
    val_rows: &[Requirement],
    catalog: &[String],
    cfg: TrainConfig,
    mode: NegativeMode,
) -> Result<NliModel> {
    train_nli(train_rows, val_rows, &prompt_map(catalog)?, cfg, mode)
}

/// Recast rows as one binary problem: does the row belong to `category`?
pub fn one_vs_rest_rows(rows: &[Requirement], category: &str) -> Vec<Requirement> {
    rows.iter()
        .map(|r| Requirement {
            id: r.id.clone(),
            text: r.text.clone(),
            category: if r.category == category {
                POSITIVE_LABEL.to_string()
            } else {
                NEGATIVE_LABEL.to_string()
            },
        })
        .collect()
}

fn one_vs_rest_pairs(rows: &[Requirement], category: &str) -> Vec<LabeledPair> {
    rows.iter()
        .map(|r| {
            LabeledPair::new(
                r.text.clone(),
                category.to_string(),
                u8::from(r.category == POSITIVE_LABEL),
            )
        })
        .collect()
}

/// One binary encoder per category; the hypothesis is the bare category
/// name, constant within each model.
pub struct PerCategoryModel {
    models: BTreeMap<String, Encoder>,
    skipped: BTreeSet<String>,
}

/// Train one binary model per catalog category.
///
/// Resampling balances the positive/negative side of each binary training
/// set and never touches validation rows. Each category trains from its own
/// derived seed so the models are independent yet reproducible. A category
/// with no positive training rows is skipped with a warning; it scores 0
/// at prediction time.
pub fn train_per_category(
    train_rows: &[Requirement],
    val_rows: &[Requirement],
    catalog: &[String],
    cfg: TrainConfig,
    resample: ResampleMode,
) -> Result<PerCategoryModel> {
    if catalog.is_empty() {
        return Err(Error::InvalidArgument("empty category catalog".into()));
    }
    let mut models = BTreeMap::new();
    let mut skipped = BTreeSet::new();
    for category in catalog {
        let derived_seed = rng::seeded("per-category", cfg.seed, category.as_bytes()).next_u64();
        let binary_train = one_vs_rest_rows(train_rows, category);
        if !binary_train.iter().any(|r| r.category == POSITIVE_LABEL) {
            log::warn!("category {category:?} has no positive training rows; skipping its model");
            skipped.insert(category.clone());
            continue;
        }
        let balanced = resample_training(&binary_train, resample, derived_seed);
        let train = one_vs_rest_pairs(&balanced, category);
        let val = one_vs_rest_pairs(&one_vs_rest_rows(val_rows, category), category);
        let mut model_cfg = cfg.clone();
        model_cfg.seed = derived_seed;
        let mut encoder = Encoder::new(model_cfg)?;
        encoder.fit(&train, &val)?;
        if models.insert(category.clone(), encoder).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate category {category:?} in catalog"
            )));
        }
    }
    Ok(PerCategoryModel { models, skipped })
}

impl PerCategoryModel {
    pub fn categories(&self) -> Vec<&String> {
        self.models.keys().collect()
    }

    /// Categories that had no positive training rows and got no model.
    pub fn skipped(&self) -> &BTreeSet<String> {
        &self.skipped
    }

    pub fn encoder(&self, category: &str) -> Result<&Encoder> {
        self.models.get(category).ok_or_else(|| {
            Error::Reference(format!("no model trained for category {category:?}"))
        })
    }

    /// Membership probability from the category's own binary model; a
    /// skipped category never claims membership.
    pub fn proba(&self, text: &str, category: &str) -> Result<f64> {
        if let Some(encoder) = self.models.get(category) {
            return encoder.predict_proba(text, category);
        }
        if self.skipped.contains(category) {
            return Ok(0.0);
        }
        Err(Error::Reference(format!(
            "no model trained for category {category:?}"
        )))
    }
}
