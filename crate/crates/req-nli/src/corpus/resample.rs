//! Class-imbalance handling for training rows. Validation and test rows are
//! never resampled.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Requirement;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    #[default]
    None,
    Oversample,
    Undersample,
}

impl fmt::Display for ResampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ResampleMode::None => "none",
            ResampleMode::Oversample => "oversample",
            ResampleMode::Undersample => "undersample",
        };
        f.write_str(s)
    }
}

impl FromStr for ResampleMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(ResampleMode::None),
            "oversample" => Ok(ResampleMode::Oversample),
            "undersample" => Ok(ResampleMode::Undersample),
            other => Err(Error::InvalidArgument(format!(
                "unknown resample mode {other:?} (expected none, oversample, or undersample)"
            ))),
        }
    }
}

/// Rebalance training rows per category.
///
/// `Oversample` keeps every original row and duplicates seeded draws (with
/// replacement) until each category matches the largest one. `Undersample`
/// keeps a seeded subset of each category matching the smallest one.
pub fn resample_training(
    rows: &[Requirement],
    mode: ResampleMode,
    seed: u64,
) -> Vec<Requirement> {
    if rows.is_empty() || mode == ResampleMode::None {
        return rows.to_vec();
    }

    let mut by_category: BTreeMap<&str, Vec<&Requirement>> = BTreeMap::new();
    for r in rows {
        by_category.entry(r.category.as_str()).or_default().push(r);
    }
    let max = by_category.values().map(Vec::len).max().unwrap_or(0);
    let min = by_category.values().map(Vec::len).min().unwrap_or(0);

    let mut out = Vec::new();
    for (category, members) in by_category {
        let mut hasher = Sha256::new();
        hasher.update(b"resample");
        hasher.update(seed.to_le_bytes());
        hasher.update(category.as_bytes());
        let mut rng: rand_chacha::ChaCha8Rng =
            rand::SeedableRng::from_seed(hasher.finalize().into());

        match mode {
            ResampleMode::None => unreachable!(),
            ResampleMode::Oversample => {
                out.extend(members.iter().map(|r| (*r).clone()));
                for _ in members.len()..max {
                    let pick = rng.random_range(0..members.len());
                    out.push(members[pick].clone());
                }
            }
            ResampleMode::Undersample => {
                let mut members = members;
                members.shuffle(&mut rng);
                out.extend(members.into_iter().take(min).cloned());
            }
        }
    }
    out
}
