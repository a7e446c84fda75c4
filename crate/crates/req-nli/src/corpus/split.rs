//! Deterministic stratified train/validation/test splits.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Requirement;
use crate::{Error, Result};

/// Target fractions for the three splits. Must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::Config("split fractions must be non-negative".into()));
        }
        if self.train <= 0.0 {
            return Err(Error::Config("train fraction must be positive".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// An exact partition of the input rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<Requirement>,
    pub val: Vec<Requirement>,
    pub test: Vec<Requirement>,
}

impl Splits {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

/// Seed a per-category generator so category iteration order cannot leak
/// into the draw sequence.
fn category_rng(label: &str, seed: u64, category: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(label.as_bytes());
    hasher.update(seed.to_le_bytes());
    hasher.update(category.as_bytes());
    rand::SeedableRng::from_seed(hasher.finalize().into())
}

/// Split rows into train/val/test, stratified per category.
///
/// Categories with at least 3 rows get largest-remainder allocation against
/// the fractions (train guaranteed non-empty, remainder ties broken by a
/// seeded draw). Smaller categories fall back to one guaranteed training row
/// plus seeded draws for the rest, with a warning.
pub fn make_splits(
    rows: &[Requirement],
    fractions: SplitFractions,
    seed: u64,
) -> Result<Splits> {
    fractions.validate()?;
    if rows.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }

    let mut by_category: BTreeMap<&str, Vec<&Requirement>> = BTreeMap::new();
    for r in rows {
        by_category.entry(r.category.as_str()).or_default().push(r);
    }

    let fracs = [fractions.train, fractions.val, fractions.test];
    let mut out: [Vec<Requirement>; 3] = [Vec::new(), Vec::new(), Vec::new()];

    for (category, mut members) in by_category {
        let mut rng = category_rng("split", seed, category);
        members.shuffle(&mut rng);
        let n = members.len();

        let counts = if n >= 3 {
            largest_remainder(n, &fracs, &mut rng)
        } else {
            warn!(
                "category {:?} has only {} row(s); using fallback allocation",
                category, n
            );
            let mut counts = [0usize; 3];
            counts[0] = 1;
            for _ in 1..n {
                counts[draw_split(&fracs, &mut rng)] += 1;
            }
            counts
        };

        let mut offset = 0;
        for (split, &count) in counts.iter().enumerate() {
            for member in &members[offset..offset + count] {
                out[split].push((*member).clone());
            }
            offset += count;
        }
    }

    let [train, val, test] = out;
    Ok(Splits { train, val, test })
}

/// Largest-remainder apportionment of `n` items over the fractions, with
/// remainder ties resolved by a seeded draw and train kept non-empty.
fn largest_remainder(n: usize, fracs: &[f64; 3], rng: &mut ChaCha8Rng) -> [usize; 3] {
    let quotas: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (i, q) in quotas.iter().enumerate() {
        counts[i] = q.floor() as usize;
    }
    let assigned: usize = counts.iter().sum();

    let mut order: Vec<(f64, f64, usize)> = quotas
        .iter()
        .enumerate()
        .map(|(i, q)| (q - q.floor(), rng.random::<f64>(), i))
        .collect();
    order.sort_by(|a, b| b.partial_cmp(a).expect("finite keys"));
    for k in 0..(n - assigned) {
        counts[order[k].2] += 1;
    }

    if counts[0] == 0 {
        let donor = if counts[1] >= counts[2] { 1 } else { 2 };
        counts[donor] -= 1;
        counts[0] += 1;
    }
    counts
}

fn draw_split(fracs: &[f64; 3], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = fracs.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, f) in fracs.iter().enumerate() {
        if x < *f {
            return i;
        }
        x -= f;
    }
    2
}
