//! Confusion counts, per-class metrics, weighted averages, and report
//! rendering.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Binary confusion counts for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionCounts {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
        }
    }

    /// Record one prediction against its gold label.
    pub fn observe(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.true_positives += 1,
            (false, true) => self.false_positives += 1,
            (true, false) => self.false_negatives += 1,
            (false, false) => self.true_negatives += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }

    /// Gold-positive count; used as the weight in weighted averages.
    pub fn support(&self) -> usize {
        self.true_positives + self.false_negatives
    }

    /// Zero when no positive predictions were made.
    pub fn precision(&self) -> f64 {
        let denom = self.true_positives + self.false_positives;
        if denom == 0 {
            0.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    /// Zero when the class has no gold positives.
    pub fn recall(&self) -> f64 {
        let denom = self.support();
        if denom == 0 {
            0.0
        } else {
            self.true_positives as f64 / denom as f64
        }
    }

    /// Harmonic mean of precision and recall; zero when both are zero.
    pub fn f1(&self) -> f64 {
        let p = self.precision();
        let r = self.recall();
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Zero on an empty table.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            (self.true_positives + self.true_negatives) as f64 / total as f64
        }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics {
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
            accuracy: self.accuracy(),
            support: self.support(),
        }
    }
}

/// Derived metrics for one class (or one weighted average).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub support: usize,
}

/// Support-weighted average of per-class metrics.
///
/// Every metric is weighted by its class support; zero total support yields
/// all-zero metrics with zero support.
pub fn weighted_average(per_class: &[Metrics]) -> Metrics {
    let total: usize = per_class.iter().map(|m| m.support).sum();
    if total == 0 {
        return Metrics {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            accuracy: 0.0,
            support: 0,
        };
    }
    let weight = |f: fn(&Metrics) -> f64| -> f64 {
        per_class
            .iter()
            .map(|m| f(m) * m.support as f64)
            .sum::<f64>()
            / total as f64
    };
    Metrics {
        precision: weight(|m| m.precision),
        recall: weight(|m| m.recall),
        f1: weight(|m| m.f1),
        accuracy: weight(|m| m.accuracy),
        support: total,
    }
}

/// Mean and sample standard deviation across repeated runs.
///
/// Fewer than two runs have zero spread by definition.
pub fn aggregate_runs(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot aggregate zero runs".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// One row of a rendered report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub task: String,
    pub category: String,
    pub metrics: Metrics,
    pub runs: usize,
    /// Sample standard deviation of F1 across runs.
    pub stddev: f64,
}

/// Label used for the support-weighted summary row of a report.
pub const WEIGHTED_ROW: &str = "weighted_avg";

/// Render rows as CSV with a fixed header and 4-decimal metric columns.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out =
        String::from("method,task,category,precision,recall,f1,accuracy,support,runs,stddev\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{},{},{:.4}\n",
            r.method,
            r.task,
            escape_csv_field(&r.category),
            r.metrics.precision,
            r.metrics.recall,
            r.metrics.f1,
            r.metrics.accuracy,
            r.metrics.support,
            r.runs,
            r.stddev
        ));
    }
    out
}

fn escape_csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render rows as an aligned plain-text table with percent metrics.
pub fn render_table(title: &str, rows: &[ReportRow]) -> String {
    let mut width = "Category".len();
    for r in rows {
        width = width.max(r.category.len());
    }
    let mut out = String::new();
    out.push_str(title);
    out.push('\n');
    out.push_str(&format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>7}\n",
        "Category", "P", "R", "F1", "Acc", "Support"
    ));
    out.push_str(&"-".repeat(width + 2 + 4 * 8 + 9));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6.1}  {:>7}\n",
            r.category,
            r.metrics.precision * 100.0,
            r.metrics.recall * 100.0,
            r.metrics.f1 * 100.0,
            r.metrics.accuracy * 100.0,
            r.metrics.support
        ));
    }
    out
}
