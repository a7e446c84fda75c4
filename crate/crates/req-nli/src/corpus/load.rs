//! CSV loaders and writers. All files are plain RFC 4180 CSV with a header row.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::warn;

use crate::corpus::{canonical_pair, ConflictProject, ConflictRequirement, Dataset, Requirement};
use crate::{Error, Result};

/// The closed set of specification-defect categories.
pub const DEFECT_CATEGORIES: [&str; 6] = [
    "Ambiguous",
    "Directive",
    "Non-Atomic",
    "Non-Measurable",
    "Optional",
    "Uncertain",
];

fn check_header(path: &Path, got: &csv::StringRecord, want: &[&str]) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        return Err(Error::Data(format!(
            "{}: expected header {:?}, got {:?}",
            path.display(),
            want,
            got
        )));
    }
    Ok(())
}

fn non_empty(path: &Path, line: u64, field: &str, value: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::Data(format!(
            "{}: line {}: empty {}",
            path.display(),
            line,
            field
        )));
    }
    Ok(v.to_string())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    check_header(path, reader.headers()?, header)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut fields = Vec::with_capacity(header.len());
        for (i, name) in header.iter().enumerate() {
            let raw = record.get(i).ok_or_else(|| {
                Error::Data(format!("{}: line {}: missing {}", path.display(), line, name))
            })?;
            fields.push(non_empty(path, line, name, raw)?);
        }
        out.push((line, fields));
    }
    Ok(out)
}

fn check_unique_ids(path: &Path, rows: &[Requirement]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in rows {
        if !seen.insert(r.id.clone()) {
            return Err(Error::Data(format!(
                "{}: duplicate requirement id {:?}",
                path.display(),
                r.id
            )));
        }
    }
    Ok(())
}

/// Load a category-classification dataset (columns `id,text,category`).
///
/// Categories represented by a single row cannot appear in both train and
/// test, so their rows are dropped with a warning and excluded from the
/// catalog.
pub fn load_classification_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_rows(path, &["id", "text", "category"])?;
    let mut rows: Vec<Requirement> = raw
        .into_iter()
        .map(|(_, f)| Requirement {
            id: f[0].clone(),
            text: f[1].clone(),
            category: f[2].clone(),
        })
        .collect();
    check_unique_ids(path, &rows)?;

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &rows {
        *counts.entry(r.category.clone()).or_default() += 1;
    }
    let singletons: BTreeSet<String> = counts
        .iter()
        .filter(|(_, &n)| n < 2)
        .map(|(c, _)| c.clone())
        .collect();
    if !singletons.is_empty() {
        for r in rows.iter().filter(|r| singletons.contains(&r.category)) {
            warn!(
                "dropping {:?} (category {:?} has a single row; cannot be split)",
                r.id, r.category
            );
        }
        rows.retain(|r| !singletons.contains(&r.category));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }
    Ok(Dataset::from_rows(rows))
}

/// Load a specification-defect dataset (columns `id,text,defect_category`).
///
/// Labels must come from [`DEFECT_CATEGORIES`]; anything else is a data error.
pub fn load_defect_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let raw = read_rows(path, &["id", "text", "defect_category"])?;
    let mut rows = Vec::with_capacity(raw.len());
    for (line, f) in raw {
        if !DEFECT_CATEGORIES.contains(&f[2].as_str()) {
            return Err(Error::Data(format!(
                "{}: line {}: unknown defect category {:?} (expected one of {:?})",
                path.display(),
                line,
                f[2],
                DEFECT_CATEGORIES
            )));
        }
        rows.push(Requirement {
            id: f[0].clone(),
            text: f[1].clone(),
            category: f[2].clone(),
        });
    }
    check_unique_ids(path, &rows)?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no usable rows", path.display())));
    }
    Ok(Dataset::from_rows(rows))
}

/// Load one conflict-detection project from a requirements file (columns
/// `id,text`) and a gold-pairs file (columns `id_a,id_b`).
///
/// Pairs are unordered: a reversed duplicate is collapsed with a warning.
/// A pair id that matches no requirement is a reference error.
pub fn load_conflict_project(
    name: &str,
    reqs_path: impl AsRef<Path>,
    pairs_path: impl AsRef<Path>,
) -> Result<ConflictProject> {
    let reqs_path = reqs_path.as_ref();
    let pairs_path = pairs_path.as_ref();

    let raw = read_rows(reqs_path, &["id", "text"])?;
    let requirements: Vec<ConflictRequirement> = raw
        .into_iter()
        .map(|(_, f)| ConflictRequirement {
            id: f[0].clone(),
            text: f[1].clone(),
        })
        .collect();
    let ids: BTreeSet<&str> = requirements.iter().map(|r| r.id.as_str()).collect();
    if ids.len() != requirements.len() {
        return Err(Error::Data(format!(
            "{}: duplicate requirement ids",
            reqs_path.display()
        )));
    }

    let raw = read_rows(pairs_path, &["id_a", "id_b"])?;
    let mut gold_pairs: Vec<(String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, f) in raw {
        for id in [&f[0], &f[1]] {
            if !ids.contains(id.as_str()) {
                return Err(Error::Reference(format!(
                    "{}: line {}: pair references unknown requirement id {:?}",
                    pairs_path.display(),
                    line,
                    id
                )));
            }
        }
        if f[0] == f[1] {
            return Err(Error::Data(format!(
                "{}: line {}: pair of a requirement with itself",
                pairs_path.display(),
                line
            )));
        }
        let key = canonical_pair(&f[0], &f[1]);
        if !seen.insert(key.clone()) {
            warn!(
                "{}: line {}: duplicate pair ({}, {}) collapsed",
                pairs_path.display(),
                line,
                f[0],
                f[1]
            );
            continue;
        }
        gold_pairs.push(key);
    }
    Ok(ConflictProject {
        name: name.to_string(),
        requirements,
        gold_pairs,
    })
}

/// Write a categorical dataset back out in loader-compatible form.
pub fn write_dataset_csv(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    category_column: &str,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(["id", "text", category_column])?;
    for r in &dataset.rows {
        writer.write_record([&r.id, &r.text, &r.category])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn classification_loads_and_drops_singleton_categories() {
        let f = write_tmp(
            "id,text,category\n\
             r1,the system shall respond fast,Performance\n\
             r2,the system shall respond faster,Performance\n\
             r3,the product shall run on tablets,Portability\n",
        );
        let ds = load_classification_csv(f.path()).unwrap();
        assert_eq!(ds.rows.len(), 2);
        assert_eq!(ds.catalog, vec!["Performance".to_string()]);
    }

    #[test]
    fn classification_rejects_empty_text() {
        let f = write_tmp("id,text,category\nr1,,Performance\n");
        assert!(matches!(
            load_classification_csv(f.path()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn classification_rejects_duplicate_ids() {
        let f = write_tmp(
            "id,text,category\nr1,a requirement,X\nr1,another requirement,X\n",
        );
        assert!(matches!(
            load_classification_csv(f.path()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn classification_rejects_wrong_header() {
        let f = write_tmp("id,body,category\nr1,a,X\n");
        assert!(matches!(
            load_classification_csv(f.path()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn defects_reject_unknown_category() {
        let f = write_tmp("id,text,defect_category\nd1,the text,Vague\n");
        assert!(matches!(load_defect_csv(f.path()), Err(Error::Data(_))));
    }

    #[test]
    fn defects_load_known_categories() {
        let f = write_tmp(
            "id,text,defect_category\n\
             d1,the text may be shown,Ambiguous\n\
             d2,see the figure below,Directive\n",
        );
        let ds = load_defect_csv(f.path()).unwrap();
        assert_eq!(ds.rows.len(), 2);
        assert_eq!(ds.catalog, vec!["Ambiguous", "Directive"]);
    }

    #[test]
    fn conflict_pairs_dedupe_reversals_and_catch_dangling_ids() {
        let reqs = write_tmp("id,text\nr1,first\nr2,second\nr3,third\n");
        let pairs = write_tmp("id_a,id_b\nr1,r2\nr2,r1\nr3,r1\n");
        let p = load_conflict_project("demo", reqs.path(), pairs.path()).unwrap();
        assert_eq!(p.gold_pairs.len(), 2);
        assert_eq!(p.candidate_pair_count(), 3);
        assert!(p.is_gold("r2", "r1"));

        let bad = write_tmp("id_a,id_b\nr1,r9\n");
        assert!(matches!(
            load_conflict_project("demo", reqs.path(), bad.path()),
            Err(Error::Reference(_))
        ));
    }

    #[test]
    fn conflict_rejects_self_pair() {
        let reqs = write_tmp("id,text\nr1,first\nr2,second\n");
        let pairs = write_tmp("id_a,id_b\nr1,r1\n");
        assert!(matches!(
            load_conflict_project("demo", reqs.path(), pairs.path()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn dataset_roundtrips_through_csv() {
        let f = write_tmp(
            "id,text,category\n\
             r1,\"text with, comma\",Security\n\
             r2,\"text with \"\"quotes\"\"\",Security\n",
        );
        let ds = load_classification_csv(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_dataset_csv(out.path(), &ds, "category").unwrap();
        let reloaded = load_classification_csv(out.path()).unwrap();
        assert_eq!(ds, reloaded);
    }
}
