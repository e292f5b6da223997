//! Labeled MIB feature tables: CSV ingestion, seeded holdout splits and
//! min/max scaling for the perceptron.
//!
//! CSV layout: a header row, one column per feature, and a final column
//! named `class` holding the label. Every feature cell must parse as a
//! finite real; a bad cell rejects the whole file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASS_COLUMN: &str = "class";

/// Ordered, unique feature names. Record values align with it positionally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let mut seen = HashSet::new();
        for name in &names {
            if name.trim().is_empty() {
                return Err(Error::Schema("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        Ok(FeatureSchema { names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Names in `self` but not in `other`, then names in `other` but not in `self`.
    pub fn difference(&self, other: &FeatureSchema) -> (Vec<String>, Vec<String>) {
        let missing = self
            .names
            .iter()
            .filter(|n| other.index_of(n).is_none())
            .cloned()
            .collect();
        let extra = other
            .names
            .iter()
            .filter(|n| self.index_of(n).is_none())
            .cloned()
            .collect();
        (missing, extra)
    }

    /// Column indices in `source` for each of our names. On failure the error
    /// lists the names `source` lacks and the ones it has beyond ours.
    pub fn projection_from(&self, source: &FeatureSchema) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(self.len());
        let mut missing = Vec::new();
        for name in &self.names {
            match source.index_of(name) {
                Some(i) => idx.push(i),
                None => missing.push(name.clone()),
            }
        }
        if missing.is_empty() {
            Ok(idx)
        } else {
            let (_, extra) = self.difference(source);
            Err(Error::SchemaMismatch { missing, extra })
        }
    }
}

/// One observation. `label` indexes the owning dataset's class catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct MibRecord {
    pub values: Vec<f64>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    classes: Vec<String>,
    records: Vec<MibRecord>,
}

impl Dataset {
    /// Checks that every record has the schema's width, finite values and
    /// a label inside the catalog.
    pub fn new(schema: FeatureSchema, classes: Vec<String>, records: Vec<MibRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for c in &classes {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("duplicate class label {c:?}")));
            }
        }
        for (row, r) in records.iter().enumerate() {
            if r.values.len() != schema.len() {
                return Err(Error::Length {
                    expected: schema.len(),
                    got: r.values.len(),
                });
            }
            if let Some(col) = r.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Cell {
                    row: row + 1,
                    column: schema.names()[col].clone(),
                    reason: "non-finite value".into(),
                });
            }
            if r.label >= classes.len() {
                return Err(Error::UnknownLabel(format!("class index {}", r.label)));
            }
        }
        Ok(Dataset {
            schema,
            classes,
            records,
        })
    }

    /// Builds a dataset from string labels; the catalog is the labels in
    /// order of first appearance.
    pub fn from_labeled_rows<S: AsRef<str>>(
        schema: FeatureSchema,
        rows: impl IntoIterator<Item = (Vec<f64>, S)>,
    ) -> Result<Self> {
        let mut classes: Vec<String> = Vec::new();
        let mut records = Vec::new();
        for (values, label) in rows {
            let label = label.as_ref();
            let idx = match classes.iter().position(|c| c == label) {
                Some(i) => i,
                None => {
                    classes.push(label.to_string());
                    classes.len() - 1
                }
            };
            records.push(MibRecord { values, label: idx });
        }
        Dataset::new(schema, classes, records)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn records(&self) -> &[MibRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn label_name(&self, record: &MibRecord) -> &str {
        &self.classes[record.label]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Record count per catalog entry.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes.len()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// Same catalog and schema, different records.
    pub(crate) fn with_records(&self, records: Vec<MibRecord>) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            classes: self.classes.clone(),
            records,
        }
    }

    /// Keeps only the columns named by `target`, in its order.
    pub fn project(&self, target: &FeatureSchema) -> Result<Dataset> {
        let idx = target.projection_from(&self.schema)?;
        let records = self
            .records
            .iter()
            .map(|r| MibRecord {
                values: idx.iter().map(|&i| r.values[i]).collect(),
                label: r.label,
            })
            .collect();
        Ok(Dataset {
            schema: target.clone(),
            classes: self.classes.clone(),
            records,
        })
    }

    /// Re-expresses labels against `catalog`, appending any label the
    /// catalog lacks. Returns the dataset and the extended catalog.
    pub fn relabel(&self, catalog: &[String]) -> Dataset {
        let mut classes = catalog.to_vec();
        let map: Vec<usize> = self
            .classes
            .iter()
            .map(|c| match classes.iter().position(|k| k == c) {
                Some(i) => i,
                None => {
                    classes.push(c.clone());
                    classes.len() - 1
                }
            })
            .collect();
        let records = self
            .records
            .iter()
            .map(|r| MibRecord {
                values: r.values.clone(),
                label: map[r.label],
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            classes,
            records,
        }
    }
}

fn parse_cell(text: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::Cell {
            row,
            column: column.to_string(),
            reason: "missing value".into(),
        });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::Cell {
            row,
            column: column.to_string(),
            reason: format!("non-finite value {trimmed:?}"),
        }),
        Err(_) => Err(Error::Cell {
            row,
            column: column.to_string(),
            reason: format!("not a number: {trimmed:?}"),
        }),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads a labeled CSV. When `expected` is given the header must match it
/// exactly (same names, same order).
pub fn load_csv(path: impl AsRef<Path>, expected: Option<&FeatureSchema>) -> Result<Dataset> {
    let path = path.as_ref();
    read_csv(open(path)?, expected)
}

pub fn read_csv<R: Read>(reader: R, expected: Option<&FeatureSchema>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    match header.last() {
        Some(last) if last == CLASS_COLUMN => {}
        _ => {
            return Err(Error::Header(format!(
                "last column must be named {CLASS_COLUMN:?}"
            )))
        }
    }
    let schema = FeatureSchema::new(header[..header.len() - 1].iter().cloned())?;
    if let Some(expected) = expected {
        if expected != &schema {
            let (missing, extra) = expected.difference(&schema);
            return Err(Error::SchemaMismatch { missing, extra });
        }
    }

    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Cell {
                row,
                column: CLASS_COLUMN.into(),
                reason: format!("expected {} cells, found {}", header.len(), rec.len()),
            });
        }
        let mut values = Vec::with_capacity(schema.len());
        for (col, name) in schema.names().iter().enumerate() {
            values.push(parse_cell(&rec[col], row, name)?);
        }
        let label = rec[schema.len()].trim();
        if label.is_empty() {
            return Err(Error::Cell {
                row,
                column: CLASS_COLUMN.into(),
                reason: "missing label".into(),
            });
        }
        rows.push((values, label.to_string()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyBody);
    }
    Dataset::from_labeled_rows(schema, rows)
}

/// Feature rows without labels, as fed to prediction or produced by the
/// SNMP collector. A trailing `class` column, if present, is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledTable {
    pub schema: FeatureSchema,
    pub rows: Vec<Vec<f64>>,
    /// The original cell text of each row (features only).
    pub raw: Vec<Vec<String>>,
}

pub fn load_unlabeled_csv(path: impl AsRef<Path>) -> Result<UnlabeledTable> {
    let path = path.as_ref();
    read_unlabeled_csv(open(path)?)
}

pub fn read_unlabeled_csv<R: Read>(reader: R) -> Result<UnlabeledTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.last().map(String::as_str) == Some(CLASS_COLUMN) {
        header.pop();
    }
    let schema = FeatureSchema::new(header)?;
    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() < schema.len() {
            return Err(Error::Cell {
                row,
                column: schema.names().last().cloned().unwrap_or_default(),
                reason: format!("expected {} cells, found {}", schema.len(), rec.len()),
            });
        }
        let mut values = Vec::with_capacity(schema.len());
        let mut cells = Vec::with_capacity(schema.len());
        for (col, name) in schema.names().iter().enumerate() {
            values.push(parse_cell(&rec[col], row, name)?);
            cells.push(rec[col].trim().to_string());
        }
        rows.push(values);
        raw.push(cells);
    }
    Ok(UnlabeledTable { schema, rows, raw })
}

/// Writes `d` in the format [`load_csv`] reads. Reals use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = d.schema.names().iter().map(String::as_str).collect();
    header.push(CLASS_COLUMN);
    w.write_record(&header)?;
    for r in &d.records {
        let mut row: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        row.push(d.classes[r.label].clone());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(d, file)
}

/// Number of training records for `fraction` of `n`, i.e. floor(fraction·n).
/// The small slack absorbs products like 0.7·10 landing a hair below 7.
fn train_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Seeded holdout split.
///
/// Records are shuffled once with `seed`. Unstratified, the first
/// floor(fraction·N) shuffled records train. Stratified, each class keeps
/// floor(fraction·n_c) of its shuffled records and the shortfall up to
/// floor(fraction·N) is handed out one record per class in catalog order.
/// Both halves keep shuffled order and the parent's class catalog.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64, stratified: bool) -> Result<(Dataset, Dataset)> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in (0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let target = train_count(train_fraction, d.len());
    let in_train: Vec<bool> = if stratified {
        let counts = d.class_counts();
        let mut quota: Vec<usize> = counts.iter().map(|&n| train_count(train_fraction, n)).collect();
        let mut short = target.saturating_sub(quota.iter().sum());
        while short > 0 {
            let before = short;
            for (c, q) in quota.iter_mut().enumerate() {
                if short == 0 {
                    break;
                }
                if *q < counts[c] {
                    *q += 1;
                    short -= 1;
                }
            }
            if short == before {
                break;
            }
        }
        let mut taken = vec![0usize; counts.len()];
        let mut flags = vec![false; d.len()];
        for &i in &order {
            let c = d.records[i].label;
            if taken[c] < quota[c] {
                taken[c] += 1;
                flags[i] = true;
            }
        }
        flags
    } else {
        let mut flags = vec![false; d.len()];
        for &i in &order[..target] {
            flags[i] = true;
        }
        flags
    };

    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(d.len() - target);
    for &i in &order {
        if in_train[i] {
            train.push(d.records[i].clone());
        } else {
            test.push(d.records[i].clone());
        }
    }
    Ok((d.with_records(train), d.with_records(test)))
}

/// Per-feature affine map onto [-1, 1] learned from training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    schema: FeatureSchema,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn from_bounds(schema: FeatureSchema, min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != schema.len() || max.len() != schema.len() {
            return Err(Error::Length {
                expected: schema.len(),
                got: min.len().min(max.len()),
            });
        }
        if min.iter().zip(&max).any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidArgument("normalizer min exceeds max".into()));
        }
        Ok(Normalizer { schema, min, max })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    /// Scales one value of feature `j`. Constant features map to 0 and
    /// values outside the training range are not clamped.
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi == lo {
            0.0
        } else {
            -1.0 + 2.0 * (x - lo) / (hi - lo)
        }
    }

    /// Inverse of [`scale`](Self::scale) for non-constant features; constant
    /// features return their single training value.
    pub fn unscale(&self, j: usize, y: f64) -> f64 {
        let (lo, hi) = (self.min[j], self.max[j]);
        if hi == lo {
            lo
        } else {
            lo + (y + 1.0) * (hi - lo) / 2.0
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.schema.len() {
            return Err(Error::Length {
                expected: self.schema.len(),
                got: row.len(),
            });
        }
        Ok(row.iter().enumerate().map(|(j, &x)| self.scale(j, x)).collect())
    }
}

pub fn fit_normalizer(train: &Dataset) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = train.n_features();
    let mut min = vec![f64::INFINITY; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for r in train.records() {
        for (j, &v) in r.values.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Normalizer::from_bounds(train.schema().clone(), min, max)
}

pub fn apply_normalizer(n: &Normalizer, d: &Dataset) -> Result<Dataset> {
    if n.schema() != d.schema() {
        let (missing, extra) = n.schema().difference(d.schema());
        return Err(Error::SchemaMismatch { missing, extra });
    }
    let records = d
        .records()
        .iter()
        .map(|r| MibRecord {
            values: r.values.iter().enumerate().map(|(j, &x)| n.scale(j, x)).collect(),
            label: r.label,
        })
        .collect();
    Ok(d.with_records(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(names: &[&str]) -> FeatureSchema {
        FeatureSchema::new(names.iter().copied()).unwrap()
    }

    fn toy(n: usize, classes: usize) -> Dataset {
        let s = schema(&["a", "b"]);
        let rows = (0..n).map(|i| (vec![i as f64, (i * 7 % 5) as f64], format!("c{}", i % classes)));
        Dataset::from_labeled_rows(s, rows).unwrap()
    }

    #[test]
    fn schema_rejects_duplicates_and_blanks() {
        assert!(FeatureSchema::new(["a", "a"]).is_err());
        assert!(FeatureSchema::new(["a", " "]).is_err());
    }

    #[test]
    fn reads_simple_csv() {
        let text = "x,y,class\n1,2,A\n3.5,-4,B\n";
        let d = read_csv(text.as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.schema().names(), &["x", "y"]);
        assert_eq!(d.classes(), &["A", "B"]);
        assert_eq!(d.records()[1].values, vec![3.5, -4.0]);
    }

    #[test]
    fn header_only_is_empty_body() {
        let err = read_csv("x,class\n".as_bytes(), None).unwrap_err();
        assert!(matches!(err, Error::EmptyBody), "{err}");
    }

    #[test]
    fn nan_cell_names_row_and_column() {
        let mut text = String::from("x,y,class\n");
        for i in 1..=10 {
            if i == 7 {
                text.push_str("1,NaN,A\n");
            } else {
                text.push_str("1,2,A\n");
            }
        }
        let err = read_csv(text.as_bytes(), None).unwrap_err();
        match &err {
            Error::Cell { row, column, .. } => {
                assert_eq!(*row, 7);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other}"),
        }
        let msg = err.to_string();
        assert!(msg.contains("row 7") && msg.contains("\"y\""), "{msg}");
    }

    #[test]
    fn missing_and_garbage_cells_rejected() {
        assert!(matches!(
            read_csv("x,class\n,A\n".as_bytes(), None),
            Err(Error::Cell { row: 1, .. })
        ));
        assert!(matches!(
            read_csv("x,class\n1,A\nfoo,B\n".as_bytes(), None),
            Err(Error::Cell { row: 2, .. })
        ));
        assert!(matches!(
            read_csv("x,class\ninf,A\n".as_bytes(), None),
            Err(Error::Cell { .. })
        ));
    }

    #[test]
    fn class_must_be_last_column() {
        assert!(matches!(
            read_csv("class,x\nA,1\n".as_bytes(), None),
            Err(Error::Header(_))
        ));
    }

    #[test]
    fn expected_schema_enforced() {
        let want = schema(&["x", "y"]);
        assert!(read_csv("x,y,class\n1,2,A\n".as_bytes(), Some(&want)).is_ok());
        let err = read_csv("y,x,class\n1,2,A\n".as_bytes(), Some(&want)).unwrap_err();
        assert!(matches!(err, Error::SchemaMismatch { .. }));
        let err = read_csv("x,z,class\n1,2,A\n".as_bytes(), Some(&want)).unwrap_err();
        match err {
            Error::SchemaMismatch { missing, extra } => {
                assert_eq!(missing, vec!["y"]);
                assert_eq!(extra, vec!["z"]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_csv("/nonexistent/definitely/not/here.csv", None),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn paper_sized_split_is_3498_1500() {
        let d = toy(4998, 8);
        let (train, test) = split(&d, 0.7, 42, false).unwrap();
        assert_eq!(train.len(), 3498);
        assert_eq!(test.len(), 1500);
        let (train, test) = split(&d, 0.7, 42, true).unwrap();
        assert_eq!(train.len(), 3498);
        assert_eq!(test.len(), 1500);
    }

    #[test]
    fn full_fraction_keeps_everything_in_train() {
        let d = toy(50, 3);
        let (train, test) = split(&d, 1.0, 9, false).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.len(), 50);
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(200, 4);
        for strat in [false, true] {
            let a = split(&d, 0.6, 5, strat).unwrap();
            let b = split(&d, 0.6, 5, strat).unwrap();
            assert_eq!(a, b);
        }
        assert_ne!(split(&d, 0.6, 5, false).unwrap(), split(&d, 0.6, 6, false).unwrap());
    }

    #[test]
    fn bad_fraction_rejected() {
        let d = toy(10, 2);
        assert!(split(&d, 0.0, 1, false).is_err());
        assert!(split(&d, 1.5, 1, false).is_err());
        assert!(split(&d, f64::NAN, 1, false).is_err());
    }

    #[test]
    fn normalizer_examples() {
        let s = schema(&["a"]);
        let n = Normalizer::from_bounds(s.clone(), vec![0.0], vec![10.0]).unwrap();
        assert_eq!(n.scale(0, 5.0), 0.0);
        assert_eq!(n.scale(0, 10.0), 1.0);
        assert_eq!(n.scale(0, 20.0), 3.0);
        let n = Normalizer::from_bounds(s.clone(), vec![2.0], vec![6.0]).unwrap();
        assert_eq!(n.scale(0, 3.0), -0.5);

        let d = Dataset::from_labeled_rows(s, [(vec![4.0], "A"), (vec![4.0], "B"), (vec![4.0], "A")]).unwrap();
        let n = fit_normalizer(&d).unwrap();
        assert_eq!(n.scale(0, 4.0), 0.0);
        assert_eq!(n.scale(0, 9.0), 0.0);
    }

    #[test]
    fn normalizer_fits_train_only() {
        let s = schema(&["a"]);
        let train = Dataset::from_labeled_rows(s.clone(), [(vec![0.0], "A"), (vec![10.0], "B")]).unwrap();
        let test = Dataset::from_labeled_rows(s, [(vec![20.0], "A")]).unwrap();
        let n = fit_normalizer(&train).unwrap();
        let scaled = apply_normalizer(&n, &test).unwrap();
        assert_eq!(scaled.records()[0].values, vec![3.0]);
    }

    #[test]
    fn apply_normalizer_checks_schema() {
        let d = toy(10, 2);
        let n = fit_normalizer(&d).unwrap();
        let other = d.project(&schema(&["b"])).unwrap();
        assert!(matches!(apply_normalizer(&n, &other), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn relabel_extends_catalog() {
        let d = Dataset::from_labeled_rows(schema(&["a"]), [(vec![1.0], "B"), (vec![2.0], "Z")]).unwrap();
        let r = d.relabel(&["A".to_string(), "B".to_string()]);
        assert_eq!(r.classes(), &["A", "B", "Z"]);
        assert_eq!(r.labels(), vec![1, 2]);
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (1usize..4, 1usize..60).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(-1e9f64..1e9, m), n),
                proptest::collection::vec(0usize..4, n),
            )
                .prop_map(move |(rows, labels)| {
                    let names: Vec<String> = (0..m).map(|j| format!("f{j}")).collect();
                    let s = FeatureSchema::new(names).unwrap();
                    Dataset::from_labeled_rows(
                        s,
                        rows.into_iter().zip(labels).map(|(r, l)| (r, format!("L{l}"))),
                    )
                    .unwrap()
                })
        })
    }

    fn sorted_rows(d: &Dataset) -> Vec<(Vec<u64>, String)> {
        let mut v: Vec<_> = d
            .records()
            .iter()
            .map(|r| (r.values.iter().map(|x| x.to_bits()).collect(), d.label_name(r).to_string()))
            .collect();
        v.sort();
        v
    }

    proptest! {
        #[test]
        fn split_is_a_partition(d in arb_dataset(), frac in 0.05f64..=1.0, seed: u64, strat: bool) {
            let (train, test) = split(&d, frac, seed, strat).unwrap();
            prop_assert_eq!(train.len() + test.len(), d.len());
            prop_assert_eq!(train.len(), train_count(frac, d.len()));
            let mut joined = train.records().to_vec();
            joined.extend_from_slice(test.records());
            prop_assert_eq!(sorted_rows(&d.with_records(joined)), sorted_rows(&d));
            if strat {
                let all = d.class_counts();
                let tr = train.class_counts();
                for c in 0..all.len() {
                    let want = frac * all[c] as f64;
                    prop_assert!((tr[c] as f64 - want).abs() <= 1.0 + 1e-9,
                        "class {} got {} want {}", c, tr[c], want);
                }
            }
        }

        #[test]
        fn csv_round_trip(d in arb_dataset()) {
            let mut buf = Vec::new();
            write_csv(&d, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), None).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn normalized_train_hits_both_endpoints(d in arb_dataset()) {
            let n = fit_normalizer(&d).unwrap();
            let scaled = apply_normalizer(&n, &d).unwrap();
            for j in 0..d.n_features() {
                let col: Vec<f64> = scaled.records().iter().map(|r| r.values[j]).collect();
                prop_assert!(col.iter().all(|v| (-1.0..=1.0).contains(v)));
                if n.min()[j] < n.max()[j] {
                    prop_assert!(col.contains(&-1.0));
                    prop_assert!(col.contains(&1.0));
                }
                for (r, s) in d.records().iter().zip(scaled.records()) {
                    let back = n.unscale(j, s.values[j]);
                    let x = r.values[j];
                    if n.min()[j] < n.max()[j] {
                        let span = n.max()[j] - n.min()[j];
                        prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(span));
                    }
                }
            }
        }
    }
}
