//! Datasets, the initial labeled/unlabeled split, and the evolving pool.
//!
//! Features and labels are stored separately. Strategies only ever see a
//! [`FeatureMatrix`] and a [`PoolState`] (whose labels are the revealed ones);
//! [`HiddenLabels`] is handed to harness and oracle code only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Stable row identifier: the 0-based position of the row in its source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowId(pub usize);

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary transaction label. `Fraud` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Legit,
    Fraud,
}

impl Label {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Legit),
            1 => Some(Label::Fraud),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Legit => 0,
            Label::Fraud => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_fraud(self) -> bool {
        self == Label::Fraud
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom(format!("label {v} is not 0 or 1")))
    }
}

/// One row as it appears in a source file.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub row_id: RowId,
    pub features: Vec<f64>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub n_samples: usize,
    /// Number of feature columns (the label column is not counted).
    pub dimension: usize,
    pub n_positives: usize,
    pub anomaly_proportion: f64,
}

impl DatasetDescriptor {
    fn from_counts(name: &str, n_samples: usize, dimension: usize, n_positives: usize) -> Self {
        DatasetDescriptor {
            name: name.to_string(),
            n_samples,
            dimension,
            n_positives,
            anomaly_proportion: n_positives as f64 / n_samples as f64,
        }
    }
}

impl fmt::Display for DatasetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: n_samples={} dimension={} positives={} anomaly_proportion={:.4} ({:.2}%)",
            self.name,
            self.n_samples,
            self.dimension,
            self.n_positives,
            self.anomaly_proportion,
            100.0 * self.anomaly_proportion
        )
    }
}

/// Row-major feature storage, the only view of the data strategies get.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    dim: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let dim = names.len();
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
            });
        }
        Ok(FeatureMatrix { names, dim, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        let names = (0..dim).map(|j| format!("x{j}")).collect();
        FeatureMatrix::new(names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Panics if `row` is out of range.
    pub fn row(&self, row: RowId) -> &[f64] {
        let start = row.0 * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn get(&self, row: RowId) -> Option<&[f64]> {
        (row.0 < self.n_rows()).then(|| self.row(row))
    }
}

/// Ground-truth labels. Only the oracle side of a run holds one of these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenLabels {
    labels: Vec<Label>,
}

impl HiddenLabels {
    pub fn new(labels: Vec<Label>) -> Self {
        HiddenLabels { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, row: RowId) -> Option<Label> {
        self.labels.get(row.0).copied()
    }

    pub fn label(&self, row: RowId) -> Result<Label> {
        self.get(row).ok_or(Error::UnknownRow(row))
    }

    pub fn count_positives<'a>(&self, rows: impl IntoIterator<Item = &'a RowId>) -> usize {
        rows.into_iter()
            .filter(|r| self.get(**r) == Some(Label::Fraud))
            .count()
    }

    /// Copy with the labels of `rows` permuted among themselves (leak canaries).
    pub fn permuted(&self, rows: &[RowId], seed: u64) -> Self {
        use rand::seq::SliceRandom;
        let mut vals: Vec<Label> = rows.iter().map(|r| self.labels[r.0]).collect();
        vals.shuffle(&mut seeded_rng(seed));
        let mut labels = self.labels.clone();
        for (r, v) in rows.iter().zip(vals) {
            labels[r.0] = v;
        }
        HiddenLabels { labels }
    }
}

/// Something that can reveal the label of a queried row.
pub trait Oracle {
    fn reveal(&mut self, row: RowId) -> Result<Label>;
}

impl Oracle for &HiddenLabels {
    fn reveal(&mut self, row: RowId) -> Result<Label> {
        self.label(row)
    }
}

/// Oracle that answers with a label given ahead of time (a human verdict).
#[derive(Debug, Clone, Copy)]
pub struct Verdict(pub Label);

impl Oracle for Verdict {
    fn reveal(&mut self, _row: RowId) -> Result<Label> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub descriptor: DatasetDescriptor,
    pub features: FeatureMatrix,
    pub labels: HiddenLabels,
}

impl Dataset {
    pub fn from_records(name: &str, records: Vec<TransactionRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = records[0].features.len();
        let mut values = Vec::with_capacity(records.len() * dim);
        let mut labels = Vec::with_capacity(records.len());
        for (i, rec) in records.into_iter().enumerate() {
            if rec.row_id != RowId(i) {
                return Err(Error::Runtime(format!(
                    "record {i} carries row id {}; row ids must follow record order",
                    rec.row_id
                )));
            }
            if rec.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: rec.features.len(),
                });
            }
            values.extend(rec.features);
            labels.push(rec.label);
        }
        let names = (0..dim).map(|j| format!("x{j}")).collect();
        Dataset::new(name, FeatureMatrix::new(names, values)?, labels)
    }

    pub fn new(name: &str, features: FeatureMatrix, labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.n_rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                found: features.n_rows(),
            });
        }
        let positives = labels.iter().filter(|l| l.is_fraud()).count();
        let descriptor =
            DatasetDescriptor::from_counts(name, labels.len(), features.dim(), positives);
        Ok(Dataset {
            descriptor,
            features,
            labels: HiddenLabels::new(labels),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn record(&self, row: RowId) -> Option<TransactionRecord> {
        Some(TransactionRecord {
            row_id: row,
            features: self.features.get(row)?.to_vec(),
            label: self.labels.get(row)?,
        })
    }
}

/// Load a canonical CSV: a header row, one 0/1 label column, numeric features.
pub fn load_dataset(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    read_dataset(file, &name, label_column)
}

pub fn read_dataset(reader: impl std::io::Read, name: &str, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Csv("no feature columns".into()));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(Error::Schema {
                line,
                reason: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        for (i, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if i == label_idx {
                let label = match cell {
                    "0" | "0.0" => Label::Legit,
                    "1" | "1.0" => Label::Fraud,
                    _ => {
                        return Err(Error::InvalidLabel {
                            line,
                            value: cell.to_string(),
                        })
                    }
                };
                labels.push(label);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    line,
                    column: headers[i].trim().to_string(),
                    value: cell.to_string(),
                })?;
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Dataset::new(name, FeatureMatrix::new(names, values)?, labels)
}

/// Write a dataset in the canonical CSV layout (features then `label`).
pub fn write_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    let mut header: Vec<&str> = dataset.features.names().iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
    let mut buf = Vec::with_capacity(header.len());
    for i in 0..dataset.n_rows() {
        let row = RowId(i);
        buf.clear();
        buf.extend(dataset.features.row(row).iter().map(|v| v.to_string()));
        buf.push(dataset.labels.label(row)?.as_u8().to_string());
        w.write_record(&buf).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub init_fraction: f64,
    pub subsample_size: Option<usize>,
    pub seed: u64,
    pub min_positives: usize,
    pub min_negatives: usize,
    pub max_retries: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            init_fraction: 0.01,
            subsample_size: None,
            seed: 0,
            min_positives: 1,
            min_negatives: 1,
            max_retries: 100,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.init_fraction > 0.0 && self.init_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split.init_fraction must lie in (0, 1), got {}",
                self.init_fraction
            )));
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidConfig("split.max_retries must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Partition of the active rows into revealed and hidden labels at step `t`.
///
/// Snapshots are immutable; [`PoolState::apply_query`] returns a new one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: BTreeMap<RowId, Label>,
    unlabeled: BTreeSet<RowId>,
    step: usize,
}

impl PoolState {
    /// Build a pool directly. `t` starts at 1.
    pub fn new(
        labeled: impl IntoIterator<Item = (RowId, Label)>,
        unlabeled: impl IntoIterator<Item = RowId>,
    ) -> Result<Self> {
        let labeled: BTreeMap<RowId, Label> = labeled.into_iter().collect();
        let unlabeled: BTreeSet<RowId> = unlabeled.into_iter().collect();
        if let Some(r) = unlabeled.iter().find(|r| labeled.contains_key(r)) {
            return Err(Error::AlreadyLabeled(*r));
        }
        Ok(PoolState {
            labeled,
            unlabeled,
            step: 1,
        })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn n_labeled(&self) -> usize {
        self.labeled.len()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.unlabeled.is_empty()
    }

    /// Revealed labels in ascending row order.
    pub fn labeled(&self) -> impl ExactSizeIterator<Item = (RowId, Label)> + '_ {
        self.labeled.iter().map(|(r, l)| (*r, *l))
    }

    pub fn labeled_rows(&self) -> Vec<RowId> {
        self.labeled.keys().copied().collect()
    }

    pub fn label_of(&self, row: RowId) -> Option<Label> {
        self.labeled.get(&row).copied()
    }

    /// Hidden rows in ascending order; advice vectors follow this order.
    pub fn unlabeled(&self) -> impl ExactSizeIterator<Item = RowId> + '_ {
        self.unlabeled.iter().copied()
    }

    pub fn unlabeled_rows(&self) -> Vec<RowId> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn is_unlabeled(&self, row: RowId) -> bool {
        self.unlabeled.contains(&row)
    }

    pub fn labeled_positives(&self) -> usize {
        self.labeled.values().filter(|l| l.is_fraud()).count()
    }

    /// Reveal `row` through `oracle` and move it to the labeled side.
    pub fn apply_query<O: Oracle + ?Sized>(&self, row: RowId, oracle: &mut O) -> Result<(Self, Label)> {
        self.check_queryable(row)?;
        let label = oracle.reveal(row)?;
        Ok((self.with_label(row, label)?, label))
    }

    /// Like [`apply_query`](Self::apply_query) with the label already known.
    pub fn with_label(&self, row: RowId, label: Label) -> Result<Self> {
        self.check_queryable(row)?;
        let mut next = self.clone();
        next.unlabeled.remove(&row);
        next.labeled.insert(row, label);
        next.step += 1;
        Ok(next)
    }

    fn check_queryable(&self, row: RowId) -> Result<()> {
        if self.unlabeled.contains(&row) {
            Ok(())
        } else if self.labeled.contains_key(&row) {
            Err(Error::AlreadyLabeled(row))
        } else {
            Err(Error::UnknownRow(row))
        }
    }
}

/// Draw the initial labeled set: optional uniform subsample, then a uniform
/// labeled fraction, resampled until both class minima hold.
pub fn initial_split(dataset: &Dataset, config: &SplitConfig) -> Result<PoolState> {
    config.validate()?;
    let n = dataset.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seeded_rng(config.seed);

    let active: Vec<RowId> = match config.subsample_size {
        Some(size) if size < n => {
            let mut idx: Vec<usize> = sample(&mut rng, n, size).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(RowId).collect()
        }
        _ => (0..n).map(RowId).collect(),
    };

    let n_active = active.len();
    let n_labeled = (config.init_fraction * n_active as f64).floor() as usize;
    if n_labeled == 0 {
        return Err(Error::EmptySplit {
            fraction: config.init_fraction,
            n_rows: n_active,
        });
    }

    for _ in 0..config.max_retries {
        let mut picked: Vec<usize> = sample(&mut rng, n_active, n_labeled).into_vec();
        picked.sort_unstable();
        let positives = picked
            .iter()
            .filter(|&&i| dataset.labels.get(active[i]) == Some(Label::Fraud))
            .count();
        let negatives = picked.len() - positives;
        if positives < config.min_positives || negatives < config.min_negatives {
            continue;
        }
        let mut is_picked = vec![false; n_active];
        for &i in &picked {
            is_picked[i] = true;
        }
        let labeled = picked
            .iter()
            .map(|&i| (active[i], dataset.labels.get(active[i]).expect("row in range")));
        let unlabeled = active
            .iter()
            .enumerate()
            .filter(|(i, _)| !is_picked[*i])
            .map(|(_, r)| *r);
        return PoolState::new(labeled, unlabeled);
    }
    Err(Error::SplitRetriesExhausted {
        attempts: config.max_retries,
    })
}

/// Fraction of positives among hidden rows. Harness-side only.
pub fn unlabeled_prevalence(pool: &PoolState, labels: &HiddenLabels) -> Result<f64> {
    if pool.is_exhausted() {
        return Err(Error::EmptyPool);
    }
    let positives = labels.count_positives(pool.unlabeled.iter());
    Ok(positives as f64 / pool.n_unlabeled() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset_with(labels: &[u8]) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
        let labels = labels.iter().map(|&l| Label::from_u8(l).unwrap()).collect();
        Dataset::new("t", FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap()
    }

    #[test]
    fn three_row_file_descriptor() {
        let csv = "a,b,label\n1,2,0\n3,4,1\n5,6,0\n";
        let ds = read_dataset(csv.as_bytes(), "tiny", "label").unwrap();
        assert_eq!(ds.descriptor.n_samples, 3);
        assert_eq!(ds.descriptor.dimension, 2);
        assert_eq!(ds.descriptor.anomaly_proportion, 1.0 / 3.0);
        assert_eq!(ds.features.row(RowId(1)), &[3.0, 4.0]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let csv = "a,b,label\n1,2,0\n3,oops,1\n";
        let err = read_dataset(csv.as_bytes(), "t", "label").unwrap_err();
        match err {
            Error::NonNumeric { line, column, value } => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_outside_binary_is_rejected() {
        let csv = "a,label\n1,0\n2,2\n";
        assert!(matches!(
            read_dataset(csv.as_bytes(), "t", "label"),
            Err(Error::InvalidLabel { line: 3, .. })
        ));
    }

    #[test]
    fn empty_and_missing_inputs() {
        assert!(matches!(
            read_dataset("a,label\n".as_bytes(), "t", "label"),
            Err(Error::EmptyDataset)
        ));
        assert!(matches!(
            read_dataset("a,b\n1,2\n".as_bytes(), "t", "label"),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            load_dataset("/nonexistent/file.csv", "label"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let mut labels = vec![0u8; 85849];
        for l in labels.iter_mut().step_by(14) {
            *l = 1;
        }
        let ds = dataset_with(&labels);
        let pool = initial_split(&ds, &SplitConfig::default()).unwrap();
        assert_eq!(pool.n_labeled(), 858);
        assert_eq!(pool.n_labeled() + pool.n_unlabeled(), 85849);

        let cfg = SplitConfig {
            subsample_size: Some(10_000),
            ..SplitConfig::default()
        };
        let pool = initial_split(&ds, &cfg).unwrap();
        assert_eq!(pool.n_labeled() + pool.n_unlabeled(), 10_000);
        assert_eq!(pool.n_labeled(), 100);
    }

    #[test]
    fn all_negative_pool_exhausts_retries() {
        let ds = dataset_with(&[0u8; 100]);
        assert!(matches!(
            initial_split(&ds, &SplitConfig::default()),
            Err(Error::SplitRetriesExhausted { .. })
        ));
    }

    #[test]
    fn tiny_fraction_yields_empty_split_error() {
        let ds = dataset_with(&[0, 1, 0, 1]);
        assert!(matches!(
            initial_split(&ds, &SplitConfig::default()),
            Err(Error::EmptySplit { .. })
        ));
    }

    #[test]
    fn apply_query_moves_row_once() {
        let ds = dataset_with(&[1, 0, 0]);
        let pool = PoolState::new([(RowId(2), Label::Legit)], [RowId(0), RowId(1)]).unwrap();
        let (next, label) = pool.apply_query(RowId(0), &mut &ds.labels).unwrap();
        assert_eq!(label, Label::Fraud);
        assert_eq!(next.n_unlabeled(), 1);
        assert_eq!(next.label_of(RowId(0)), Some(Label::Fraud));
        assert_eq!(next.step(), 2);
        assert!(matches!(
            next.apply_query(RowId(0), &mut &ds.labels),
            Err(Error::AlreadyLabeled(_))
        ));
        assert!(matches!(
            next.apply_query(RowId(9), &mut &ds.labels),
            Err(Error::UnknownRow(_))
        ));
    }

    #[test]
    fn prevalence_cases() {
        let mut labels = vec![0u8; 1001];
        for l in labels.iter_mut().skip(1).take(50) {
            *l = 1;
        }
        labels[0] = 1;
        let ds = dataset_with(&labels);
        let pool = PoolState::new([(RowId(0), Label::Fraud)], (1..1001).map(RowId)).unwrap();
        assert_eq!(unlabeled_prevalence(&pool, &ds.labels).unwrap(), 0.05);

        let all_pos = dataset_with(&[1, 1, 1]);
        let pool = PoolState::new([], (0..3).map(RowId)).unwrap();
        assert_eq!(unlabeled_prevalence(&pool, &all_pos.labels).unwrap(), 1.0);

        let mut pool = PoolState::new([], (0..3).map(RowId)).unwrap();
        let ds = dataset_with(&[1, 0, 0]);
        pool = pool.apply_query(RowId(0), &mut &ds.labels).unwrap().0;
        assert_eq!(unlabeled_prevalence(&pool, &ds.labels).unwrap(), 0.0);
        pool = pool.with_label(RowId(1), Label::Legit).unwrap();
        pool = pool.with_label(RowId(2), Label::Legit).unwrap();
        assert!(matches!(unlabeled_prevalence(&pool, &ds.labels), Err(Error::EmptyPool)));
    }

    proptest! {
        #[test]
        fn partition_and_exhaustion(
            labels in proptest::collection::vec(0u8..2, 120..400),
            seed in any::<u64>(),
            order_seed in any::<u64>(),
        ) {
            prop_assume!(labels.contains(&1) && labels.contains(&0));
            let ds = dataset_with(&labels);
            let cfg = SplitConfig { init_fraction: 0.05, seed, max_retries: 1000, ..SplitConfig::default() };
            let pool = initial_split(&ds, &cfg).unwrap();
            let again = initial_split(&ds, &cfg).unwrap();
            prop_assert_eq!(pool.labeled_rows(), again.labeled_rows());

            let initial = pool.n_labeled();
            let mut rows = pool.unlabeled_rows();
            use rand::seq::SliceRandom;
            rows.shuffle(&mut seeded_rng(order_seed));
            let mut cur = pool;
            let mut revealed = 0;
            for r in rows {
                let before = cur.n_labeled();
                cur = cur.apply_query(r, &mut &ds.labels).unwrap().0;
                revealed += 1;
                prop_assert_eq!(cur.n_labeled(), before + 1);
                let lab: BTreeSet<RowId> = cur.labeled_rows().into_iter().collect();
                prop_assert!(cur.unlabeled().all(|u| !lab.contains(&u)));
                prop_assert_eq!(cur.n_labeled() + cur.n_unlabeled(), labels.len());
            }
            prop_assert_eq!(revealed, labels.len() - initial);
            prop_assert!(cur.is_exhausted());
        }

        #[test]
        fn descriptor_matches_recount(labels in proptest::collection::vec(0u8..2, 1..200)) {
            let ds = dataset_with(&labels);
            let pos = labels.iter().filter(|&&l| l == 1).count();
            prop_assert_eq!(ds.descriptor.n_positives, pos);
            prop_assert_eq!(ds.descriptor.anomaly_proportion, pos as f64 / labels.len() as f64);
        }
    }
}
