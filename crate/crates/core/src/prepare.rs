//! Conversion of the public benchmark files into the canonical CSV layout
//! (numeric feature columns followed by a 0/1 `label` column).
//!
//! Class mappings:
//! - shuttle: class 1 is normal; classes 2, 3, 5, 6, 7 are anomalies; class 4
//!   is dropped.
//! - covtype: only classes 2, 4 and 5 are kept; 4 and 5 are anomalies.
//! - creditcard: the `Class` column is the label.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::datapool::{Dataset, FeatureMatrix, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawDataset {
    Shuttle,
    Covtype,
    Creditcard,
}

impl RawDataset {
    pub const ALL: [RawDataset; 3] = [RawDataset::Shuttle, RawDataset::Covtype, RawDataset::Creditcard];

    pub fn name(self) -> &'static str {
        match self {
            RawDataset::Shuttle => "shuttle",
            RawDataset::Covtype => "covtype",
            RawDataset::Creditcard => "creditcard",
        }
    }

    /// Files looked for when the raw path is a directory.
    pub fn default_files(self) -> &'static [&'static str] {
        match self {
            RawDataset::Shuttle => &["shuttle.trn", "shuttle.tst"],
            RawDataset::Covtype => &["covtype.data"],
            RawDataset::Creditcard => &["creditcard.csv"],
        }
    }
}

impl fmt::Display for RawDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RawDataset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RawDataset::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown dataset `{s}` (expected shuttle, covtype or creditcard)")))
    }
}

fn shuttle_label(class: i64) -> Option<Label> {
    match class {
        1 => Some(Label::Legit),
        2 | 3 | 5 | 6 | 7 => Some(Label::Fraud),
        _ => None,
    }
}

fn covtype_label(class: i64) -> Option<Label> {
    match class {
        2 => Some(Label::Legit),
        4 | 5 => Some(Label::Fraud),
        _ => None,
    }
}

fn covtype_names() -> Vec<String> {
    let mut names: Vec<String> = [
        "Elevation",
        "Aspect",
        "Slope",
        "Horizontal_Distance_To_Hydrology",
        "Vertical_Distance_To_Hydrology",
        "Horizontal_Distance_To_Roadways",
        "Hillshade_9am",
        "Hillshade_Noon",
        "Hillshade_3pm",
        "Horizontal_Distance_To_Fire_Points",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend((1..=4).map(|i| format!("Wilderness_Area{i}")));
    names.extend((1..=40).map(|i| format!("Soil_Type{i}")));
    names
}

/// Headerless numeric rows: `n_features` values then an integer class.
/// Rows whose class maps to `None` are dropped.
fn read_class_rows(
    reader: impl BufRead,
    source: &str,
    n_features: usize,
    separator: Option<char>,
    map: fn(i64) -> Option<Label>,
    values: &mut Vec<f64>,
    labels: &mut Vec<Label>,
) -> Result<()> {
    let schema = |line: u64, reason: String| Error::Schema {
        line,
        reason: format!("{source}: {reason}"),
    };
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|e| schema(line_no, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = match separator {
            Some(c) => line.split(c).map(str::trim).collect(),
            None => line.split_whitespace().collect(),
        };
        if fields.len() != n_features + 1 {
            return Err(schema(
                line_no,
                format!("expected {} fields, found {}", n_features + 1, fields.len()),
            ));
        }
        let class: i64 = fields[n_features]
            .parse()
            .map_err(|_| schema(line_no, format!("class {:?} is not an integer", fields[n_features])))?;
        let Some(label) = map(class) else { continue };
        for f in &fields[..n_features] {
            let v: f64 = f
                .parse()
                .map_err(|_| schema(line_no, format!("value {f:?} is not numeric")))?;
            values.push(v);
        }
        labels.push(label);
    }
    Ok(())
}

fn read_creditcard(reader: impl Read, source: &str) -> Result<Dataset> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    let class_idx = headers
        .iter()
        .position(|h| h == "Class")
        .ok_or_else(|| Error::MissingColumn("Class".into()))?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != class_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line_no = i as u64 + 2;
        let schema = |reason: String| Error::Schema {
            line: line_no,
            reason: format!("{source}: {reason}"),
        };
        let rec = rec.map_err(|e| schema(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(schema(format!("expected {} fields, found {}", headers.len(), rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            if j == class_idx {
                let label = match field.trim() {
                    "0" => Label::Legit,
                    "1" => Label::Fraud,
                    other => return Err(schema(format!("class {other:?} is not 0 or 1"))),
                };
                labels.push(label);
            } else {
                values.push(
                    field
                        .trim()
                        .parse()
                        .map_err(|_| schema(format!("value {field:?} is not numeric")))?,
                );
            }
        }
    }
    Dataset::new("creditcard", FeatureMatrix::new(names, values)?, labels)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// The raw files for `kind`: `raw` itself, or its default files when it is a
/// directory.
pub fn raw_files(kind: RawDataset, raw: &Path) -> Result<Vec<PathBuf>> {
    if raw.is_dir() {
        let files: Vec<PathBuf> = kind
            .default_files()
            .iter()
            .map(|f| raw.join(f))
            .filter(|p| p.exists())
            .collect();
        if files.is_empty() {
            return Err(Error::io(
                raw.join(kind.default_files()[0]),
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        Ok(files)
    } else {
        Ok(vec![raw.to_path_buf()])
    }
}

/// Read one benchmark's raw files into a canonical dataset.
pub fn prepare(kind: RawDataset, raw: &Path) -> Result<Dataset> {
    let files = raw_files(kind, raw)?;
    let (n_features, separator, map, names): (usize, Option<char>, fn(i64) -> Option<Label>, Vec<String>) = match kind {
        RawDataset::Creditcard => {
            if files.len() != 1 {
                return Err(Error::InvalidConfig("creditcard expects a single file".into()));
            }
            return read_creditcard(open(&files[0])?, &files[0].display().to_string());
        }
        RawDataset::Shuttle => (9, None, shuttle_label, (1..=9).map(|i| format!("a{i}")).collect()),
        RawDataset::Covtype => (54, Some(','), covtype_label, covtype_names()),
    };
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for f in &files {
        read_class_rows(open(f)?, &f.display().to_string(), n_features, separator, map, &mut values, &mut labels)?;
    }
    Dataset::new(kind.name(), FeatureMatrix::new(names, values)?, labels)
}
