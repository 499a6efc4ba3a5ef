//! CSV ingestion against a schema sidecar.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::schema::{parse_bool, Feature, FeatureKind, FeatureSchema, Instance, TargetSpec};

/// Raw cells treated as missing.
const MISSING: &[&str] = &["", "?", "NA", "N/A", "nan", "NaN", "null"];

#[derive(Clone, Debug)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub rows: Vec<Instance>,
    pub target: Vec<bool>,
    /// Human-readable record of dropped rows and imputed cells.
    pub notes: Vec<String>,
}

#[derive(Deserialize)]
struct RawFeature {
    name: String,
    kind: String,
    #[serde(default)]
    levels: Option<Vec<String>>,
    #[serde(default)]
    thresholds: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawSchema {
    features: Vec<RawFeature>,
    #[serde(default)]
    target: Option<TargetSpec>,
}

fn is_missing(cell: &str) -> bool {
    MISSING.contains(&cell.trim())
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.target.iter().filter(|&&t| t).count()
    }
}

/// Loads a dataset from a CSV file and a schema JSON file.
pub fn load_dataset(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema_text = std::fs::read_to_string(schema_path)?;
    let file = std::fs::File::open(csv_path)?;
    read_dataset(file, &schema_text)
}

/// Reads a dataset. Categorical features declared without levels take the
/// sorted set of values seen in the data. Rows with a missing target are
/// dropped; missing features are imputed with the median (numeric) or the
/// most frequent value (boolean, categorical).
pub fn read_dataset(csv: impl Read, schema_json: &str) -> Result<Dataset> {
    let raw: RawSchema = serde_json::from_str(schema_json)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(csv);
    let header = reader.headers()?.clone();
    let column = |name: &str| header.iter().position(|h| h == name);

    let mut cols = Vec::with_capacity(raw.features.len());
    for f in &raw.features {
        cols.push(column(&f.name).ok_or_else(|| Error::Schema(format!("CSV header is missing feature `{}`", f.name)))?);
    }
    let (target_spec, target_col) = match &raw.target {
        Some(t) => {
            let c = column(&t.name).ok_or_else(|| Error::Schema(format!("CSV header is missing target `{}`", t.name)))?;
            (Some(t.clone()), c)
        }
        None => match column("label") {
            Some(c) => (None, c),
            None => return Err(Error::Schema("schema declares no target and the CSV has no `label` column".into())),
        },
    };

    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let mut notes = Vec::new();

    let mut features = Vec::with_capacity(raw.features.len());
    for (f, &c) in raw.features.iter().zip(&cols) {
        let kind = match f.kind.as_str() {
            "boolean" | "bool" => FeatureKind::Boolean,
            "numeric" | "real" => FeatureKind::Numeric,
            "categorical" => {
                let levels = match &f.levels {
                    Some(l) if !l.is_empty() => l.clone(),
                    _ => records
                        .iter()
                        .map(|r| r[c].to_string())
                        .filter(|v| !is_missing(v))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                };
                if levels.is_empty() {
                    return Err(Error::Data(format!("categorical `{}` has no observed levels", f.name)));
                }
                FeatureKind::Categorical { levels }
            }
            other => return Err(Error::Schema(format!("unknown kind `{other}` for `{}`", f.name))),
        };
        features.push(Feature { name: f.name.clone(), kind, thresholds: f.thresholds.clone().unwrap_or_default() });
    }
    let mut schema = FeatureSchema::new(features)?;
    if let Some(t) = target_spec.clone() {
        schema = schema.with_target(t);
    }

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut target = Vec::new();
    let mut dropped = 0usize;
    for (line, r) in records.iter().enumerate() {
        let cell = &r[target_col];
        if is_missing(cell) {
            dropped += 1;
            continue;
        }
        let label = match &target_spec {
            Some(t) => cell == t.positive,
            None => parse_bool(cell)
                .ok_or_else(|| Error::Data(format!("row {}: non-binary target `{cell}`", line + 1)))?,
        };
        let mut values = Vec::with_capacity(cols.len());
        for (id, &c) in schema.ids().zip(&cols) {
            let raw_cell = &r[c];
            values.push(if is_missing(raw_cell) {
                None
            } else {
                Some(schema.parse_value(id, raw_cell).map_err(|e| Error::Data(format!("row {}: {e}", line + 1)))?)
            });
        }
        rows.push(values);
        target.push(label);
    }
    if dropped > 0 {
        notes.push(format!("dropped {dropped} rows with a missing target"));
    }
    if rows.is_empty() {
        return Err(Error::Data("no usable rows".into()));
    }

    for id in schema.ids() {
        let present: Vec<f64> = rows.iter().filter_map(|r| r[id.0]).collect();
        let missing = rows.len() - present.len();
        if missing == 0 {
            continue;
        }
        if present.is_empty() {
            return Err(Error::Data(format!("feature `{}` has no observed values", schema.feature(id).name)));
        }
        let fill = match schema.feature(id).kind {
            FeatureKind::Numeric => {
                let mut sorted = present.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
                let m = sorted.len();
                if m % 2 == 1 {
                    sorted[m / 2]
                } else {
                    (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
                }
            }
            _ => mode(&present),
        };
        notes.push(format!(
            "imputed {missing} missing `{}` values with {}",
            schema.feature(id).name,
            schema.display_value(id, fill)
        ));
        for r in rows.iter_mut() {
            r[id.0].get_or_insert(fill);
        }
    }

    let rows = rows.into_iter().map(|r| Instance::new(r.into_iter().map(|v| v.expect("imputed")).collect())).collect();
    Ok(Dataset { schema, rows, target, notes })
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (mut best, mut best_n) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        if j > best_n {
            best = sorted[i];
            best_n = j;
        }
        i += j;
    }
    best
}
