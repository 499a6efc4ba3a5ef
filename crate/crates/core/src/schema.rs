//! Feature schemas and instances.
//!
//! A schema fixes the input space: an ordered list of boolean, categorical
//! and numeric features. Numeric features carry a pool of candidate
//! thresholds from which predicates such as `Age<=50` are drawn.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a feature in its schema.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId(pub usize);

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Boolean,
    Categorical { levels: Vec<String> },
    Numeric,
}

impl FeatureKind {
    pub fn label(&self) -> &'static str {
        match self {
            FeatureKind::Boolean => "boolean",
            FeatureKind::Categorical { .. } => "categorical",
            FeatureKind::Numeric => "numeric",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    /// Sorted, deduplicated candidate thresholds (numeric features only).
    pub thresholds: Vec<f64>,
}

/// A presence test usable as a boolean leaf: a boolean feature, or one level
/// of a categorical feature (printed `Feature:Level`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AtomRef {
    pub feature: FeatureId,
    pub level: Option<usize>,
}

impl AtomRef {
    pub fn boolean(feature: FeatureId) -> Self {
        AtomRef { feature, level: None }
    }

    pub fn level(feature: FeatureId, level: usize) -> Self {
        AtomRef { feature, level: Some(level) }
    }
}

/// Target column description used when ingesting labelled data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    /// Raw value mapped to label 1; every other value maps to 0.
    pub positive: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    index: HashMap<String, FeatureId>,
    target: Option<TargetSpec>,
}

#[derive(Serialize, Deserialize)]
struct FeatureFile {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    features: Vec<FeatureFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<TargetSpec>,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut features = features;
        for (i, f) in features.iter_mut().enumerate() {
            if f.name.is_empty() {
                return Err(Error::Schema(format!("feature {i} has an empty name")));
            }
            if index.insert(f.name.clone(), FeatureId(i)).is_some() {
                return Err(Error::Schema(format!("duplicate feature name `{}`", f.name)));
            }
            match &f.kind {
                FeatureKind::Numeric => {
                    if f.thresholds.iter().any(|t| !t.is_finite()) {
                        return Err(Error::Schema(format!("non-finite threshold for `{}`", f.name)));
                    }
                    normalize_pool(&mut f.thresholds);
                }
                FeatureKind::Categorical { levels } => {
                    if levels.is_empty() {
                        return Err(Error::Schema(format!("categorical `{}` has no levels", f.name)));
                    }
                    let mut seen = levels.clone();
                    seen.sort();
                    seen.dedup();
                    if seen.len() != levels.len() {
                        return Err(Error::Schema(format!("duplicate levels in `{}`", f.name)));
                    }
                    if !f.thresholds.is_empty() {
                        return Err(Error::Schema(format!("thresholds on non-numeric `{}`", f.name)));
                    }
                }
                FeatureKind::Boolean => {
                    if !f.thresholds.is_empty() {
                        return Err(Error::Schema(format!("thresholds on non-numeric `{}`", f.name)));
                    }
                }
            }
        }
        Ok(FeatureSchema { features, index, target: None })
    }

    /// All-boolean schema, handy for tests and compiled representations.
    pub fn booleans<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(names.iter().map(|n| Feature::boolean(n.as_ref())).collect())
    }

    pub fn with_target(mut self, target: TargetSpec) -> Self {
        self.target = Some(target);
        self
    }

    pub fn target(&self) -> Option<&TargetSpec> {
        self.target.as_ref()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SchemaFile = serde_json::from_str(text)?;
        let mut features = Vec::with_capacity(file.features.len());
        for f in file.features {
            let kind = match f.kind.as_str() {
                "boolean" | "bool" => FeatureKind::Boolean,
                "numeric" | "real" => FeatureKind::Numeric,
                "categorical" => FeatureKind::Categorical { levels: f.levels.unwrap_or_default() },
                other => return Err(Error::Schema(format!("unknown kind `{other}` for `{}`", f.name))),
            };
            features.push(Feature { name: f.name, kind, thresholds: f.thresholds.unwrap_or_default() });
        }
        let mut schema = Self::new(features)?;
        schema.target = file.target;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = SchemaFile {
            features: self
                .features
                .iter()
                .map(|f| FeatureFile {
                    name: f.name.clone(),
                    kind: f.kind.label().to_string(),
                    levels: match &f.kind {
                        FeatureKind::Categorical { levels } => Some(levels.clone()),
                        _ => None,
                    },
                    thresholds: (!f.thresholds.is_empty()).then(|| f.thresholds.clone()),
                })
                .collect(),
            target: self.target.clone(),
        };
        serde_json::to_string_pretty(&file).expect("schema serializes")
    }

    pub fn arity(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Panics on an out-of-range id; ids come from this schema.
    pub fn feature(&self, id: FeatureId) -> &Feature {
        &self.features[id.0]
    }

    pub fn get(&self, id: FeatureId) -> Option<&Feature> {
        self.features.get(id.0)
    }

    pub fn find(&self, name: &str) -> Option<FeatureId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = FeatureId> {
        (0..self.features.len()).map(FeatureId)
    }

    /// Resolves a surface name to a boolean atom: a boolean feature, or
    /// `Feature:Level` for a categorical level.
    pub fn resolve_atom(&self, name: &str) -> Option<AtomRef> {
        if let Some(id) = self.find(name) {
            return match self.feature(id).kind {
                FeatureKind::Boolean => Some(AtomRef::boolean(id)),
                _ => None,
            };
        }
        for (pos, _) in name.match_indices(':') {
            let (feat, level) = (&name[..pos], &name[pos + 1..]);
            if let Some(id) = self.find(feat) {
                if let FeatureKind::Categorical { levels } = &self.feature(id).kind {
                    if let Some(l) = levels.iter().position(|x| x == level) {
                        return Some(AtomRef::level(id, l));
                    }
                }
            }
        }
        None
    }

    pub fn atom_name(&self, atom: AtomRef) -> String {
        let f = self.feature(atom.feature);
        match (atom.level, &f.kind) {
            (Some(l), FeatureKind::Categorical { levels }) => format!("{}:{}", f.name, levels[l]),
            _ => f.name.clone(),
        }
    }

    /// Every boolean atom in schema order; categoricals contribute one per level.
    pub fn bool_atoms(&self) -> Vec<AtomRef> {
        let mut out = Vec::new();
        for id in self.ids() {
            match &self.feature(id).kind {
                FeatureKind::Boolean => out.push(AtomRef::boolean(id)),
                FeatureKind::Categorical { levels } => {
                    out.extend((0..levels.len()).map(|l| AtomRef::level(id, l)))
                }
                FeatureKind::Numeric => {}
            }
        }
        out
    }

    /// Numeric features with a non-empty threshold pool.
    pub fn predicate_features(&self) -> Vec<FeatureId> {
        self.ids()
            .filter(|&id| {
                let f = self.feature(id);
                f.kind == FeatureKind::Numeric && !f.thresholds.is_empty()
            })
            .collect()
    }

    pub fn numeric_features(&self) -> Vec<FeatureId> {
        self.ids().filter(|&id| self.feature(id).kind == FeatureKind::Numeric).collect()
    }

    pub fn is_all_boolean(&self) -> bool {
        self.features.iter().all(|f| f.kind == FeatureKind::Boolean)
    }

    /// Merges extra candidate thresholds into a numeric feature's pool.
    pub fn extend_thresholds(&mut self, id: FeatureId, extra: &[f64]) -> Result<()> {
        let f = &mut self.features[id.0];
        if f.kind != FeatureKind::Numeric {
            return Err(Error::Schema(format!("`{}` is not numeric", f.name)));
        }
        f.thresholds.extend(extra.iter().copied().filter(|t| t.is_finite()));
        normalize_pool(&mut f.thresholds);
        Ok(())
    }

    /// Checks an instance's arity and slot domains.
    pub fn validate(&self, x: &Instance) -> Result<()> {
        if x.len() != self.arity() {
            return Err(Error::Data(format!(
                "instance has {} values, schema has {} features",
                x.len(),
                self.arity()
            )));
        }
        for (f, &v) in self.features.iter().zip(x.values()) {
            let ok = match &f.kind {
                FeatureKind::Boolean => v == 0.0 || v == 1.0,
                FeatureKind::Categorical { levels } => {
                    v >= 0.0 && v.fract() == 0.0 && (v as usize) < levels.len()
                }
                FeatureKind::Numeric => v.is_finite(),
            };
            if !ok {
                return Err(Error::Data(format!("value {v} invalid for {} feature `{}`", f.kind.label(), f.name)));
            }
        }
        Ok(())
    }

    /// Renders a raw slot value in human-readable form.
    pub fn display_value(&self, id: FeatureId, v: f64) -> String {
        match &self.feature(id).kind {
            FeatureKind::Boolean => if v != 0.0 { "true" } else { "false" }.to_string(),
            FeatureKind::Categorical { levels } => {
                levels.get(v as usize).cloned().unwrap_or_else(|| format!("<{v}>"))
            }
            FeatureKind::Numeric => format!("{v}"),
        }
    }

    /// Parses a human-readable slot value (inverse of `display_value`).
    pub fn parse_value(&self, id: FeatureId, raw: &str) -> Result<f64> {
        let f = self.feature(id);
        let raw = raw.trim();
        match &f.kind {
            FeatureKind::Boolean => parse_bool(raw)
                .map(|b| if b { 1.0 } else { 0.0 })
                .ok_or_else(|| Error::Data(format!("`{raw}` is not a boolean for `{}`", f.name))),
            FeatureKind::Categorical { levels } => levels
                .iter()
                .position(|l| l == raw)
                .map(|p| p as f64)
                .ok_or_else(|| Error::Data(format!("unknown level `{raw}` for `{}`", f.name))),
            FeatureKind::Numeric => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Data(format!("`{raw}` is not a number for `{}`", f.name))),
        }
    }
}

impl Feature {
    pub fn boolean(name: impl Into<String>) -> Self {
        Feature { name: name.into(), kind: FeatureKind::Boolean, thresholds: Vec::new() }
    }

    pub fn numeric(name: impl Into<String>, thresholds: Vec<f64>) -> Self {
        Feature { name: name.into(), kind: FeatureKind::Numeric, thresholds }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical { levels: levels.into_iter().map(Into::into).collect() },
            thresholds: Vec::new(),
        }
    }
}

pub(crate) fn parse_bool(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "t" | "yes" | "y" => Some(true),
        "0" | "0.0" | "false" | "f" | "no" | "n" => Some(false),
        _ => None,
    }
}

fn normalize_pool(pool: &mut Vec<f64>) {
    pool.sort_by(|a, b| a.partial_cmp(b).expect("finite thresholds"));
    pool.dedup();
}

/// Dense value vector aligned with a schema: booleans as 0/1, categoricals
/// as level indices, numerics as reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(pub Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Self {
        Instance(values)
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Instance(bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, id: FeatureId) -> f64 {
        self.0[id.0]
    }

    pub fn atom(&self, atom: AtomRef) -> bool {
        let v = self.get(atom.feature);
        match atom.level {
            Some(l) => v == l as f64,
            None => v != 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed() -> FeatureSchema {
        FeatureSchema::new(vec![
            Feature::numeric("Age", vec![50.0, 30.0, 50.0]),
            Feature::boolean("Married"),
            Feature::categorical("Diag", ["Other", "Circulatory"]),
        ])
        .unwrap()
    }

    #[test]
    fn pools_are_sorted_and_deduplicated() {
        assert_eq!(mixed().feature(FeatureId(0)).thresholds, vec![30.0, 50.0]);
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = FeatureSchema::booleans(&["A", "A"]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn resolves_levels_and_booleans() {
        let s = mixed();
        assert_eq!(s.resolve_atom("Married"), Some(AtomRef::boolean(FeatureId(1))));
        assert_eq!(s.resolve_atom("Diag:Circulatory"), Some(AtomRef::level(FeatureId(2), 1)));
        assert_eq!(s.resolve_atom("Diag"), None);
        assert_eq!(s.resolve_atom("Age"), None);
        assert_eq!(s.atom_name(AtomRef::level(FeatureId(2), 0)), "Diag:Other");
        assert_eq!(s.bool_atoms().len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"features":[
            {"name":"Age","kind":"numeric","thresholds":[40]},
            {"name":"Married","kind":"boolean"},
            {"name":"Diag","kind":"categorical","levels":["Other","Home"]}],
            "target":{"name":"income","positive":">50K"}}"#;
        let s = FeatureSchema::from_json_str(text).unwrap();
        assert_eq!(s.arity(), 3);
        assert_eq!(s.target().unwrap().positive, ">50K");
        let again = FeatureSchema::from_json_str(&s.to_json_string()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn validate_checks_domains() {
        let s = mixed();
        assert!(s.validate(&Instance::new(vec![33.0, 1.0, 1.0])).is_ok());
        assert!(s.validate(&Instance::new(vec![33.0, 0.5, 1.0])).is_err());
        assert!(s.validate(&Instance::new(vec![33.0, 1.0, 2.0])).is_err());
        assert!(s.validate(&Instance::new(vec![33.0, 1.0])).is_err());
    }
}
