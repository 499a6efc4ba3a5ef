//! Black-box classifiers: in-process baselines (tree, forest, logistic
//! regression), a client for external models, and dataset ingestion.

mod dataset;
mod logistic;
pub mod remote;
mod tree;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelError, Result};
use crate::schema::{FeatureSchema, Instance};

pub use dataset::{load_dataset, read_dataset, Dataset};
pub use logistic::{Encoding, LogisticModel};
pub use remote::RemoteModel;
pub use tree::{DecisionTreeModel, SplitTest, TreeNode, TreeNodeFile, TreeParams};

/// A classifier seen only through batched predictions. Outputs should be
/// 0 or 1; callers validate.
pub trait BlackBox: Send + Sync {
    fn kind(&self) -> &'static str;

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError>;
}

fn as_label(b: bool) -> f64 {
    f64::from(u8::from(b))
}

impl BlackBox for DecisionTreeModel {
    fn kind(&self) -> &'static str {
        "tree"
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        Ok(batch.iter().map(|x| as_label(self.predict(x))).collect())
    }
}

/// Bagged trees with majority vote; ties vote 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTreeModel>,
}

impl ForestModel {
    pub fn predict(&self, x: &Instance) -> bool {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        votes * 2 > self.trees.len()
    }
}

impl BlackBox for ForestModel {
    fn kind(&self) -> &'static str {
        "forest"
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        Ok(batch.iter().map(|x| as_label(self.predict(x))).collect())
    }
}

impl BlackBox for LogisticModel {
    fn kind(&self) -> &'static str {
        "logistic"
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        Ok(batch.iter().map(|x| as_label(self.predict(x))).collect())
    }
}

/// Any in-process baseline.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Tree(DecisionTreeModel),
    Forest(ForestModel),
    Logistic(LogisticModel),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelFile {
    Tree { root: TreeNodeFile },
    Forest { trees: Vec<TreeNodeFile> },
    Logistic(LogisticModel),
}

impl Model {
    pub fn predict(&self, x: &Instance) -> bool {
        match self {
            Model::Tree(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
            Model::Logistic(m) => m.predict(x),
        }
    }

    pub fn to_json_string(&self, schema: &FeatureSchema) -> String {
        let file = match self {
            Model::Tree(t) => ModelFile::Tree { root: t.to_file(schema) },
            Model::Forest(f) => ModelFile::Forest { trees: f.trees.iter().map(|t| t.to_file(schema)).collect() },
            Model::Logistic(m) => ModelFile::Logistic(m.clone()),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json_str(text: &str, schema: &FeatureSchema) -> Result<Self> {
        Ok(match serde_json::from_str(text)? {
            ModelFile::Tree { root } => Model::Tree(DecisionTreeModel::from_file(&root, schema)?),
            ModelFile::Forest { trees } => Model::Forest(ForestModel {
                trees: trees.iter().map(|t| DecisionTreeModel::from_file(t, schema)).collect::<Result<_>>()?,
            }),
            ModelFile::Logistic(m) => {
                if m.arity() != schema.arity() {
                    return Err(Error::Schema(format!(
                        "logistic model has {} inputs, schema has {} features",
                        m.arity(),
                        schema.arity()
                    )));
                }
                let width: usize = m
                    .encodings
                    .iter()
                    .map(|e| if let Encoding::OneHot { levels } = e { *levels } else { 1 })
                    .sum();
                if width != m.weights.len() {
                    return Err(Error::Schema("logistic weights do not match encodings".into()));
                }
                Model::Logistic(m)
            }
        })
    }

    pub fn save(&self, path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<()> {
        std::fs::write(path, self.to_json_string(schema) + "\n")?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?, schema)
    }
}

impl BlackBox for Model {
    fn kind(&self) -> &'static str {
        match self {
            Model::Tree(m) => m.kind(),
            Model::Forest(m) => m.kind(),
            Model::Logistic(m) => m.kind(),
        }
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        Ok(batch.iter().map(|x| as_label(self.predict(x))).collect())
    }
}

fn check_classes(d: &Dataset) -> Result<()> {
    let pos = d.positives();
    if d.is_empty() || pos == 0 || pos == d.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Greedy Gini tree on all features.
pub fn train_tree(d: &Dataset, max_depth: usize) -> Result<DecisionTreeModel> {
    check_classes(d)?;
    let idx: Vec<usize> = (0..d.len()).collect();
    let params = TreeParams { max_depth, max_features: None };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let root = tree::grow(&d.schema, &d.rows, &d.target, &idx, 0, &params, &mut rng);
    DecisionTreeModel::new(root, &d.schema)
}

/// Bootstrap-aggregated trees, each split drawing `ceil(sqrt(p))` features.
pub fn train_forest(d: &Dataset, n_trees: usize, max_depth: usize, seed: u64) -> Result<ForestModel> {
    check_classes(d)?;
    if n_trees == 0 {
        return Err(Error::Invalid("a forest needs at least one tree".into()));
    }
    let p = d.schema.arity();
    let params = TreeParams { max_depth, max_features: Some((p as f64).sqrt().ceil() as usize) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let idx: Vec<usize> = (0..d.len()).map(|_| rng.gen_range(0..d.len())).collect();
        let root = tree::grow(&d.schema, &d.rows, &d.target, &idx, 0, &params, &mut rng);
        trees.push(DecisionTreeModel::new(root, &d.schema)?);
    }
    Ok(ForestModel { trees })
}

pub fn train_logistic(d: &Dataset, epochs: usize, learning_rate: f64) -> Result<LogisticModel> {
    check_classes(d)?;
    if !(learning_rate.is_finite() && learning_rate > 0.0) {
        return Err(Error::Invalid(format!("learning rate must be positive, got {learning_rate}")));
    }
    Ok(LogisticModel::train(&d.schema, &d.rows, &d.target, epochs, learning_rate))
}
