//! Binary decision trees: the representation, its JSON form, and greedy
//! Gini training (also used for each member of a forest).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{AtomRef, FeatureId, FeatureKind, FeatureSchema, Instance};

/// Test at an internal node. The right child is taken when the test holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitTest {
    /// Boolean feature is set, or categorical feature equals a level.
    Atom(AtomRef),
    /// `feature > threshold`.
    Greater { feature: FeatureId, threshold: f64 },
}

impl SplitTest {
    pub fn holds(&self, x: &Instance) -> bool {
        match *self {
            SplitTest::Atom(a) => x.atom(a),
            SplitTest::Greater { feature, threshold } => x.get(feature) > threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TreeNode {
    Leaf(bool),
    Split { test: SplitTest, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    pub fn split(test: SplitTest, left: TreeNode, right: TreeNode) -> Self {
        TreeNode::Split { test, left: Box::new(left), right: Box::new(right) }
    }

    pub fn predict(&self, x: &Instance) -> bool {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(v) => return *v,
                TreeNode::Split { test, left, right } => node = if test.holds(x) { right } else { left },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 1,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// A decision tree over a schema.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTreeModel {
    pub root: TreeNode,
}

/// JSON form: `{"leaf": bool}` or
/// `{"feature": name, "threshold"?: t, "level"?: l, "left": .., "right": ..}`
/// where `left` is taken when the test fails.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNodeFile {
    Leaf {
        leaf: bool,
    },
    Split {
        feature: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<String>,
        left: Box<TreeNodeFile>,
        right: Box<TreeNodeFile>,
    },
}

impl DecisionTreeModel {
    pub fn new(root: TreeNode, schema: &FeatureSchema) -> Result<Self> {
        check_node(&root, schema)?;
        Ok(DecisionTreeModel { root })
    }

    pub fn predict(&self, x: &Instance) -> bool {
        self.root.predict(x)
    }

    pub fn to_file(&self, schema: &FeatureSchema) -> TreeNodeFile {
        node_to_file(&self.root, schema)
    }

    pub fn from_file(file: &TreeNodeFile, schema: &FeatureSchema) -> Result<Self> {
        Self::new(node_from_file(file, schema)?, schema)
    }

    pub fn from_json_str(text: &str, schema: &FeatureSchema) -> Result<Self> {
        Self::from_file(&serde_json::from_str(text)?, schema)
    }
}

fn check_node(node: &TreeNode, schema: &FeatureSchema) -> Result<()> {
    let TreeNode::Split { test, left, right } = node else {
        return Ok(());
    };
    let bad = |msg: String| Err(Error::Schema(msg));
    match *test {
        SplitTest::Atom(a) => match (schema.get(a.feature).map(|f| &f.kind), a.level) {
            (Some(FeatureKind::Boolean), None) => {}
            (Some(FeatureKind::Categorical { levels }), Some(l)) if l < levels.len() => {}
            _ => return bad(format!("invalid tree test on feature {}", a.feature)),
        },
        SplitTest::Greater { feature, threshold } => {
            match schema.get(feature) {
                Some(f) if f.kind == FeatureKind::Numeric => {}
                _ => return bad(format!("threshold test on non-numeric feature {feature}")),
            }
            if !threshold.is_finite() {
                return bad("non-finite tree threshold".into());
            }
        }
    }
    check_node(left, schema)?;
    check_node(right, schema)
}

fn node_to_file(node: &TreeNode, schema: &FeatureSchema) -> TreeNodeFile {
    match node {
        TreeNode::Leaf(v) => TreeNodeFile::Leaf { leaf: *v },
        TreeNode::Split { test, left, right } => {
            let (feature, threshold, level) = match *test {
                SplitTest::Atom(a) => {
                    let f = schema.feature(a.feature);
                    let level = match (&f.kind, a.level) {
                        (FeatureKind::Categorical { levels }, Some(l)) => Some(levels[l].clone()),
                        _ => None,
                    };
                    (f.name.clone(), None, level)
                }
                SplitTest::Greater { feature, threshold } => {
                    (schema.feature(feature).name.clone(), Some(threshold), None)
                }
            };
            TreeNodeFile::Split {
                feature,
                threshold,
                level,
                left: Box::new(node_to_file(left, schema)),
                right: Box::new(node_to_file(right, schema)),
            }
        }
    }
}

fn node_from_file(file: &TreeNodeFile, schema: &FeatureSchema) -> Result<TreeNode> {
    match file {
        TreeNodeFile::Leaf { leaf } => Ok(TreeNode::Leaf(*leaf)),
        TreeNodeFile::Split { feature, threshold, level, left, right } => {
            let id = schema.find(feature).ok_or_else(|| Error::Schema(format!("unknown feature `{feature}` in tree")))?;
            let test = match (&schema.feature(id).kind, threshold, level) {
                (FeatureKind::Numeric, Some(t), None) => SplitTest::Greater { feature: id, threshold: *t },
                (FeatureKind::Boolean, None, None) => SplitTest::Atom(AtomRef::boolean(id)),
                (FeatureKind::Categorical { levels }, None, Some(l)) => {
                    let idx = levels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::Schema(format!("unknown level `{l}` of `{feature}`")))?;
                    SplitTest::Atom(AtomRef::level(id, idx))
                }
                (kind, _, _) => {
                    return Err(Error::Schema(format!(
                        "tree test on {} feature `{feature}` needs {}",
                        kind.label(),
                        match kind {
                            FeatureKind::Numeric => "a threshold",
                            FeatureKind::Boolean => "no threshold or level",
                            FeatureKind::Categorical { .. } => "a level",
                        }
                    )))
                }
            };
            Ok(TreeNode::split(test, node_from_file(left, schema)?, node_from_file(right, schema)?))
        }
    }
}

/// Growth limits for CART training.
#[derive(Clone, Copy, Debug)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

/// All candidate tests for one feature over the rows at a node.
fn candidate_tests(schema: &FeatureSchema, id: FeatureId, rows: &[Instance], idx: &[usize]) -> Vec<SplitTest> {
    match &schema.feature(id).kind {
        FeatureKind::Boolean => vec![SplitTest::Atom(AtomRef::boolean(id))],
        FeatureKind::Categorical { levels } => (0..levels.len()).map(|l| SplitTest::Atom(AtomRef::level(id, l))).collect(),
        FeatureKind::Numeric => {
            let mut values: Vec<f64> = idx.iter().map(|&i| rows[i].get(id)).collect();
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            values.dedup();
            values.windows(2).map(|w| SplitTest::Greater { feature: id, threshold: (w[0] + w[1]) / 2.0 }).collect()
        }
    }
}

/// Greedy depth-limited CART on the rows listed in `idx` (duplicates allowed,
/// as in a bootstrap sample).
pub(crate) fn grow<R: Rng>(
    schema: &FeatureSchema,
    rows: &[Instance],
    target: &[bool],
    idx: &[usize],
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| target[i]).count();
    let majority = pos * 2 > n;
    if depth >= params.max_depth || pos == 0 || pos == n {
        return TreeNode::Leaf(majority);
    }
    let mut features: Vec<FeatureId> = schema.ids().collect();
    if let Some(k) = params.max_features {
        features.shuffle(rng);
        features.truncate(k.max(1));
        features.sort();
    }
    let mut best: Option<(f64, SplitTest)> = None;
    for id in features {
        for test in candidate_tests(schema, id, rows, idx) {
            let (mut n_r, mut pos_r) = (0usize, 0usize);
            for &i in idx {
                if test.holds(&rows[i]) {
                    n_r += 1;
                    pos_r += usize::from(target[i]);
                }
            }
            let n_l = n - n_r;
            if n_r == 0 || n_l == 0 {
                continue;
            }
            let impurity = (n_l as f64 * gini(pos - pos_r, n_l) + n_r as f64 * gini(pos_r, n_r)) / n as f64;
            if best.as_ref().is_none_or(|(b, _)| impurity < *b) {
                best = Some((impurity, test));
            }
        }
    }
    let Some((_, test)) = best else {
        return TreeNode::Leaf(majority);
    };
    let (right, left): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| test.holds(&rows[i]));
    let l = grow(schema, rows, target, &left, depth + 1, params, rng);
    let r = grow(schema, rows, target, &right, depth + 1, params, rng);
    if let (TreeNode::Leaf(a), TreeNode::Leaf(b)) = (&l, &r) {
        if a == b {
            return TreeNode::Leaf(*a);
        }
    }
    TreeNode::split(test, l, r)
}
