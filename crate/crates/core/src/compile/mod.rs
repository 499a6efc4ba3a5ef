//! Translations of classic interpretable models into programs.

mod rules;
mod simplify;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Comparator, Expr, Predicate};
use crate::model::{DecisionTreeModel, SplitTest, TreeNode};
use crate::schema::{FeatureId, FeatureKind, FeatureSchema, Instance};

pub use rules::{compile_rule_list, compile_rule_set, Label, Rule, RuleList, RuleSet};
pub use simplify::{simplify_binary, SIMPLIFY_LIMIT};

fn test_expr(test: &SplitTest) -> Expr {
    match *test {
        SplitTest::Atom(a) => Expr::BoolAtom(a),
        SplitTest::Greater { feature, threshold } => Expr::Predicate(Predicate::new(feature, Comparator::Gt, threshold)),
    }
}

/// `if c: x else: y` with the trivial shapes folded away.
fn branch(c: Expr, then: Expr, otherwise: Expr) -> Expr {
    match (&then, &otherwise) {
        (Expr::BoolConst(true), Expr::BoolConst(false)) => c,
        (Expr::BoolConst(false), Expr::BoolConst(true)) => Expr::Not(Box::new(c)),
        _ if then == otherwise => then,
        _ => Expr::If(Box::new(c), Box::new(then), Box::new(otherwise)),
    }
}

fn compile_node(node: &TreeNode) -> Expr {
    match node {
        TreeNode::Leaf(v) => Expr::BoolConst(*v),
        TreeNode::Split { test, left, right } => branch(test_expr(test), compile_node(right), compile_node(left)),
    }
}

/// Program computing the same function as the tree: each split becomes a
/// conditional on its test, with the test-true branch first.
pub fn compile_tree(tree: &DecisionTreeModel, schema: &FeatureSchema) -> Result<Expr> {
    DecisionTreeModel::new(tree.root.clone(), schema)?;
    Ok(compile_node(&tree.root))
}

/// A linear scorer; predicts true when the score is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    /// One weight per schema feature.
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Serialize, Deserialize)]
struct LinearFile {
    weights: BTreeMap<String, f64>,
    #[serde(default)]
    bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64, schema: &FeatureSchema) -> Result<Self> {
        if weights.len() != schema.arity() {
            return Err(Error::Schema(format!("{} weights for {} features", weights.len(), schema.arity())));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("linear model weights must be finite".into()));
        }
        for (id, w) in schema.ids().zip(&weights) {
            if *w != 0.0 && matches!(schema.feature(id).kind, FeatureKind::Categorical { .. }) {
                return Err(Error::Schema(format!(
                    "categorical feature `{}` cannot carry a linear weight",
                    schema.feature(id).name
                )));
            }
        }
        Ok(LinearModel { weights, bias })
    }

    /// Reads `{"weights": {name: w, ..}, "bias": b}`; unnamed features get 0.
    pub fn from_json_str(text: &str, schema: &FeatureSchema) -> Result<Self> {
        let file: LinearFile = serde_json::from_str(text)?;
        let mut weights = vec![0.0; schema.arity()];
        for (name, w) in &file.weights {
            let id = schema.find(name).ok_or_else(|| Error::Schema(format!("unknown feature `{name}`")))?;
            weights[id.0] = *w;
        }
        Self::new(weights, file.bias, schema)
    }

    pub fn to_json_string(&self, schema: &FeatureSchema) -> String {
        let weights = schema.ids().map(|id| (schema.feature(id).name.clone(), self.weights[id.0])).collect();
        serde_json::to_string_pretty(&LinearFile { weights, bias: self.bias }).expect("linear model serializes")
    }

    /// `w . x + b`, summed in feature order.
    pub fn score(&self, x: &Instance) -> f64 {
        let mut s = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            s += w * x.get(FeatureId(i));
        }
        s + self.bias
    }

    pub fn predict(&self, x: &Instance) -> bool {
        self.score(x) > 0.0
    }
}

fn term(w: f64, id: FeatureId) -> Expr {
    if w == 1.0 {
        Expr::RealAtom(id)
    } else {
        Expr::Mul(Box::new(Expr::RealConst(w)), Box::new(Expr::RealAtom(id)))
    }
}

/// `w1*f1 + .. + wn*fn + b` as a real-valued program. Zero weights and a
/// zero bias are left out; negative coefficients after the first term turn
/// into subtraction.
pub fn compile_linear(m: &LinearModel) -> Expr {
    let mut acc: Option<Expr> = None;
    let terms = m.weights.iter().enumerate().filter(|(_, w)| **w != 0.0);
    for (i, &w) in terms {
        let id = FeatureId(i);
        acc = Some(match acc {
            None => term(w, id),
            Some(a) if w < 0.0 => Expr::Sub(Box::new(a), Box::new(term(-w, id))),
            Some(a) => Expr::Add(Box::new(a), Box::new(term(w, id))),
        });
    }
    match acc {
        None => Expr::RealConst(m.bias),
        Some(a) if m.bias == 0.0 => a,
        Some(a) if m.bias < 0.0 => Expr::Sub(Box::new(a), Box::new(Expr::RealConst(-m.bias))),
        Some(a) => Expr::Add(Box::new(a), Box::new(Expr::RealConst(m.bias))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    fn sample_tree(schema: &FeatureSchema) -> DecisionTreeModel {
        let t = |name: &str| SplitTest::Atom(schema.resolve_atom(name).unwrap());
        let root = TreeNode::split(
            t("A"),
            TreeNode::split(t("C"), TreeNode::Leaf(true), TreeNode::Leaf(false)),
            TreeNode::split(
                t("B"),
                TreeNode::Leaf(false),
                TreeNode::split(t("D"), TreeNode::Leaf(false), TreeNode::Leaf(true)),
            ),
        );
        DecisionTreeModel::new(root, schema).unwrap()
    }

    #[test]
    fn tree_becomes_nested_conditional() {
        let s = FeatureSchema::booleans(&["A", "B", "C", "D"]).unwrap();
        let p = compile_tree(&sample_tree(&s), &s).unwrap();
        assert_eq!(pretty_print(&p, &s), "if A:\n    if B: D\n    else: False\nelse: not C");
    }

    #[test]
    fn single_leaf_tree() {
        let s = FeatureSchema::booleans(&["A"]).unwrap();
        let t = DecisionTreeModel::new(TreeNode::Leaf(true), &s).unwrap();
        assert_eq!(compile_tree(&t, &s).unwrap(), Expr::BoolConst(true));
    }

    #[test]
    fn linear_prints_like_source() {
        let s = FeatureSchema::booleans(&["A", "B"]).unwrap();
        let m = LinearModel::from_json_str(r#"{"weights":{"A":10,"B":-9},"bias":2}"#, &s).unwrap();
        assert_eq!(pretty_print(&compile_linear(&m), &s), "10*A - 9*B + 2");
    }

    #[test]
    fn zero_linear_model_is_false() {
        let s = FeatureSchema::booleans(&["A"]).unwrap();
        let m = LinearModel::new(vec![0.0], 0.0, &s).unwrap();
        let p = compile_linear(&m);
        assert_eq!(p, Expr::RealConst(0.0));
        assert!(!predict(&p, &Instance::from_bools(&[true])));
    }

    #[test]
    fn unit_weight_negative_bias() {
        let s = FeatureSchema::booleans(&["A"]).unwrap();
        let p = compile_linear(&LinearModel::new(vec![1.0], -0.5, &s).unwrap());
        assert_eq!(pretty_print(&p, &s), "A - 0.5");
        assert!(predict(&p, &Instance::from_bools(&[true])));
        assert!(!predict(&p, &Instance::from_bools(&[false])));
    }

    #[test]
    fn linear_rejects_unknown_names() {
        let s = FeatureSchema::booleans(&["A"]).unwrap();
        assert!(LinearModel::from_json_str(r#"{"weights":{"Z":1}}"#, &s).is_err());
    }
}
