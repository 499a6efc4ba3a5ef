//! Decision lists and decision sets.
//!
//! File form: a JSON array of `{"if": [literal, ..], "then": label}`; a list
//! ends with `{"else": label}`. Literals are program fragments such as
//! `"Smoker"`, `"not Married"` or `"Age>50"`. Labels are booleans, 0/1, or
//! class names binarized against a chosen positive class.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, Type};
use crate::schema::{parse_bool, FeatureSchema};

/// A raw label as written in a rule file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Bool(bool),
    Number(f64),
    Class(String),
}

impl Label {
    /// Binary value of the label. Class names need `positive`, unless they
    /// read as booleans.
    pub fn binarize(&self, positive: Option<&str>) -> Result<bool> {
        match self {
            Label::Bool(b) => Ok(*b),
            Label::Number(v) if *v == 0.0 || *v == 1.0 => Ok(*v == 1.0),
            Label::Number(v) => Err(Error::Invalid(format!("label {v} is not binary"))),
            Label::Class(c) => match positive {
                Some(p) => Ok(c == p),
                None => parse_bool(c).ok_or_else(|| {
                    Error::Invalid(format!("label `{c}` is not binary; choose a positive class for one-vs-rest"))
                }),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    /// Conjoined literals; never empty.
    pub conditions: Vec<Expr>,
    pub label: bool,
}

impl Rule {
    pub fn new(conditions: Vec<Expr>, label: bool) -> Result<Self> {
        if conditions.is_empty() {
            return Err(Error::Invalid("a rule needs at least one condition".into()));
        }
        Ok(Rule { conditions, label })
    }

    fn antecedent(&self) -> Expr {
        let mut it = self.conditions.iter().cloned();
        let first = it.next().expect("non-empty rule");
        it.fold(first, |acc, c| Expr::And(Box::new(acc), Box::new(c)))
    }
}

/// Ordered rules; the first that fires decides, else the default.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleList {
    pub rules: Vec<Rule>,
    pub default: bool,
}

/// Unordered rules, all concluding the same class.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum Entry {
    Rule {
        #[serde(rename = "if")]
        conditions: Vec<String>,
        then: Label,
    },
    Default {
        #[serde(rename = "else")]
        label: Label,
    },
}

fn literal(text: &str, schema: &FeatureSchema) -> Result<Expr> {
    let e = parse(text, schema)?;
    if e.type_of(schema)? != Type::Bool {
        return Err(Error::Invalid(format!("rule condition `{text}` is not boolean")));
    }
    Ok(e)
}

fn read_entries(text: &str, schema: &FeatureSchema, positive: Option<&str>) -> Result<(Vec<Rule>, Option<bool>)> {
    let entries: Vec<Entry> = serde_json::from_str(text)?;
    let mut rules = Vec::new();
    let mut default = None;
    for (i, entry) in entries.into_iter().enumerate() {
        if default.is_some() {
            return Err(Error::Invalid(format!("rule {} follows the `else` entry", i + 1)));
        }
        match entry {
            Entry::Rule { conditions, then } => {
                let conds = conditions.iter().map(|c| literal(c, schema)).collect::<Result<Vec<_>>>()?;
                rules.push(Rule::new(conds, then.binarize(positive)?)?);
            }
            Entry::Default { label } => default = Some(label.binarize(positive)?),
        }
    }
    Ok((rules, default))
}

impl RuleList {
    pub fn from_json_str(text: &str, schema: &FeatureSchema, positive: Option<&str>) -> Result<Self> {
        let (rules, default) = read_entries(text, schema, positive)?;
        let default = default.ok_or_else(|| Error::Invalid("a decision list must end with an `else` entry".into()))?;
        Ok(RuleList { rules, default })
    }
}

impl RuleSet {
    /// With `positive` set, the set is read one-vs-rest: only rules that
    /// conclude the positive class are kept.
    pub fn from_json_str(text: &str, schema: &FeatureSchema, positive: Option<&str>) -> Result<Self> {
        match read_entries(text, schema, positive)? {
            (mut rules, None) => {
                if positive.is_some() {
                    rules.retain(|r| r.label);
                }
                Ok(RuleSet { rules })
            }
            (_, Some(_)) => Err(Error::Invalid("a decision set has no `else` entry".into())),
        }
    }
}

/// Right-nested conditional chain with the default as the last `else`.
pub fn compile_rule_list(list: &RuleList) -> Expr {
    list.rules.iter().rev().fold(Expr::BoolConst(list.default), |acc, r| {
        Expr::If(Box::new(r.antecedent()), Box::new(Expr::BoolConst(r.label)), Box::new(acc))
    })
}

/// Disjunction of rule antecedents. A set whose rules all conclude the
/// negative class compiles to the negation of that disjunction.
pub fn compile_rule_set(set: &RuleSet) -> Result<Expr> {
    let Some(first) = set.rules.first() else {
        return Ok(Expr::BoolConst(false));
    };
    if set.rules.iter().any(|r| r.label != first.label) {
        return Err(Error::ConflictingLabels("a decision set must conclude a single class".into()));
    }
    let mut it = set.rules.iter().map(Rule::antecedent);
    let head = it.next().expect("non-empty set");
    let any = it.fold(head, |acc, a| Expr::Or(Box::new(acc), Box::new(a)));
    Ok(if first.label { any } else { Expr::Not(Box::new(any)) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;
    use crate::schema::Instance;

    fn schema() -> FeatureSchema {
        FeatureSchema::booleans(&["A", "B", "C"]).unwrap()
    }

    #[test]
    fn single_rule_list() {
        let s = schema();
        let l = RuleList::from_json_str(r#"[{"if":["A","B"],"then":true},{"else":false}]"#, &s, None).unwrap();
        let p = compile_rule_list(&l);
        assert_eq!(pretty_print(&p, &s), "if A and B: True\nelse: False");
    }

    #[test]
    fn earlier_rule_wins_on_overlap() {
        let s = schema();
        let text = r#"[{"if":["A"],"then":"yes"},{"if":["B"],"then":"no"},{"else":"no"}]"#;
        let p = compile_rule_list(&RuleList::from_json_str(text, &s, Some("yes")).unwrap());
        for m in 0..8usize {
            let bits: Vec<bool> = (0..3).map(|j| m >> j & 1 == 1).collect();
            assert_eq!(predict(&p, &Instance::from_bools(&bits)), bits[0]);
        }
    }

    #[test]
    fn rule_set_is_disjunction() {
        let s = schema();
        let set = RuleSet::from_json_str(r#"[{"if":["A","B"],"then":1},{"if":["C"],"then":1}]"#, &s, None).unwrap();
        assert_eq!(pretty_print(&compile_rule_set(&set).unwrap(), &s), "(A and B) or C");
        assert_eq!(compile_rule_set(&RuleSet { rules: vec![] }).unwrap(), Expr::BoolConst(false));
    }

    #[test]
    fn one_vs_rest_set_keeps_positive_rules() {
        let s = schema();
        let text = r#"[{"if":["A"],"then":"x"},{"if":["B"],"then":"y"},{"if":["C"],"then":"x"}]"#;
        let set = RuleSet::from_json_str(text, &s, Some("x")).unwrap();
        assert_eq!(pretty_print(&compile_rule_set(&set).unwrap(), &s), "A or C");
    }

    #[test]
    fn mixed_set_conflicts() {
        let s = schema();
        let set = RuleSet::from_json_str(r#"[{"if":["A"],"then":true},{"if":["C"],"then":false}]"#, &s, None).unwrap();
        assert!(matches!(compile_rule_set(&set), Err(Error::ConflictingLabels(_))));
    }

    #[test]
    fn multiclass_needs_positive() {
        let s = schema();
        let text = r#"[{"if":["A"],"then":"Depression"},{"else":"Diabetes"}]"#;
        assert!(RuleList::from_json_str(text, &s, None).is_err());
        assert!(RuleList::from_json_str(text, &s, Some("Diabetes")).is_ok());
    }

    #[test]
    fn malformed_lists() {
        let s = schema();
        assert!(RuleList::from_json_str(r#"[{"if":["A"],"then":true}]"#, &s, None).is_err());
        assert!(RuleList::from_json_str(r#"[{"if":[],"then":true},{"else":false}]"#, &s, None).is_err());
        assert!(RuleList::from_json_str(r#"[{"else":false},{"if":["A"],"then":true}]"#, &s, None).is_err());
    }
}
