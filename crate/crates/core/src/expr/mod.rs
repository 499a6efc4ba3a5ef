//! The explanation language: small typed expression trees over the
//! features of a schema.
//!
//! A program is either boolean-valued or real-valued. Boolean programs
//! predict their value directly; real programs predict `true` when their
//! value is positive.

mod batch;
mod parse;
mod print;

use std::fmt;

use thiserror::Error;

use crate::schema::{AtomRef, FeatureId, FeatureKind, FeatureSchema, Instance};

pub use batch::{BatchEvaluator, Mask};
pub use parse::{parse, ParseError};
pub use print::{format_threshold, pretty_print};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Bool,
    Real,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Bool => "bool",
            Type::Real => "real",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Comparator {
    /// `feature <= threshold`
    Le,
    /// `feature > threshold`
    Gt,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Gt => ">",
        }
    }

    pub fn test(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Le => value <= threshold,
            Comparator::Gt => value > threshold,
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Comparator::Le => Comparator::Gt,
            Comparator::Gt => Comparator::Le,
        }
    }
}

/// Atomic numeric test `feature <op> threshold`; counts as one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Predicate {
    pub feature: FeatureId,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(feature: FeatureId, comparator: Comparator, threshold: f64) -> Self {
        Predicate { feature, comparator, threshold }
    }

    pub fn test(&self, x: &Instance) -> bool {
        self.comparator.test(x.get(self.feature), self.threshold)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    BoolConst(bool),
    BoolAtom(AtomRef),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    RealConst(f64),
    RealAtom(FeatureId),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Predicate(Predicate),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
}

/// Result of evaluating a program on one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Bool(bool),
    Real(f64),
}

impl Value {
    /// Boolean values stand for themselves; reals by the positive-score rule.
    pub fn truthy(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Real(r) => r > 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum TypeErrorKind {
    #[error("expected {expected}, found {found}")]
    Mismatch { expected: Type, found: Type },
    #[error("if branches disagree: {then} vs {otherwise}")]
    BranchMismatch { then: Type, otherwise: Type },
    #[error("unknown feature {0}")]
    UnknownFeature(FeatureId),
    #[error("{node} cannot use {kind} feature `{name}`")]
    KindMismatch { node: &'static str, kind: &'static str, name: String },
    #[error("unknown level {level} of `{name}`")]
    UnknownLevel { name: String, level: usize },
    #[error("non-finite constant")]
    NonFinite,
}

/// A typing failure at the subtree addressed by `path` (child indices from the root).
#[derive(Clone, Debug, PartialEq, Error)]
#[error("type error at node {path:?}: {kind}")]
pub struct TypeError {
    pub path: Vec<usize>,
    pub kind: TypeErrorKind,
}

pub fn atom(a: AtomRef) -> Expr {
    Expr::BoolAtom(a)
}

pub fn var(f: usize) -> Expr {
    Expr::BoolAtom(AtomRef::boolean(FeatureId(f)))
}

pub fn not(e: Expr) -> Expr {
    Expr::Not(Box::new(e))
}

pub fn and(l: Expr, r: Expr) -> Expr {
    Expr::And(Box::new(l), Box::new(r))
}

pub fn or(l: Expr, r: Expr) -> Expr {
    Expr::Or(Box::new(l), Box::new(r))
}

pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
    Expr::If(Box::new(c), Box::new(t), Box::new(e))
}

pub fn pred(feature: FeatureId, comparator: Comparator, threshold: f64) -> Expr {
    Expr::Predicate(Predicate::new(feature, comparator, threshold))
}

pub fn add(l: Expr, r: Expr) -> Expr {
    Expr::Add(Box::new(l), Box::new(r))
}

pub fn sub(l: Expr, r: Expr) -> Expr {
    Expr::Sub(Box::new(l), Box::new(r))
}

pub fn mul(l: Expr, r: Expr) -> Expr {
    Expr::Mul(Box::new(l), Box::new(r))
}

impl Expr {
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::BoolConst(_)
            | Expr::BoolAtom(_)
            | Expr::RealConst(_)
            | Expr::RealAtom(_)
            | Expr::Predicate(_) => vec![],
            Expr::Not(e) => vec![e],
            Expr::And(l, r) | Expr::Or(l, r) | Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
                vec![l, r]
            }
            Expr::If(c, t, e) => vec![c, t, e],
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::BoolConst(_)
            | Expr::BoolAtom(_)
            | Expr::RealConst(_)
            | Expr::RealAtom(_)
            | Expr::Predicate(_) => vec![],
            Expr::Not(e) => vec![e],
            Expr::And(l, r) | Expr::Or(l, r) | Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
                vec![l, r]
            }
            Expr::If(c, t, e) => vec![c, t, e],
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children().is_empty()
    }

    /// One per operator and one per leaf; a predicate is a single leaf.
    pub fn node_count(&self) -> usize {
        1 + self.children().into_iter().map(Expr::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().into_iter().map(Expr::depth).max().unwrap_or(0)
    }

    /// The type a node produces, assuming the tree is well-typed.
    pub fn result_type(&self) -> Type {
        match self {
            Expr::BoolConst(_) | Expr::BoolAtom(_) | Expr::Not(_) | Expr::And(..) | Expr::Or(..) => Type::Bool,
            Expr::Predicate(_) => Type::Bool,
            Expr::RealConst(_) | Expr::RealAtom(_) | Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) => Type::Real,
            Expr::If(_, t, _) => t.result_type(),
        }
    }

    /// Preorder paths of every node; the root is the empty path.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn walk(e: &Expr, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(prefix.clone());
            for (i, c) in e.children().into_iter().enumerate() {
                prefix.push(i);
                walk(c, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn at(&self, path: &[usize]) -> Option<&Expr> {
        let mut cur = self;
        for &i in path {
            cur = *cur.children().get(i)?;
        }
        Some(cur)
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Expr> {
        let mut cur = self;
        for &i in path {
            cur = cur.children_mut().into_iter().nth(i)?;
        }
        Some(cur)
    }

    /// Copy of `self` with the subtree at `path` replaced.
    pub fn with_replaced(&self, path: &[usize], replacement: Expr) -> Option<Expr> {
        let mut out = self.clone();
        *out.at_mut(path)? = replacement;
        Some(out)
    }

    pub fn type_of(&self, schema: &FeatureSchema) -> Result<Type, TypeError> {
        type_of(self, schema)
    }

    pub fn eval(&self, x: &Instance) -> Value {
        eval(self, x)
    }

    pub fn predict(&self, x: &Instance) -> bool {
        predict(self, x)
    }
}

/// Static type of `e`, or the first offending subtree.
pub fn type_of(e: &Expr, schema: &FeatureSchema) -> Result<Type, TypeError> {
    let mut path = Vec::new();
    check(e, schema, &mut path)
}

fn check(e: &Expr, schema: &FeatureSchema, path: &mut Vec<usize>) -> Result<Type, TypeError> {
    let fail = |path: &Vec<usize>, kind| Err(TypeError { path: path.clone(), kind });
    let feature = |id: FeatureId, path: &Vec<usize>| {
        schema
            .get(id)
            .ok_or_else(|| TypeError { path: path.clone(), kind: TypeErrorKind::UnknownFeature(id) })
    };
    let child = |i: usize, c: &Expr, path: &mut Vec<usize>| {
        path.push(i);
        let t = check(c, schema, path);
        path.pop();
        t
    };
    let expect = |got: Type, want: Type, i: usize, path: &Vec<usize>| {
        if got == want {
            Ok(())
        } else {
            let mut p = path.clone();
            p.push(i);
            Err(TypeError { path: p, kind: TypeErrorKind::Mismatch { expected: want, found: got } })
        }
    };
    match e {
        Expr::BoolConst(_) => Ok(Type::Bool),
        Expr::RealConst(v) => {
            if v.is_finite() {
                Ok(Type::Real)
            } else {
                fail(path, TypeErrorKind::NonFinite)
            }
        }
        Expr::BoolAtom(a) => {
            let f = feature(a.feature, path)?;
            match (&f.kind, a.level) {
                (FeatureKind::Boolean, None) => Ok(Type::Bool),
                (FeatureKind::Categorical { levels }, Some(l)) => {
                    if l < levels.len() {
                        Ok(Type::Bool)
                    } else {
                        fail(path, TypeErrorKind::UnknownLevel { name: f.name.clone(), level: l })
                    }
                }
                (kind, _) => fail(
                    path,
                    TypeErrorKind::KindMismatch { node: "atom", kind: kind.label(), name: f.name.clone() },
                ),
            }
        }
        Expr::RealAtom(id) => {
            let f = feature(*id, path)?;
            match f.kind {
                FeatureKind::Numeric | FeatureKind::Boolean => Ok(Type::Real),
                ref kind => fail(
                    path,
                    TypeErrorKind::KindMismatch { node: "real atom", kind: kind.label(), name: f.name.clone() },
                ),
            }
        }
        Expr::Predicate(p) => {
            let f = feature(p.feature, path)?;
            if f.kind != FeatureKind::Numeric {
                return fail(
                    path,
                    TypeErrorKind::KindMismatch { node: "predicate", kind: f.kind.label(), name: f.name.clone() },
                );
            }
            if !p.threshold.is_finite() {
                return fail(path, TypeErrorKind::NonFinite);
            }
            Ok(Type::Bool)
        }
        Expr::Not(c) => {
            let t = child(0, c, path)?;
            expect(t, Type::Bool, 0, path)?;
            Ok(Type::Bool)
        }
        Expr::And(l, r) | Expr::Or(l, r) => {
            for (i, c) in [l, r].into_iter().enumerate() {
                let t = child(i, c, path)?;
                expect(t, Type::Bool, i, path)?;
            }
            Ok(Type::Bool)
        }
        Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
            for (i, c) in [l, r].into_iter().enumerate() {
                let t = child(i, c, path)?;
                expect(t, Type::Real, i, path)?;
            }
            Ok(Type::Real)
        }
        Expr::If(c, t, f) => {
            let ct = child(0, c, path)?;
            expect(ct, Type::Bool, 0, path)?;
            let tt = child(1, t, path)?;
            let ft = child(2, f, path)?;
            if tt != ft {
                return fail(path, TypeErrorKind::BranchMismatch { then: tt, otherwise: ft });
            }
            Ok(tt)
        }
    }
}

/// Evaluates a well-typed program. Total on schema-conformant instances.
pub fn eval(e: &Expr, x: &Instance) -> Value {
    match e {
        Expr::BoolConst(b) => Value::Bool(*b),
        Expr::BoolAtom(a) => Value::Bool(x.atom(*a)),
        Expr::Predicate(p) => Value::Bool(p.test(x)),
        Expr::Not(c) => Value::Bool(!eval_bool(c, x)),
        Expr::And(l, r) => Value::Bool(eval_bool(l, x) && eval_bool(r, x)),
        Expr::Or(l, r) => Value::Bool(eval_bool(l, x) || eval_bool(r, x)),
        Expr::RealConst(v) => Value::Real(*v),
        Expr::RealAtom(id) => Value::Real(x.get(*id)),
        Expr::Add(l, r) => Value::Real(eval_real(l, x) + eval_real(r, x)),
        Expr::Sub(l, r) => Value::Real(eval_real(l, x) - eval_real(r, x)),
        Expr::Mul(l, r) => Value::Real(eval_real(l, x) * eval_real(r, x)),
        Expr::If(c, t, f) => {
            if eval_bool(c, x) {
                eval(t, x)
            } else {
                eval(f, x)
            }
        }
    }
}

fn eval_bool(e: &Expr, x: &Instance) -> bool {
    match eval(e, x) {
        Value::Bool(b) => b,
        // unreachable on well-typed input
        Value::Real(r) => r > 0.0,
    }
}

fn eval_real(e: &Expr, x: &Instance) -> f64 {
    match eval(e, x) {
        Value::Real(r) => r,
        Value::Bool(b) => f64::from(u8::from(b)),
    }
}

pub fn predict(e: &Expr, x: &Instance) -> bool {
    eval(e, x).truthy()
}

pub fn node_count(e: &Expr) -> usize {
    e.node_count()
}
