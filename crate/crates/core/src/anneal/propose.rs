//! Random local moves on expression trees.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::expr::{Comparator, Expr, Predicate, Type};
use crate::schema::{AtomRef, FeatureId, FeatureSchema};

const MAX_RETRIES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Grow,
    Shrink,
    Replace,
}

/// Probabilities of each move kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProposalMix {
    pub grow: f64,
    pub shrink: f64,
    pub replace: f64,
}

impl Default for ProposalMix {
    fn default() -> Self {
        ProposalMix { grow: 0.35, shrink: 0.35, replace: 0.30 }
    }
}

impl ProposalMix {
    pub fn is_valid(&self) -> bool {
        let parts = [self.grow, self.shrink, self.replace];
        parts.iter().all(|p| p.is_finite() && *p >= 0.0) && (parts.iter().sum::<f64>() - 1.0).abs() < 1e-9
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Move {
        let u = rng.gen::<f64>();
        if u < self.grow {
            Move::Grow
        } else if u < self.grow + self.shrink {
            Move::Shrink
        } else {
            Move::Replace
        }
    }
}

/// The building blocks available to the search for one schema.
#[derive(Clone, Debug)]
pub struct Grammar {
    atoms: Vec<AtomRef>,
    predicates: Vec<(FeatureId, Vec<f64>)>,
    real_features: Vec<FeatureId>,
    real_constants: Vec<f64>,
    arithmetic: bool,
}

impl Grammar {
    pub fn new(schema: &FeatureSchema, arithmetic: bool) -> Self {
        let predicates: Vec<(FeatureId, Vec<f64>)> = schema
            .predicate_features()
            .into_iter()
            .map(|id| (id, schema.feature(id).thresholds.clone()))
            .collect();
        let mut real_features = schema.numeric_features();
        if real_features.is_empty() {
            real_features = schema.bool_atoms().into_iter().filter(|a| a.level.is_none()).map(|a| a.feature).collect();
        }
        Grammar {
            atoms: schema.bool_atoms(),
            predicates,
            real_features,
            real_constants: vec![-1.0, 0.0, 0.5, 1.0, 2.0],
            arithmetic,
        }
    }

    pub fn arithmetic(&self) -> bool {
        self.arithmetic
    }

    pub fn atoms(&self) -> &[AtomRef] {
        &self.atoms
    }

    /// Every predicate leaf: each pooled threshold under both comparators.
    pub fn predicate_leaves(&self) -> Vec<Predicate> {
        let mut out = Vec::new();
        for (id, pool) in &self.predicates {
            for &t in pool {
                for c in [Comparator::Le, Comparator::Gt] {
                    out.push(Predicate::new(*id, c, t));
                }
            }
        }
        out
    }

    pub fn bool_leaf<R: Rng>(&self, rng: &mut R) -> Expr {
        // constants are rarely useful inside a program, so draw them less often
        let mut kinds: Vec<(u8, f64)> = vec![(0, 0.1)];
        if !self.atoms.is_empty() {
            kinds.push((1, 0.45));
        }
        if !self.predicates.is_empty() {
            kinds.push((2, 0.45));
        }
        let total: f64 = kinds.iter().map(|k| k.1).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut kind = kinds[kinds.len() - 1].0;
        for (k, w) in &kinds {
            if u < *w {
                kind = *k;
                break;
            }
            u -= w;
        }
        match kind {
            0 => Expr::BoolConst(rng.gen()),
            1 => Expr::BoolAtom(self.atoms[rng.gen_range(0..self.atoms.len())]),
            _ => {
                let (id, pool) = &self.predicates[rng.gen_range(0..self.predicates.len())];
                let comparator = if rng.gen() { Comparator::Le } else { Comparator::Gt };
                Expr::Predicate(Predicate::new(*id, comparator, pool[rng.gen_range(0..pool.len())]))
            }
        }
    }

    pub fn real_leaf<R: Rng>(&self, rng: &mut R) -> Expr {
        if !self.real_features.is_empty() && rng.gen() {
            Expr::RealAtom(self.real_features[rng.gen_range(0..self.real_features.len())])
        } else {
            Expr::RealConst(self.real_constants[rng.gen_range(0..self.real_constants.len())])
        }
    }

    pub fn leaf<R: Rng>(&self, t: Type, rng: &mut R) -> Expr {
        match t {
            Type::Bool => self.bool_leaf(rng),
            Type::Real => self.real_leaf(rng),
        }
    }
}

fn boxed(e: Expr) -> Box<Expr> {
    Box::new(e)
}

/// Wraps `v` in a fresh operator of the same result type, with `v` in a
/// random compatible slot and fresh leaves elsewhere.
fn grow_node<R: Rng>(v: &Expr, g: &Grammar, rng: &mut R) -> Expr {
    let v = v.clone();
    match v.result_type() {
        Type::Bool => match rng.gen_range(0..4) {
            0 => Expr::Not(boxed(v)),
            op @ (1 | 2) => {
                let leaf = g.bool_leaf(rng);
                let (l, r) = if rng.gen() { (v, leaf) } else { (leaf, v) };
                if op == 1 {
                    Expr::And(boxed(l), boxed(r))
                } else {
                    Expr::Or(boxed(l), boxed(r))
                }
            }
            _ => match rng.gen_range(0..3) {
                0 => Expr::If(boxed(v), boxed(g.bool_leaf(rng)), boxed(g.bool_leaf(rng))),
                1 => Expr::If(boxed(g.bool_leaf(rng)), boxed(v), boxed(g.bool_leaf(rng))),
                _ => Expr::If(boxed(g.bool_leaf(rng)), boxed(g.bool_leaf(rng)), boxed(v)),
            },
        },
        Type::Real => {
            let op = rng.gen_range(0..4);
            if op == 3 {
                let other = g.real_leaf(rng);
                let cond = g.bool_leaf(rng);
                return if rng.gen() {
                    Expr::If(boxed(cond), boxed(v), boxed(other))
                } else {
                    Expr::If(boxed(cond), boxed(other), boxed(v))
                };
            }
            let leaf = g.real_leaf(rng);
            let (l, r) = if rng.gen() { (boxed(v), boxed(leaf)) } else { (boxed(leaf), boxed(v)) };
            match op {
                0 => Expr::Add(l, r),
                1 => Expr::Sub(l, r),
                _ => Expr::Mul(l, r),
            }
        }
    }
}

/// Children of an operator that have the operator's own type.
fn same_typed_children(v: &Expr) -> Vec<Expr> {
    let t = v.result_type();
    match v {
        Expr::If(c, a, b) => {
            let mut out = vec![(**a).clone(), (**b).clone()];
            if t == Type::Bool {
                out.insert(0, (**c).clone());
            }
            out
        }
        _ => v.children().into_iter().filter(|c| c.result_type() == t).cloned().collect(),
    }
}

type BinaryOp = fn(Box<Expr>, Box<Expr>) -> Expr;

fn replace_node<R: Rng>(v: &Expr, at_root: bool, g: &Grammar, rng: &mut R) -> Expr {
    let swap = |l: &Expr, r: &Expr, ops: &[BinaryOp], rng: &mut R| {
        ops[rng.gen_range(0..ops.len())](boxed(l.clone()), boxed(r.clone()))
    };
    match v {
        Expr::And(l, r) => Expr::Or(l.clone(), r.clone()),
        Expr::Or(l, r) => Expr::And(l.clone(), r.clone()),
        Expr::Add(l, r) => swap(l, r, &[Expr::Sub, Expr::Mul], rng),
        Expr::Sub(l, r) => swap(l, r, &[Expr::Add, Expr::Mul], rng),
        Expr::Mul(l, r) => swap(l, r, &[Expr::Add, Expr::Sub], rng),
        _ => {
            let t = if at_root && g.arithmetic && rng.gen::<f64>() < 0.5 {
                match v.result_type() {
                    Type::Bool => Type::Real,
                    Type::Real => Type::Bool,
                }
            } else {
                v.result_type()
            };
            g.leaf(t, rng)
        }
    }
}

/// One move of the given kind, or `None` when it does not apply.
pub fn apply_move<R: Rng>(e: &Expr, mv: Move, g: &Grammar, rng: &mut R) -> Option<Expr> {
    let paths = e.paths();
    match mv {
        Move::Grow => {
            let p = &paths[rng.gen_range(0..paths.len())];
            let v = e.at(p)?;
            e.with_replaced(p, grow_node(v, g, rng))
        }
        Move::Shrink => {
            let ops: Vec<&Vec<usize>> = paths.iter().filter(|p| e.at(p).is_some_and(|v| !v.is_leaf())).collect();
            if ops.is_empty() {
                return Some(g.leaf(e.result_type(), rng));
            }
            let p = ops[rng.gen_range(0..ops.len())];
            let kids = same_typed_children(e.at(p)?);
            if kids.is_empty() {
                let t = e.at(p)?.result_type();
                return e.with_replaced(p, g.leaf(t, rng));
            }
            e.with_replaced(p, kids[rng.gen_range(0..kids.len())].clone())
        }
        Move::Replace => {
            let p = &paths[rng.gen_range(0..paths.len())];
            let v = e.at(p)?;
            e.with_replaced(p, replace_node(v, p.is_empty(), g, rng))
        }
    }
}

/// A random neighbour of `e`: one grow, shrink or replace move. Root type
/// stays boolean unless the grammar allows arithmetic. Falls back to `e`
/// itself after repeated invalid draws.
pub fn propose<R: Rng>(e: &Expr, g: &Grammar, mix: &ProposalMix, rng: &mut R) -> Expr {
    for _ in 0..MAX_RETRIES {
        let mv = mix.draw(rng);
        if let Some(candidate) = apply_move(e, mv, g, rng) {
            if g.arithmetic || candidate.result_type() == Type::Bool {
                return candidate;
            }
        }
    }
    e.clone()
}
