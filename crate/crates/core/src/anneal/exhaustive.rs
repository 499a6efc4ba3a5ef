//! Brute-force minimization over every small boolean program.
//!
//! Trees are built bottom-up by size. `and`/`or` take their operands in a
//! fixed order only, so commuted duplicates are never generated.

use std::collections::HashMap;

use super::{better, ExplanationResult, Grammar, Objective};
use crate::error::{Error, Result};
use crate::expr::{Expr, Mask};
use crate::loss::Loss;
use crate::perturb::PerturbationBatch;

/// Largest search space `exhaustive_search` will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 10_000_000;

#[derive(Clone, Copy, Debug)]
struct TreeRef {
    size: u8,
    idx: u32,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Leaf(u32),
    Not(TreeRef),
    And(TreeRef, TreeRef),
    Or(TreeRef, TreeRef),
    If(TreeRef, TreeRef, TreeRef),
}

/// Number of boolean trees with at most `max_nodes` nodes over `leaves`
/// distinct leaves, counting `and`/`or` operand pairs once.
pub fn search_space_size(leaves: usize, max_nodes: usize) -> u128 {
    let mut by_size = vec![0u128; max_nodes + 1];
    for s in 1..=max_nodes {
        by_size[s] = layer_size(&by_size, leaves as u128, s);
    }
    by_size.iter().fold(0u128, |a, b| a.saturating_add(*b))
}

fn layer_size(by_size: &[u128], leaves: u128, s: usize) -> u128 {
    if s == 1 {
        return leaves;
    }
    let t = |k: usize| by_size[k];
    let mut n = t(s - 1);
    for a in 1..s - 1 {
        let b = s - 1 - a;
        if a < b {
            n = n.saturating_add(t(a).saturating_mul(t(b)).saturating_mul(2));
        } else if a == b {
            n = n.saturating_add(t(a).saturating_mul(t(a).saturating_add(1)));
        }
        for c in 1..b {
            n = n.saturating_add(t(a).saturating_mul(t(c)).saturating_mul(t(b - c)));
        }
    }
    n
}

struct Search<'a> {
    objective: &'a Objective<'a>,
    schema: &'a crate::FeatureSchema,
    leaves: Vec<Expr>,
    layers: Vec<Vec<(Node, Mask)>>,
    cache: HashMap<Mask, f64>,
    best: Option<(f64, usize, Expr)>,
    visited: usize,
}

impl Search<'_> {
    fn mask(&self, r: TreeRef) -> &Mask {
        &self.layers[r.size as usize][r.idx as usize].1
    }

    fn build(&self, node: Node) -> Expr {
        let sub = |r: TreeRef| Box::new(self.build(self.layers[r.size as usize][r.idx as usize].0));
        match node {
            Node::Leaf(i) => self.leaves[i as usize].clone(),
            Node::Not(c) => Expr::Not(sub(c)),
            Node::And(l, r) => Expr::And(sub(l), sub(r)),
            Node::Or(l, r) => Expr::Or(sub(l), sub(r)),
            Node::If(c, t, e) => Expr::If(sub(c), sub(t), sub(e)),
        }
    }

    fn visit(&mut self, size: usize, node: Node, mask: Mask, keep: bool) {
        self.visited += 1;
        let e = match self.cache.get(&mask) {
            Some(&e) => e,
            None => {
                let e = self.objective.energy_of_mask(&mask);
                self.cache.insert(mask.clone(), e);
                e
            }
        };
        let improves = match &self.best {
            None => true,
            // sizes arrive in ascending order, so only equal sizes can tie
            Some((be, bs, _)) => e < *be || (e == *be && size == *bs),
        };
        if improves {
            let program = self.build(node);
            let replace = match &self.best {
                None => true,
                Some((be, bs, bp)) => better((e, size, &program), (*be, *bs, bp), self.schema),
            };
            if replace {
                self.best = Some((e, size, program));
            }
        }
        if keep {
            self.layers[size].push((node, mask));
        }
    }

    fn refs(&self, size: usize) -> impl Iterator<Item = TreeRef> {
        (0..self.layers[size].len() as u32).map(move |idx| TreeRef { size: size as u8, idx })
    }

    fn grow_layer(&mut self, s: usize, keep: bool) {
        for c in self.refs(s - 1).collect::<Vec<_>>() {
            let m = self.mask(c).not();
            self.visit(s, Node::Not(c), m, keep);
        }
        for a in 1..s - 1 {
            let b = s - 1 - a;
            if a <= b {
                for l in self.refs(a).collect::<Vec<_>>() {
                    for r in self.refs(b).collect::<Vec<_>>() {
                        if a == b && r.idx < l.idx {
                            continue;
                        }
                        let (ml, mr) = (self.mask(l), self.mask(r));
                        let (and, or) = (ml.and(mr), ml.or(mr));
                        self.visit(s, Node::And(l, r), and, keep);
                        self.visit(s, Node::Or(l, r), or, keep);
                    }
                }
            }
            for c in 1..b {
                let (t_size, e_size) = (c, b - c);
                for ci in self.refs(a).collect::<Vec<_>>() {
                    for ti in self.refs(t_size).collect::<Vec<_>>() {
                        for ei in self.refs(e_size).collect::<Vec<_>>() {
                            let m = self.mask(ci).select(self.mask(ti), self.mask(ei));
                            self.visit(s, Node::If(ci, ti, ei), m, keep);
                        }
                    }
                }
            }
        }
    }
}

/// Global minimizer of the energy over all boolean-rooted programs with at
/// most `max_nodes` nodes, using the same tie-breaking as annealing.
/// Leaves are the two constants, every boolean atom and every pooled
/// predicate under both comparators.
pub fn exhaustive_search(batch: &PerturbationBatch, max_nodes: usize, loss: &Loss) -> Result<ExplanationResult> {
    if max_nodes == 0 {
        return Err(Error::Invalid("max_nodes must be at least 1".into()));
    }
    let grammar = Grammar::new(batch.schema(), false);
    let mut leaves = vec![Expr::BoolConst(false), Expr::BoolConst(true)];
    leaves.extend(grammar.atoms().iter().map(|a| Expr::BoolAtom(*a)));
    leaves.extend(grammar.predicate_leaves().into_iter().map(Expr::Predicate));
    let count = search_space_size(leaves.len(), max_nodes);
    if count > EXHAUSTIVE_LIMIT {
        return Err(Error::SpaceTooLarge { count, limit: EXHAUSTIVE_LIMIT });
    }

    let objective = Objective::new(batch, loss.clone(), max_nodes);
    let mut search = Search {
        objective: &objective,
        schema: batch.schema(),
        leaves,
        layers: vec![Vec::new(); max_nodes + 1],
        cache: HashMap::new(),
        best: None,
        visited: 0,
    };
    for i in 0..search.leaves.len() {
        let m = objective.leaf_mask(&search.leaves[i]);
        search.visit(1, Node::Leaf(i as u32), m, max_nodes > 1);
    }
    for s in 2..=max_nodes {
        search.grow_layer(s, s < max_nodes);
    }
    debug_assert_eq!(search.visited as u128, count);

    let (energy, node_count, program) = search.best.take().expect("at least one leaf");
    let score = objective.score_of_mask(&objective.predict(&program));
    Ok(ExplanationResult {
        program,
        score,
        energy,
        node_count,
        chain_id: 0,
        seed: 0,
        iterations_used: search.visited,
        trace: vec![],
    })
}
