//! Bit-parallel evaluation of a program over a fixed set of samples.

use std::collections::HashMap;

use super::{Comparator, Expr, Predicate, Type};
use crate::schema::{AtomRef, FeatureId, FeatureSchema, Instance};

/// Fixed-length bitset; bit `i` is sample `i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    words: Vec<u64>,
    len: usize,
}

impl Mask {
    pub fn zeros(len: usize) -> Self {
        Mask { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Mask { words: vec![u64::MAX; len.div_ceil(64)], len };
        m.clear_tail();
        m
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut m = Mask::zeros(len);
        for i in 0..len {
            if f(i) {
                m.set(i);
            }
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Mask::from_fn(bits.len(), |i| bits[i])
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip(other, |a, b| a | b)
    }

    pub fn not(&self) -> Mask {
        let mut m = Mask { words: self.words.iter().map(|w| !w).collect(), len: self.len };
        m.clear_tail();
        m
    }

    /// `self ? then : otherwise`, bitwise.
    pub fn select(&self, then: &Mask, otherwise: &Mask) -> Mask {
        let mut m = Mask {
            words: self
                .words
                .iter()
                .zip(then.words.iter().zip(&otherwise.words))
                .map(|(c, (t, f))| (c & t) | (!c & f))
                .collect(),
            len: self.len,
        };
        m.clear_tail();
        m
    }

    fn zip(&self, other: &Mask, f: impl Fn(u64, u64) -> u64) -> Mask {
        debug_assert_eq!(self.len, other.len);
        Mask { words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(), len: self.len }
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

/// Evaluates programs over a fixed sample set. Atom and pooled-predicate
/// masks are computed once up front.
#[derive(Debug)]
pub struct BatchEvaluator<'a> {
    samples: &'a [Instance],
    atoms: HashMap<AtomRef, Mask>,
    predicates: HashMap<(FeatureId, u64), Mask>,
}

impl<'a> BatchEvaluator<'a> {
    pub fn new(schema: &FeatureSchema, samples: &'a [Instance]) -> Self {
        let n = samples.len();
        let atoms = schema
            .bool_atoms()
            .into_iter()
            .map(|a| (a, Mask::from_fn(n, |i| samples[i].atom(a))))
            .collect();
        let mut predicates = HashMap::new();
        for id in schema.predicate_features() {
            for &t in &schema.feature(id).thresholds {
                predicates.insert((id, t.to_bits()), Mask::from_fn(n, |i| samples[i].get(id) > t));
            }
        }
        BatchEvaluator { samples, atoms, predicates }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Instance] {
        self.samples
    }

    /// Predictions of a well-typed program on every sample.
    pub fn predict(&self, e: &Expr) -> Mask {
        match e.result_type() {
            Type::Bool => self.mask(e),
            Type::Real => {
                let values = self.reals(e);
                Mask::from_fn(values.len(), |i| values[i] > 0.0)
            }
        }
    }

    fn predicate(&self, p: &Predicate) -> Mask {
        let gt = match self.predicates.get(&(p.feature, p.threshold.to_bits())) {
            Some(m) => m.clone(),
            None => Mask::from_fn(self.len(), |i| self.samples[i].get(p.feature) > p.threshold),
        };
        match p.comparator {
            Comparator::Gt => gt,
            Comparator::Le => gt.not(),
        }
    }

    fn mask(&self, e: &Expr) -> Mask {
        let n = self.len();
        match e {
            Expr::BoolConst(true) => Mask::ones(n),
            Expr::BoolConst(false) => Mask::zeros(n),
            Expr::BoolAtom(a) => match self.atoms.get(a) {
                Some(m) => m.clone(),
                None => Mask::from_fn(n, |i| self.samples[i].atom(*a)),
            },
            Expr::Predicate(p) => self.predicate(p),
            Expr::Not(c) => self.mask(c).not(),
            Expr::And(l, r) => self.mask(l).and(&self.mask(r)),
            Expr::Or(l, r) => self.mask(l).or(&self.mask(r)),
            Expr::If(c, t, f) => self.mask(c).select(&self.mask(t), &self.mask(f)),
            // real-typed node in boolean position: ill-typed, fall back to truthiness
            _ => {
                let values = self.reals(e);
                Mask::from_fn(n, |i| values[i] > 0.0)
            }
        }
    }

    fn reals(&self, e: &Expr) -> Vec<f64> {
        let n = self.len();
        let zip = |l: &Expr, r: &Expr, f: fn(f64, f64) -> f64| {
            let (a, b) = (self.reals(l), self.reals(r));
            a.into_iter().zip(b).map(|(x, y)| f(x, y)).collect()
        };
        match e {
            Expr::RealConst(v) => vec![*v; n],
            Expr::RealAtom(id) => self.samples.iter().map(|x| x.get(*id)).collect(),
            Expr::Add(l, r) => zip(l, r, |x, y| x + y),
            Expr::Sub(l, r) => zip(l, r, |x, y| x - y),
            Expr::Mul(l, r) => zip(l, r, |x, y| x * y),
            Expr::If(c, t, f) => {
                let (c, t, f) = (self.mask(c), self.reals(t), self.reals(f));
                (0..n).map(|i| if c.get(i) { t[i] } else { f[i] }).collect()
            }
            _ => {
                let m = self.mask(e);
                (0..n).map(|i| f64::from(u8::from(m.get(i)))).collect()
            }
        }
    }
}
