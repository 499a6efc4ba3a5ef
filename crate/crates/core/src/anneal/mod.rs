//! Simulated annealing over expression trees, plus an exhaustive oracle.

mod exhaustive;
mod propose;

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{pretty_print, BatchEvaluator, Expr, Mask, Type};
use crate::loss::{Confusion, Loss};
use crate::perturb::PerturbationBatch;

pub use exhaustive::{exhaustive_search, search_space_size, EXHAUSTIVE_LIMIT};
pub use propose::{apply_move, propose, Grammar, Move, ProposalMix};

/// Search settings. Serializes as a flat key/value object so it can double
/// as a config file; missing keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InducerConfig {
    pub max_nodes: usize,
    pub iterations: usize,
    pub initial_temperature: f64,
    pub restarts: usize,
    pub seed: u64,
    pub proposal_mix: ProposalMix,
    /// Allow `+ - *` and real-valued roots in the search grammar.
    pub arithmetic: bool,
    pub loss: String,
}

impl Default for InducerConfig {
    fn default() -> Self {
        InducerConfig {
            max_nodes: 7,
            iterations: 50_000,
            initial_temperature: 1.0,
            restarts: 8,
            seed: 0,
            proposal_mix: ProposalMix::default(),
            arithmetic: false,
            loss: "weighted-f1".into(),
        }
    }
}

impl InducerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_nodes == 0 {
            return Err(Error::Invalid("max_nodes must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Invalid("iterations must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Invalid("restarts must be at least 1".into()));
        }
        if !(self.initial_temperature.is_finite() && self.initial_temperature > 0.0) {
            return Err(Error::Invalid(format!("initial temperature must be positive, got {}", self.initial_temperature)));
        }
        if !self.proposal_mix.is_valid() {
            return Err(Error::Invalid("proposal probabilities must be non-negative and sum to 1".into()));
        }
        Loss::by_name(&self.loss)?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: InducerConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The induced program and how it was found.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplanationResult {
    pub program: Expr,
    /// Weighted F1 of the program, oriented to the anchor's class.
    pub score: f64,
    pub energy: f64,
    pub node_count: usize,
    pub chain_id: usize,
    pub seed: u64,
    pub iterations_used: usize,
    /// `(iteration, energy)` each time the winning chain improved its best.
    pub trace: Vec<(usize, f64)>,
}

/// Energy of programs on one batch: loss below the node cap, infinite above.
pub struct Objective<'a> {
    schema: &'a crate::FeatureSchema,
    eval: BatchEvaluator<'a>,
    labels: Mask,
    flip: bool,
    weights: &'a [f64],
    loss: Loss,
    max_nodes: usize,
}

impl<'a> Objective<'a> {
    pub fn new(batch: &'a PerturbationBatch, loss: Loss, max_nodes: usize) -> Self {
        let flip = !batch.anchor_label();
        let labels = if flip { batch.label_mask().not() } else { batch.label_mask() };
        Objective {
            schema: batch.schema(),
            eval: BatchEvaluator::new(batch.schema(), batch.samples()),
            labels,
            flip,
            weights: batch.weights(),
            loss,
            max_nodes,
        }
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn predict(&self, p: &Expr) -> Mask {
        self.eval.predict(p)
    }

    pub(crate) fn leaf_mask(&self, p: &Expr) -> Mask {
        self.eval.predict(p)
    }

    /// Loss of raw (unoriented) predictions.
    pub fn energy_of_mask(&self, preds: &Mask) -> f64 {
        if self.flip {
            self.loss.eval(&self.labels, &preds.not(), self.weights)
        } else {
            self.loss.eval(&self.labels, preds, self.weights)
        }
    }

    pub fn score_of_mask(&self, preds: &Mask) -> f64 {
        let preds = if self.flip { preds.not() } else { preds.clone() };
        Confusion::from_masks(&self.labels, &preds, self.weights).f1()
    }

    pub fn energy(&self, p: &Expr) -> f64 {
        if p.node_count() > self.max_nodes {
            f64::INFINITY
        } else {
            self.energy_of_mask(&self.predict(p))
        }
    }
}

/// `loss_of(batch, p)` below the node cap, `+inf` above it.
pub fn energy(p: &Expr, batch: &PerturbationBatch, cfg: &InducerConfig) -> Result<f64> {
    crate::expr::type_of(p, batch.schema())?;
    Ok(Objective::new(batch, Loss::by_name(&cfg.loss)?, cfg.max_nodes).energy(p))
}

/// Constant program predicting the weight-majority label; ties go to the
/// anchor's label.
pub fn initial_program(batch: &PerturbationBatch) -> Expr {
    let (mut pos, mut neg) = (0.0, 0.0);
    for (&l, &w) in batch.labels().iter().zip(batch.weights()) {
        if l {
            pos += w;
        } else {
            neg += w;
        }
    }
    Expr::BoolConst(match pos.partial_cmp(&neg) {
        Some(Ordering::Greater) => true,
        Some(Ordering::Less) => false,
        _ => batch.anchor_label(),
    })
}

/// Total order used to pick among equally good programs.
pub(crate) fn better(a: (f64, usize, &Expr), b: (f64, usize, &Expr), schema: &crate::FeatureSchema) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => pretty_print(a.2, schema) < pretty_print(b.2, schema),
    }
}

/// One step of a chain, as seen by an observer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Step {
    pub iteration: usize,
    pub node_count: usize,
    pub energy: f64,
    pub accepted: bool,
    /// Candidate rejected by the node cap before evaluation.
    pub gated: bool,
}

#[derive(Clone, Debug)]
pub struct ChainOutcome {
    pub chain_id: usize,
    pub best: Expr,
    pub best_energy: f64,
    pub trace: Vec<(usize, f64)>,
}

/// Seed of chain `chain_id`, derived from the run seed.
pub fn chain_seed(seed: u64, chain_id: usize) -> u64 {
    let mut z = seed.wrapping_add((chain_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Temperature at 1-based step `k`.
pub fn temperature(t0: f64, k: usize) -> f64 {
    t0 / (k as f64 + std::f64::consts::E).ln()
}

/// Runs a single annealing chain, reporting every step to `observer`.
pub fn run_chain(
    objective: &Objective<'_>,
    grammar: &Grammar,
    start: Expr,
    cfg: &InducerConfig,
    chain_id: usize,
    observer: &mut dyn FnMut(&Step),
) -> ChainOutcome {
    let schema = objective.schema;
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed(cfg.seed, chain_id));
    let mut state = start;
    let mut e_state = objective.energy(&state);
    let mut best = state.clone();
    let mut e_best = e_state;
    let mut trace = vec![(0, e_best)];
    for k in 1..=cfg.iterations {
        let t = temperature(cfg.initial_temperature, k);
        let cand = propose(&state, grammar, &cfg.proposal_mix, &mut rng);
        let nodes = cand.node_count();
        if nodes > cfg.max_nodes {
            observer(&Step { iteration: k, node_count: nodes, energy: f64::INFINITY, accepted: false, gated: true });
            continue;
        }
        let e_cand = objective.energy(&cand);
        let accept = e_cand <= e_state || rng.gen::<f64>() < (-(e_cand - e_state) / t).exp();
        observer(&Step { iteration: k, node_count: nodes, energy: e_cand, accepted: accept, gated: false });
        if accept {
            state = cand;
            e_state = e_cand;
            if better((e_state, nodes, &state), (e_best, best.node_count(), &best), schema) {
                if e_state < e_best {
                    trace.push((k, e_state));
                }
                best = state.clone();
                e_best = e_state;
            }
        }
    }
    ChainOutcome { chain_id, best, best_energy: e_best, trace }
}

/// Minimizes loss plus the node gate over programs for this batch. Chains
/// run in parallel; the winner is chosen in chain order so results depend
/// only on the batch and the config.
pub fn anneal(batch: &PerturbationBatch, cfg: &InducerConfig) -> Result<ExplanationResult> {
    cfg.validate()?;
    anneal_with(batch, cfg, &Loss::by_name(&cfg.loss)?)
}

/// As [`anneal`], with an explicit loss in place of `cfg.loss`.
pub fn anneal_with(batch: &PerturbationBatch, cfg: &InducerConfig, loss: &Loss) -> Result<ExplanationResult> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let objective = Objective::new(batch, loss.clone(), cfg.max_nodes);
    let first = batch.labels()[0];
    if batch.labels().iter().all(|&l| l == first) {
        let program = Expr::BoolConst(first);
        let preds = objective.predict(&program);
        return Ok(ExplanationResult {
            score: objective.score_of_mask(&preds),
            energy: objective.energy_of_mask(&preds),
            node_count: 1,
            program,
            chain_id: 0,
            seed: cfg.seed,
            iterations_used: 0,
            trace: vec![],
        });
    }
    let grammar = Grammar::new(batch.schema(), cfg.arithmetic);
    let start = initial_program(batch);
    let outcomes: Vec<ChainOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|id| run_chain(&objective, &grammar, start.clone(), cfg, id, &mut |_| {}))
        .collect();
    let schema = batch.schema();
    let mut winner = &outcomes[0];
    for o in &outcomes[1..] {
        if better(
            (o.best_energy, o.best.node_count(), &o.best),
            (winner.best_energy, winner.best.node_count(), &winner.best),
            schema,
        ) {
            winner = o;
        }
    }
    let preds = objective.predict(&winner.best);
    debug_assert!(winner.best.result_type() == Type::Bool || cfg.arithmetic);
    Ok(ExplanationResult {
        program: winner.best.clone(),
        score: objective.score_of_mask(&preds),
        energy: winner.best_energy,
        node_count: winner.best.node_count(),
        chain_id: winner.chain_id,
        seed: cfg.seed,
        iterations_used: cfg.iterations * cfg.restarts,
        trace: winner.trace.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;
    use crate::schema::{FeatureSchema, Instance};

    fn batch(names: &[&str], n: usize, rule: impl Fn(&[bool]) -> bool, seed: u64) -> PerturbationBatch {
        let schema = FeatureSchema::booleans(names).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let bits: Vec<bool> = (0..names.len()).map(|_| rng.gen()).collect();
            samples.push(Instance::from_bools(&bits));
        }
        let labels = samples.iter().map(|s| rule(&s.values().iter().map(|&v| v == 1.0).collect::<Vec<_>>())).collect();
        let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        weights[0] = 1.0;
        PerturbationBatch::new(schema, samples, weights, labels).unwrap()
    }

    #[test]
    fn temperature_decreases_from_t0() {
        assert!((temperature(1.0, 0) - 1.0).abs() < 1e-15);
        assert!(temperature(1.0, 1) < 1.0);
        assert!(temperature(1.0, 1000) < temperature(1.0, 10));
    }

    #[test]
    fn energy_gate() {
        let b = batch(&["A", "B", "C", "D"], 50, |x| x[0], 1);
        let cfg = InducerConfig::default();
        let big = and(and(var(0), var(1)), and(var(2), not(var(3))));
        assert_eq!(big.node_count(), 8);
        assert_eq!(energy(&big, &b, &cfg).unwrap(), f64::INFINITY);
        assert_eq!(energy(&var(0), &b, &cfg).unwrap(), -1.0);
    }

    #[test]
    fn initial_program_majority_and_tie() {
        let s = FeatureSchema::booleans(&["A"]).unwrap();
        let x = vec![Instance::from_bools(&[true]), Instance::from_bools(&[false])];
        let tie = PerturbationBatch::new(s.clone(), x.clone(), vec![1.0, 1.0], vec![false, true]).unwrap();
        assert_eq!(initial_program(&tie), Expr::BoolConst(false));
        let heavy = PerturbationBatch::new(s, x, vec![1.0, 0.5], vec![true, false]).unwrap();
        assert_eq!(initial_program(&heavy), Expr::BoolConst(true));
    }

    #[test]
    fn constant_labels_short_circuit() {
        let b = batch(&["A", "B"], 20, |_| true, 2);
        let r = anneal(&b, &InducerConfig::default()).unwrap();
        assert_eq!(r.program, Expr::BoolConst(true));
        assert_eq!(r.score, 1.0);
        assert_eq!(r.iterations_used, 0);
    }

    #[test]
    fn finds_conjunction_quickly() {
        let b = batch(&["A", "B", "C"], 200, |x| x[0] && !x[1], 3);
        let cfg = InducerConfig { iterations: 5000, restarts: 4, ..Default::default() };
        let r = anneal(&b, &cfg).unwrap();
        assert_eq!(r.energy, -1.0);
        assert!(r.node_count <= 7);
        assert_eq!(r, anneal(&b, &cfg).unwrap());
    }

    #[test]
    fn config_round_trips_and_validates() {
        let cfg = InducerConfig::from_json_str(r#"{"max_nodes": 5, "seed": 9}"#).unwrap();
        assert_eq!(cfg.max_nodes, 5);
        assert_eq!(cfg.iterations, 50_000);
        assert!(InducerConfig::from_json_str(r#"{"restarts": 0}"#).is_err());
        assert!(InducerConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }
}
