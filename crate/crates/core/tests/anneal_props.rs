use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progex_core::anneal::{
    anneal, anneal_with, exhaustive_search, initial_program, propose, run_chain, Grammar, InducerConfig, Objective,
    ProposalMix,
};
use progex_core::expr::{predict, type_of, Mask};
use progex_core::loss::{Loss, LossFunction};
use progex_core::perturb::PerturbationBatch;
use progex_core::{parse, Expr, Feature, FeatureSchema, Instance, Type};

fn batch(n: usize, seed: u64, rule: impl Fn(&[bool]) -> bool) -> PerturbationBatch {
    let schema = FeatureSchema::booleans(&["A", "B", "C", "D"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<bool>> = (0..n).map(|_| (0..4).map(|_| rng.gen()).collect()).collect();
    let labels = rows.iter().map(|r| rule(r)).collect();
    let weights = (0..n).map(|i| if i == 0 { 1.0 } else { rng.gen_range(0.2..1.0) }).collect();
    let samples = rows.iter().map(|r| Instance::from_bools(r)).collect();
    PerturbationBatch::new(schema, samples, weights, labels).unwrap()
}

fn quick() -> InducerConfig {
    InducerConfig { iterations: 8000, restarts: 3, ..InducerConfig::default() }
}

#[test]
fn proposals_stay_well_typed_and_boolean() {
    let schema = FeatureSchema::new(vec![
        Feature::boolean("A"),
        Feature::numeric("X", vec![1.0, 2.5]),
        Feature::categorical("C", ["p", "q", "r"]),
    ])
    .unwrap();
    let g = Grammar::new(&schema, false);
    let mix = ProposalMix::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut e = Expr::BoolConst(false);
    for _ in 0..10_000 {
        e = propose(&e, &g, &mix, &mut rng);
        assert_eq!(type_of(&e, &schema).unwrap(), Type::Bool);
        if e.node_count() > 12 {
            e = Expr::BoolConst(true);
        }
    }
}

#[test]
fn arithmetic_proposals_type_check() {
    let schema = FeatureSchema::new(vec![Feature::boolean("A"), Feature::numeric("X", vec![1.0])]).unwrap();
    let g = Grammar::new(&schema, true);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut e = Expr::BoolConst(false);
    let mut saw_arith = false;
    for _ in 0..10_000 {
        e = propose(&e, &g, &ProposalMix::default(), &mut rng);
        type_of(&e, &schema).unwrap();
        saw_arith |= matches!(e, Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..));
        if e.node_count() > 12 {
            e = Expr::BoolConst(true);
        }
    }
    assert!(saw_arith);
}

#[test]
fn recovers_a_planted_program() {
    let b = batch(1000, 1, |r| r[0] && !r[1]);
    let target = parse("A and not B", b.schema()).unwrap();
    let res = anneal(&b, &quick()).unwrap();
    assert_eq!(res.score, 1.0);
    for m in 0..16usize {
        let x = Instance::from_bools(&(0..4).map(|j| m >> j & 1 == 1).collect::<Vec<_>>());
        assert_eq!(predict(&res.program, &x), predict(&target, &x));
    }
}

#[test]
fn best_energy_never_increases() {
    let b = batch(400, 2, |r| (r[0] || r[2]) && !r[3]);
    let cfg = quick();
    let objective = Objective::new(&b, Loss::default(), cfg.max_nodes);
    let g = Grammar::new(b.schema(), false);
    let out = run_chain(&objective, &g, initial_program(&b), &cfg, 0, &mut |_| {});
    assert!(out.trace.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 < w[0].1));
    assert_eq!(out.trace.last().unwrap().1, out.best_energy);
    assert_eq!(objective.energy(&out.best), out.best_energy);
}

#[test]
fn chains_respect_the_node_cap() {
    let b = batch(300, 3, |r| r[0] ^ r[1] ^ r[2]);
    let cfg = InducerConfig { max_nodes: 5, ..quick() };
    let objective = Objective::new(&b, Loss::default(), cfg.max_nodes);
    let g = Grammar::new(b.schema(), false);
    let mut worst = 0;
    run_chain(&objective, &g, initial_program(&b), &cfg, 1, &mut |s| {
        if s.accepted {
            worst = worst.max(s.node_count);
        }
    });
    assert!(worst <= 5);
}

#[test]
fn never_beats_the_exhaustive_optimum() {
    for seed in 0..4 {
        let b = batch(300, 10 + seed, |r| (r[0] && r[1]) || (r[2] && !r[3]));
        let best = exhaustive_search(&b, 5, &Loss::default()).unwrap();
        let cfg = InducerConfig { max_nodes: 5, ..quick() };
        let found = anneal(&b, &cfg).unwrap();
        assert!(found.energy >= best.energy - 1e-12, "{} < {}", found.energy, best.energy);
    }
}

#[test]
fn same_seed_same_result() {
    let b = batch(500, 4, |r| r[1] || r[3]);
    assert_eq!(anneal(&b, &quick()).unwrap(), anneal(&b, &quick()).unwrap());
}

/// Penalizes only false positives.
struct FalsePositives;

impl LossFunction for FalsePositives {
    fn name(&self) -> &str {
        "false-positives"
    }

    fn loss(&self, labels: &Mask, predictions: &Mask, weights: &[f64]) -> f64 {
        let fp = predictions.and(&labels.not());
        (0..fp.len()).filter(|&i| fp.get(i)).map(|i| weights[i]).sum()
    }
}

#[test]
fn custom_loss_drives_the_search() {
    let b = batch(300, 5, |r| r[0] && r[1]);
    let res = anneal_with(&b, &quick(), &Loss::new(FalsePositives)).unwrap();
    assert_eq!(res.energy, 0.0);
    assert!(res.node_count <= quick().max_nodes);
    let zero_one = anneal(&b, &InducerConfig { loss: "weighted-01".into(), ..quick() }).unwrap();
    assert_eq!(zero_one.energy, 0.0);
    assert_eq!(zero_one.score, 1.0);
}

#[test]
fn unanimous_labels_short_circuit() {
    let b = batch(100, 6, |_| true);
    let res = anneal(&b, &quick()).unwrap();
    assert_eq!(res.program, Expr::BoolConst(true));
    assert_eq!(res.iterations_used, 0);
}
