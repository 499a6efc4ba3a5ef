//! Workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use progex_core::expr::predict;
use progex_core::perturb::PerturbationBatch;
use progex_core::{parse, Expr, FeatureSchema, Instance};

const NAMES: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

/// Uniform boolean samples over `features` columns labelled by `rule`,
/// with random weights and the anchor first.
pub fn boolean_batch(features: usize, samples: usize, rule: &str, seed: u64) -> PerturbationBatch {
    let schema = FeatureSchema::booleans(&NAMES[..features]).expect("valid names");
    let truth = parse(rule, &schema).expect("rule parses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Instance> = (0..samples)
        .map(|_| Instance::from_bools(&(0..features).map(|_| rng.gen()).collect::<Vec<_>>()))
        .collect();
    let labels = rows.iter().map(|x| predict(&truth, x)).collect();
    let weights = (0..samples).map(|i| if i == 0 { 1.0 } else { rng.gen_range(0.1..1.0) }).collect();
    PerturbationBatch::new(schema, rows, weights, labels).expect("consistent batch")
}

/// A seven-node program over the first four features.
pub fn seven_node_program(schema: &FeatureSchema) -> Expr {
    parse("(A and not B) or (C and D)", schema).expect("program parses")
}
