use std::sync::atomic::{AtomicUsize, Ordering};

use progex_core::model::BlackBox;
use progex_core::perturb::{Binarizer, KernelConfig, PerturbationBatch};
use progex_core::{Feature, FeatureId, FeatureSchema, Instance, ModelError};

/// Labels by `A xor (X > 5)` and counts how often it is asked.
#[derive(Default)]
struct Counting {
    calls: AtomicUsize,
    rows: AtomicUsize,
}

impl BlackBox for Counting {
    fn kind(&self) -> &'static str {
        "counting"
    }

    fn predict_batch(&self, batch: &[Instance]) -> Result<Vec<f64>, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.rows.fetch_add(batch.len(), Ordering::SeqCst);
        Ok(batch.iter().map(|x| f64::from(u8::from((x.get(FeatureId(0)) == 1.0) != (x.get(FeatureId(1)) > 5.0)))).collect())
    }
}

fn setup() -> (FeatureSchema, Vec<Instance>) {
    let schema = FeatureSchema::new(vec![
        Feature::boolean("A"),
        Feature::numeric("X", vec![]),
        Feature::categorical("C", ["r", "g", "b"]),
    ])
    .unwrap();
    let data = (0..400).map(|i| Instance::new(vec![(i % 2) as f64, (i % 11) as f64, (i % 3) as f64])).collect();
    (schema, data)
}

fn batch(model: &dyn BlackBox, seed: u64, n: usize) -> PerturbationBatch {
    let (schema, data) = setup();
    let b = Binarizer::fit(&schema, &data).unwrap();
    let x = Instance::new(vec![1.0, 7.0, 2.0]);
    PerturbationBatch::generate(model, &b, &x, n, seed, KernelConfig::default_for(&b)).unwrap()
}

#[test]
fn model_is_queried_once_per_batch() {
    let m = Counting::default();
    let b = batch(&m, 3, 1000);
    assert_eq!(m.calls.load(Ordering::SeqCst), 1);
    assert_eq!(m.rows.load(Ordering::SeqCst), 1000);
    assert_eq!(b.len(), 1000);
    // labels are cached, not recomputed
    let _ = (b.labels(), b.label_mask(), b.anchor_label());
    assert_eq!(m.calls.load(Ordering::SeqCst), 1);
}

#[test]
fn sampling_is_seed_deterministic() {
    let m = Counting::default();
    let (a, b, c) = (batch(&m, 11, 300), batch(&m, 11, 300), batch(&m, 12, 300));
    assert_eq!(a.samples(), b.samples());
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.labels(), b.labels());
    assert_ne!(a.samples(), c.samples());
}

#[test]
fn anchor_comes_first_with_unit_weight() {
    let b = batch(&Counting::default(), 5, 200);
    assert_eq!(b.samples()[0], Instance::new(vec![1.0, 7.0, 2.0]));
    assert_eq!(b.weights()[0], 1.0);
    assert!(b.weights().iter().all(|&w| w > 0.0 && w <= 1.0));
    assert!(b.anchor_label() == b.labels()[0]);
}

#[test]
fn fair_boolean_keeps_anchor_value_three_times_in_four() {
    let b = batch(&Counting::default(), 2024, 10_000);
    let same = b.samples().iter().filter(|z| z.get(FeatureId(0)) == 1.0).count() as f64 / b.len() as f64;
    assert!((0.70..=0.80).contains(&same), "{same}");
}

#[test]
fn csv_round_trip() {
    let b = batch(&Counting::default(), 9, 50);
    let mut buf = Vec::new();
    b.write_csv(&mut buf).unwrap();
    let back = PerturbationBatch::read_csv(b.schema(), buf.as_slice()).unwrap();
    assert_eq!(back.samples(), b.samples());
    assert_eq!(back.weights(), b.weights());
    assert_eq!(back.labels(), b.labels());
}
