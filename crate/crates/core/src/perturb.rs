//! Perturbation sampling around the explained instance.
//!
//! Every feature is viewed through a binary "interpretable" encoding:
//! booleans as one bit, categoricals one-hot over their levels, numerics
//! one-hot over quartile bins. Perturbations resample features from their
//! empirical marginals, and samples are weighted by an exponential kernel
//! on the fraction of interpretable bits that differ from the anchor.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, ModelError, Result};
use crate::expr::Mask;
use crate::model::BlackBox;
use crate::schema::{FeatureId, FeatureKind, FeatureSchema, Instance};

/// Probability that a feature is resampled rather than kept at the anchor's value.
pub const RESAMPLE_PROBABILITY: f64 = 0.5;
/// Quartile cut points used to bin numeric features.
pub const QUARTILES: [f64; 3] = [0.25, 0.50, 0.75];
pub const DEFAULT_SAMPLES: usize = 1000;

/// Percentile with linear interpolation between order statistics placed at
/// `(i - 0.5) / n` (the Hazen plotting position). `sorted` must be non-empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = n as f64 * p + 0.5;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let lo = h.floor();
    let frac = h - lo;
    let i = lo as usize - 1;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

#[derive(Clone, Debug, PartialEq)]
enum Group {
    Boolean { p_true: f64 },
    Categorical { freqs: Vec<f64> },
    Numeric { edges: Vec<f64>, min: f64, max: f64, freqs: Vec<f64> },
    /// Constant numeric column: never perturbed, contributes no bits.
    Degenerate,
}

impl Group {
    fn width(&self) -> usize {
        match self {
            Group::Boolean { .. } => 1,
            Group::Categorical { freqs } => freqs.len(),
            Group::Numeric { edges, .. } => edges.len() + 1,
            Group::Degenerate => 0,
        }
    }
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    edges.iter().take_while(|&&e| v > e).count()
}

/// The interpretable view of a schema, fitted to a data sample.
#[derive(Clone, Debug)]
pub struct Binarizer {
    schema: FeatureSchema,
    groups: Vec<Group>,
    degenerate: Vec<FeatureId>,
}

impl Binarizer {
    /// Fits quartile bins and empirical marginals. Quartile cut points are
    /// merged into each numeric feature's threshold pool.
    pub fn fit(schema: &FeatureSchema, data: &[Instance]) -> Result<Self> {
        let mut schema = schema.clone();
        let mut groups = Vec::with_capacity(schema.arity());
        let mut degenerate = Vec::new();
        for id in schema.ids() {
            let column: Vec<f64> = data.iter().map(|x| x.get(id)).collect();
            let kind = schema.feature(id).kind.clone();
            let group = match kind {
                FeatureKind::Boolean => {
                    let p_true = if column.is_empty() {
                        0.5
                    } else {
                        column.iter().filter(|&&v| v != 0.0).count() as f64 / column.len() as f64
                    };
                    Group::Boolean { p_true }
                }
                FeatureKind::Categorical { levels } => {
                    let freqs = if column.is_empty() {
                        vec![1.0 / levels.len() as f64; levels.len()]
                    } else {
                        let mut counts = vec![0usize; levels.len()];
                        for &v in &column {
                            if let Some(c) = counts.get_mut(v as usize) {
                                *c += 1;
                            }
                        }
                        counts.iter().map(|&c| c as f64 / column.len() as f64).collect()
                    };
                    Group::Categorical { freqs }
                }
                FeatureKind::Numeric => {
                    if column.is_empty() {
                        return Err(Error::Data(format!(
                            "numeric feature `{}` needs a data sample to bin",
                            schema.feature(id).name
                        )));
                    }
                    let mut sorted = column.clone();
                    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
                    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
                    if min == max {
                        degenerate.push(id);
                        Group::Degenerate
                    } else {
                        let mut edges: Vec<f64> = QUARTILES.iter().map(|&p| percentile(&sorted, p)).collect();
                        edges.dedup();
                        schema.extend_thresholds(id, &edges)?;
                        let mut counts = vec![0usize; edges.len() + 1];
                        for &v in &column {
                            counts[bin_of(&edges, v)] += 1;
                        }
                        let freqs = counts.iter().map(|&c| c as f64 / column.len() as f64).collect();
                        Group::Numeric { edges, min, max, freqs }
                    }
                }
            };
            groups.push(group);
        }
        Ok(Binarizer { schema, groups, degenerate })
    }

    /// The schema with quartile thresholds added to numeric pools.
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    /// Constant numeric features excluded from perturbation.
    pub fn degenerate(&self) -> &[FeatureId] {
        &self.degenerate
    }

    /// Quartile cut points of a numeric feature, if binned.
    pub fn edges(&self, id: FeatureId) -> Option<&[f64]> {
        match &self.groups[id.0] {
            Group::Numeric { edges, .. } => Some(edges),
            _ => None,
        }
    }

    /// Number of interpretable bits.
    pub fn width(&self) -> usize {
        self.groups.iter().map(Group::width).sum()
    }

    /// Interpretable bits of an instance.
    pub fn view(&self, x: &Instance) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.width());
        for (i, g) in self.groups.iter().enumerate() {
            let v = x.get(FeatureId(i));
            match g {
                Group::Boolean { .. } => out.push(v != 0.0),
                Group::Categorical { freqs } => out.extend((0..freqs.len()).map(|l| v == l as f64)),
                Group::Numeric { edges, .. } => {
                    let b = bin_of(edges, v);
                    out.extend((0..=edges.len()).map(|k| k == b));
                }
                Group::Degenerate => {}
            }
        }
        out
    }

    /// Fraction of interpretable bits where `z` differs from `x`.
    pub fn distance(&self, x: &Instance, z: &Instance) -> f64 {
        let (a, b) = (self.view(x), self.view(z));
        if a.is_empty() {
            return 0.0;
        }
        a.iter().zip(&b).filter(|(p, q)| p != q).count() as f64 / a.len() as f64
    }

    /// `n` perturbations of `x`; sample 0 is `x` itself.
    pub fn sample(&self, x: &Instance, n: usize, seed: u64) -> Result<Vec<Instance>> {
        self.schema.validate(x)?;
        if n == 0 {
            return Err(Error::Invalid("sample count must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        out.push(x.clone());
        for _ in 1..n {
            let mut z = x.values().to_vec();
            for (i, g) in self.groups.iter().enumerate() {
                if matches!(g, Group::Degenerate) || rng.gen::<f64>() >= RESAMPLE_PROBABILITY {
                    continue;
                }
                z[i] = match g {
                    Group::Boolean { p_true } => f64::from(u8::from(rng.gen::<f64>() < *p_true)),
                    Group::Categorical { freqs } => draw_index(freqs, &mut rng) as f64,
                    Group::Numeric { edges, min, max, freqs } => {
                        let b = draw_index(freqs, &mut rng);
                        let lo = if b == 0 { *min } else { edges[b - 1] };
                        let hi = if b == edges.len() { *max } else { edges[b] };
                        if hi > lo {
                            rng.gen_range(lo..=hi)
                        } else {
                            lo
                        }
                    }
                    Group::Degenerate => unreachable!(),
                };
            }
            out.push(Instance::new(z));
        }
        Ok(out)
    }
}

fn draw_index(freqs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = freqs.iter().sum();
    if total <= 0.0 {
        return rng.gen_range(0..freqs.len());
    }
    let mut r = rng.gen::<f64>() * total;
    for (i, &f) in freqs.iter().enumerate() {
        if r < f {
            return i;
        }
        r -= f;
    }
    freqs.iter().rposition(|&f| f > 0.0).unwrap_or(0)
}

/// Width of the exponential proximity kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    pub width: f64,
}

impl KernelConfig {
    pub fn new(width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Invalid(format!("kernel width must be positive, got {width}")));
        }
        Ok(KernelConfig { width })
    }

    /// `0.75 * sqrt(width of the interpretable view)`.
    pub fn default_for(binarizer: &Binarizer) -> Self {
        KernelConfig { width: 0.75 * (binarizer.width().max(1) as f64).sqrt() }
    }

    pub fn weight(&self, distance: f64) -> f64 {
        (-(distance * distance) / (self.width * self.width)).exp()
    }
}

/// `exp(-d^2 / width^2)` per sample, `d` the normalized Hamming distance to `x`.
pub fn proximity_weights(binarizer: &Binarizer, x: &Instance, samples: &[Instance], kernel: KernelConfig) -> Vec<f64> {
    samples.iter().map(|z| kernel.weight(binarizer.distance(x, z))).collect()
}

/// Queries the black box once for the whole batch and checks the answers.
pub fn label_batch(model: &dyn BlackBox, samples: &[Instance]) -> Result<Vec<bool>, ModelError> {
    let raw = model.predict_batch(samples)?;
    if raw.len() != samples.len() {
        return Err(ModelError::Protocol(format!("{} labels for {} instances", raw.len(), samples.len())));
    }
    raw.iter()
        .enumerate()
        .map(|(index, &value)| {
            if value == 1.0 {
                Ok(true)
            } else if value == 0.0 {
                Ok(false)
            } else {
                Err(ModelError::NonBinary { index, value })
            }
        })
        .collect()
}

/// The samples an explanation is fitted on: perturbations, their proximity
/// weights and their cached black-box labels. Sample 0 is the anchor.
#[derive(Clone, Debug)]
pub struct PerturbationBatch {
    schema: FeatureSchema,
    samples: Vec<Instance>,
    weights: Vec<f64>,
    labels: Vec<bool>,
}

impl PerturbationBatch {
    pub fn new(schema: FeatureSchema, samples: Vec<Instance>, weights: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Invalid("empty perturbation batch".into()));
        }
        if samples.len() != weights.len() || samples.len() != labels.len() {
            return Err(Error::Invalid(format!(
                "batch length mismatch: {} samples, {} weights, {} labels",
                samples.len(),
                weights.len(),
                labels.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
            return Err(Error::Invalid(format!("weight {w} outside (0, 1]")));
        }
        if weights[0] != 1.0 {
            return Err(Error::Invalid("anchor weight must be exactly 1".into()));
        }
        for x in &samples {
            schema.validate(x)?;
        }
        Ok(PerturbationBatch { schema, samples, weights, labels })
    }

    /// Samples around `x`, weights them and labels them with one batched query.
    pub fn generate(
        model: &dyn BlackBox,
        binarizer: &Binarizer,
        x: &Instance,
        n: usize,
        seed: u64,
        kernel: KernelConfig,
    ) -> Result<Self> {
        let samples = binarizer.sample(x, n, seed)?;
        let labels = label_batch(model, &samples)?;
        let weights = proximity_weights(binarizer, x, &samples, kernel);
        Self::new(binarizer.schema().clone(), samples, weights, labels)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn samples(&self) -> &[Instance] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn label_mask(&self) -> Mask {
        Mask::from_bools(&self.labels)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn anchor(&self) -> &Instance {
        &self.samples[0]
    }

    pub fn anchor_label(&self) -> bool {
        self.labels[0]
    }

    /// Same samples and labels under a different (e.g. extended) schema.
    pub fn with_schema(self, schema: FeatureSchema) -> Result<Self> {
        Self::new(schema, self.samples, self.weights, self.labels)
    }

    /// Writes the batch as CSV: one column per feature, then `weight`, `label`.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.schema.features().iter().map(|f| f.name.clone()).collect();
        header.push("weight".into());
        header.push("label".into());
        w.write_record(&header)?;
        for ((x, weight), label) in self.samples.iter().zip(&self.weights).zip(&self.labels) {
            let mut row: Vec<String> = self.schema.ids().map(|id| self.schema.display_value(id, x.get(id))).collect();
            row.push(format!("{weight}"));
            row.push(if *label { "1" } else { "0" }.into());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a batch written by [`write_csv`](Self::write_csv).
    pub fn read_csv(schema: &FeatureSchema, input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let k = schema.arity();
        if header.len() != k + 2 {
            return Err(Error::Data(format!("batch has {} columns, expected {}", header.len(), k + 2)));
        }
        for (f, h) in schema.features().iter().zip(header.iter()) {
            if f.name != h {
                return Err(Error::Data(format!("batch column `{h}` does not match feature `{}`", f.name)));
            }
        }
        let (mut samples, mut weights, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for record in r.records() {
            let record = record?;
            let values = schema
                .ids()
                .map(|id| schema.parse_value(id, &record[id.0]))
                .collect::<Result<Vec<f64>>>()?;
            samples.push(Instance::new(values));
            weights.push(
                record[k].trim().parse::<f64>().map_err(|_| Error::Data(format!("bad weight `{}`", &record[k])))?,
            );
            labels.push(match record[k + 1].trim() {
                "1" => true,
                "0" => false,
                other => return Err(Error::Data(format!("bad label `{other}`"))),
            });
        }
        Self::new(schema.clone(), samples, weights, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;

    #[test]
    fn hazen_quartiles_on_eight_points() {
        let data: Vec<f64> = (2..=9).map(|v| v as f64 * 10.0).collect();
        let q: Vec<f64> = QUARTILES.iter().map(|&p| percentile(&data, p)).collect();
        assert_eq!(q, vec![35.0, 55.0, 75.0]);
    }

    #[test]
    fn binarize_numeric_feature() {
        let schema = FeatureSchema::new(vec![Feature::numeric("Age", vec![])]).unwrap();
        let data: Vec<Instance> = (2..=9).map(|v| Instance::new(vec![v as f64 * 10.0])).collect();
        let b = Binarizer::fit(&schema, &data).unwrap();
        assert_eq!(b.edges(FeatureId(0)).unwrap(), &[35.0, 55.0, 75.0]);
        assert_eq!(b.schema().feature(FeatureId(0)).thresholds, vec![35.0, 55.0, 75.0]);
        assert_eq!(b.width(), 4);
        assert_eq!(b.view(&Instance::new(vec![35.0])), vec![true, false, false, false]);
        assert_eq!(b.view(&Instance::new(vec![90.0])), vec![false, false, false, true]);
    }

    #[test]
    fn binarize_boolean_and_categorical() {
        let schema =
            FeatureSchema::new(vec![Feature::boolean("A"), Feature::categorical("Color", ["red", "green"])]).unwrap();
        let b = Binarizer::fit(&schema, &[]).unwrap();
        assert_eq!(b.width(), 3);
        assert_eq!(b.view(&Instance::new(vec![1.0, 1.0])), vec![true, false, true]);
        for z in b.sample(&Instance::new(vec![0.0, 0.0]), 200, 3).unwrap() {
            let bits = b.view(&z);
            assert_eq!(bits[1..].iter().filter(|&&x| x).count(), 1);
        }
    }

    #[test]
    fn constant_numeric_is_degenerate() {
        let schema = FeatureSchema::new(vec![Feature::numeric("K", vec![]), Feature::boolean("A")]).unwrap();
        let data = vec![Instance::new(vec![3.0, 0.0]), Instance::new(vec![3.0, 1.0])];
        let b = Binarizer::fit(&schema, &data).unwrap();
        assert_eq!(b.degenerate(), &[FeatureId(0)]);
        assert_eq!(b.width(), 1);
        let x = Instance::new(vec![3.0, 1.0]);
        assert!(b.sample(&x, 50, 1).unwrap().iter().all(|z| z.get(FeatureId(0)) == 3.0));
    }

    #[test]
    fn numeric_needs_data() {
        let schema = FeatureSchema::new(vec![Feature::numeric("Age", vec![])]).unwrap();
        assert!(Binarizer::fit(&schema, &[]).is_err());
    }

    #[test]
    fn anchor_first_and_deterministic() {
        let schema = FeatureSchema::booleans(&["A", "B", "C"]).unwrap();
        let b = Binarizer::fit(&schema, &[]).unwrap();
        let x = Instance::from_bools(&[true, false, true]);
        assert_eq!(b.sample(&x, 1, 9).unwrap(), vec![x.clone()]);
        let z1 = b.sample(&x, 100, 9).unwrap();
        assert_eq!(z1, b.sample(&x, 100, 9).unwrap());
        assert_ne!(z1, b.sample(&x, 100, 10).unwrap());
        assert_eq!(z1[0], x);
    }

    #[test]
    fn fair_boolean_kept_three_quarters_of_the_time() {
        let schema = FeatureSchema::booleans(&["A"]).unwrap();
        let b = Binarizer::fit(&schema, &[]).unwrap();
        let z = b.sample(&Instance::from_bools(&[true]), 10_000, 42).unwrap();
        let frac = z.iter().filter(|x| x.get(FeatureId(0)) == 1.0).count() as f64 / z.len() as f64;
        assert!((0.70..=0.80).contains(&frac), "{frac}");
    }

    #[test]
    fn kernel_weights() {
        let k = KernelConfig::new(1.0).unwrap();
        assert_eq!(k.weight(0.0), 1.0);
        assert!((k.weight(1.0) - 0.367879).abs() < 1e-6);
        let k = KernelConfig::new(0.5).unwrap();
        assert_eq!(k.weight(0.5), (-1.0f64).exp());
        assert!(KernelConfig::new(0.0).is_err());
    }

    #[test]
    fn distance_is_fraction_of_bits() {
        let schema = FeatureSchema::booleans(&["A", "B", "C", "D"]).unwrap();
        let b = Binarizer::fit(&schema, &[]).unwrap();
        let x = Instance::from_bools(&[true, true, true, true]);
        let z = Instance::from_bools(&[false, false, true, true]);
        assert_eq!(b.distance(&x, &z), 0.5);
        let w = proximity_weights(&b, &x, &[x.clone(), z], KernelConfig::new(0.5).unwrap());
        assert_eq!(w, vec![1.0, (-1.0f64).exp()]);
    }

    #[test]
    fn batch_invariants_checked() {
        let schema = FeatureSchema::booleans(&["A"]).unwrap();
        let x = Instance::from_bools(&[true]);
        assert!(PerturbationBatch::new(schema.clone(), vec![x.clone()], vec![0.5], vec![true]).is_err());
        assert!(PerturbationBatch::new(schema.clone(), vec![x.clone()], vec![1.0], vec![]).is_err());
        assert!(PerturbationBatch::new(schema.clone(), vec![], vec![], vec![]).is_err());
        assert!(PerturbationBatch::new(schema, vec![x.clone(), x], vec![1.0, 0.0], vec![true, false]).is_err());
    }

    #[test]
    fn csv_dump_replays_exactly() {
        let schema = FeatureSchema::new(vec![
            Feature::numeric("Age", vec![]),
            Feature::boolean("Married"),
            Feature::categorical("Diag", ["Other", "Home"]),
        ])
        .unwrap();
        let data: Vec<Instance> =
            (0..20).map(|i| Instance::new(vec![17.0 + i as f64 * 3.3, (i % 2) as f64, (i % 3 % 2) as f64])).collect();
        let b = Binarizer::fit(&schema, &data).unwrap();
        let x = data[4].clone();
        let samples = b.sample(&x, 50, 5).unwrap();
        let weights = proximity_weights(&b, &x, &samples, KernelConfig::default_for(&b));
        let labels: Vec<bool> = samples.iter().map(|z| z.get(FeatureId(0)) > 40.0).collect();
        let batch = PerturbationBatch::new(b.schema().clone(), samples, weights, labels).unwrap();
        let mut buf = Vec::new();
        batch.write_csv(&mut buf).unwrap();
        let back = PerturbationBatch::read_csv(b.schema(), buf.as_slice()).unwrap();
        assert_eq!(back.samples(), batch.samples());
        assert_eq!(back.weights(), batch.weights());
        assert_eq!(back.labels(), batch.labels());
    }
}
