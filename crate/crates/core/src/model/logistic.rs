use serde::{Deserialize, Serialize};

use crate::schema::{FeatureId, FeatureKind, FeatureSchema, Instance};

/// How one schema slot expands into model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encode", rename_all = "lowercase")]
pub enum Encoding {
    Standardize { mean: f64, std: f64 },
    Identity,
    OneHot { levels: usize },
}

impl Encoding {
    fn width(&self) -> usize {
        match self {
            Encoding::OneHot { levels } => *levels,
            _ => 1,
        }
    }
}

/// Logistic regression trained by full-batch gradient descent on log-loss.
/// Predicts 1 when the probability exceeds 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub encodings: Vec<Encoding>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn encodings_for(schema: &FeatureSchema, rows: &[Instance]) -> Vec<Encoding> {
    schema
        .ids()
        .map(|id| match &schema.feature(id).kind {
            FeatureKind::Boolean => Encoding::Identity,
            FeatureKind::Categorical { levels } => Encoding::OneHot { levels: levels.len() },
            FeatureKind::Numeric => {
                let n = rows.len() as f64;
                let mean = rows.iter().map(|x| x.get(id)).sum::<f64>() / n;
                let var = rows.iter().map(|x| (x.get(id) - mean).powi(2)).sum::<f64>() / n;
                let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                Encoding::Standardize { mean, std }
            }
        })
        .collect()
}

fn encode(encodings: &[Encoding], x: &Instance, out: &mut Vec<f64>) {
    out.clear();
    for (i, e) in encodings.iter().enumerate() {
        let v = x.get(FeatureId(i));
        match e {
            Encoding::Standardize { mean, std } => out.push((v - mean) / std),
            Encoding::Identity => out.push(v),
            Encoding::OneHot { levels } => out.extend((0..*levels).map(|l| f64::from(u8::from(v == l as f64)))),
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl LogisticModel {
    pub fn train(schema: &FeatureSchema, rows: &[Instance], target: &[bool], epochs: usize, learning_rate: f64) -> Self {
        let encodings = encodings_for(schema, rows);
        let width: usize = encodings.iter().map(Encoding::width).sum();
        let encoded: Vec<Vec<f64>> = rows
            .iter()
            .map(|x| {
                let mut v = Vec::with_capacity(width);
                encode(&encodings, x, &mut v);
                v
            })
            .collect();
        let n = rows.len() as f64;
        let mut weights = vec![0.0; width];
        let mut bias = 0.0;
        let mut grad = vec![0.0; width];
        for _ in 0..epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (x, &y) in encoded.iter().zip(target) {
                let z = bias + x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>();
                let err = sigmoid(z) - f64::from(u8::from(y));
                for (g, a) in grad.iter_mut().zip(x) {
                    *g += err * a;
                }
                grad_b += err;
            }
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= learning_rate * g / n;
            }
            bias -= learning_rate * grad_b / n;
        }
        LogisticModel { encodings, weights, bias }
    }

    pub fn score(&self, x: &Instance) -> f64 {
        let mut v = Vec::with_capacity(self.weights.len());
        encode(&self.encodings, x, &mut v);
        self.bias + v.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }

    pub fn probability(&self, x: &Instance) -> f64 {
        sigmoid(self.score(x))
    }

    pub fn predict(&self, x: &Instance) -> bool {
        self.probability(x) > 0.5
    }

    pub fn arity(&self) -> usize {
        self.encodings.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::Feature;

    #[test]
    fn separable_data_is_fit() {
        let schema = FeatureSchema::new(vec![Feature::numeric("X", vec![]), Feature::numeric("Y", vec![])]).unwrap();
        let rows: Vec<Instance> = (0..40)
            .map(|i| {
                let (x, y) = ((i % 8) as f64, (i / 8) as f64);
                Instance::new(vec![x, y])
            })
            .collect();
        let target: Vec<bool> = rows.iter().map(|r| r.get(FeatureId(0)) + r.get(FeatureId(1)) > 6.5).collect();
        let m = LogisticModel::train(&schema, &rows, &target, 3000, 1.0);
        let acc = rows.iter().zip(&target).filter(|(r, &t)| m.predict(r) == t).count();
        assert_eq!(acc, rows.len());
    }
}
