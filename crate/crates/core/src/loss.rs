//! Fidelity losses between black-box labels and program predictions.
//!
//! The default loss is the negative weighted F1 score of the anchor's
//! class: when the explained instance was labelled 0, labels and
//! predictions are both complemented before scoring, so F1 always measures
//! agreement on the class the black box assigned to the anchor. Program
//! outputs keep their meaning (`true` is label 1) either way.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{type_of, BatchEvaluator, Expr, Mask, Type};
use crate::perturb::PerturbationBatch;

/// Weighted confusion masses, summed in ascending sample order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Confusion {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

impl Confusion {
    pub fn from_slices(labels: &[bool], predictions: &[bool], weights: &[f64]) -> Self {
        let mut c = Confusion::default();
        for ((&l, &p), &w) in labels.iter().zip(predictions).zip(weights) {
            match (l, p) {
                (true, true) => c.tp += w,
                (false, true) => c.fp += w,
                (true, false) => c.fn_ += w,
                (false, false) => c.tn += w,
            }
        }
        c
    }

    pub fn from_masks(labels: &Mask, predictions: &Mask, weights: &[f64]) -> Self {
        let mut c = Confusion::default();
        for (wi, (&l, &p)) in labels.words().iter().zip(predictions.words()).enumerate() {
            let base = wi * 64;
            let end = (base + 64).min(labels.len());
            for (bit, &w) in weights[base..end].iter().enumerate() {
                match (l >> bit & 1 == 1, p >> bit & 1 == 1) {
                    (true, true) => c.tp += w,
                    (false, true) => c.fp += w,
                    (true, false) => c.fn_ += w,
                    (false, false) => c.tn += w,
                }
            }
        }
        c
    }

    pub fn total(&self) -> f64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// F1 of the positive class; `1` when nothing is positive on either side.
    pub fn f1(&self) -> f64 {
        let positives = self.tp + self.fn_;
        let predicted = self.tp + self.fp;
        if positives == 0.0 && predicted == 0.0 {
            return 1.0;
        }
        let precision = if predicted == 0.0 { 0.0 } else { self.tp / predicted };
        let recall = if positives == 0.0 { 0.0 } else { self.tp / positives };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    pub fn error_rate(&self) -> f64 {
        let total = self.total();
        if total == 0.0 {
            0.0
        } else {
            (self.fp + self.fn_) / total
        }
    }
}

/// Weighted F1 of the positive class.
pub fn weighted_f1(labels: &[bool], predictions: &[bool], weights: &[f64]) -> Result<f64> {
    check_inputs(labels.len(), predictions.len(), weights)?;
    Ok(Confusion::from_slices(labels, predictions, weights).f1())
}

fn check_inputs(labels: usize, predictions: usize, weights: &[f64]) -> Result<()> {
    if labels != predictions || labels != weights.len() {
        return Err(Error::Invalid(format!(
            "length mismatch: {labels} labels, {predictions} predictions, {} weights",
            weights.len()
        )));
    }
    if labels == 0 {
        return Err(Error::Invalid("empty label sequence".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Invalid("weights must be finite and non-negative".into()));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Invalid("all weights are zero".into()));
    }
    Ok(())
}

/// A fidelity loss: lower is better, finite, deterministic.
pub trait LossFunction: Send + Sync {
    fn name(&self) -> &str;

    /// `labels` and `predictions` are already oriented to the anchor's class.
    fn loss(&self, labels: &Mask, predictions: &Mask, weights: &[f64]) -> f64;
}

/// `-F1` of the anchor's class.
#[derive(Clone, Copy, Debug, Default)]
pub struct NegWeightedF1;

impl LossFunction for NegWeightedF1 {
    fn name(&self) -> &str {
        "weighted-f1"
    }

    fn loss(&self, labels: &Mask, predictions: &Mask, weights: &[f64]) -> f64 {
        -Confusion::from_masks(labels, predictions, weights).f1()
    }
}

/// Weighted misclassification rate.
#[derive(Clone, Copy, Debug, Default)]
pub struct WeightedZeroOne;

impl LossFunction for WeightedZeroOne {
    fn name(&self) -> &str {
        "weighted-01"
    }

    fn loss(&self, labels: &Mask, predictions: &Mask, weights: &[f64]) -> f64 {
        Confusion::from_masks(labels, predictions, weights).error_rate()
    }
}

/// Shared handle to a loss, selectable by name.
#[derive(Clone)]
pub struct Loss(Arc<dyn LossFunction>);

impl Loss {
    pub fn new(f: impl LossFunction + 'static) -> Self {
        Loss(Arc::new(f))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "weighted-f1" | "f1" => Ok(Loss::new(NegWeightedF1)),
            "weighted-01" | "01" => Ok(Loss::new(WeightedZeroOne)),
            other => Err(Error::Invalid(format!("unknown loss `{other}` (weighted-f1 | weighted-01)"))),
        }
    }

    pub fn name(&self) -> &str {
        self.0.name()
    }

    pub fn eval(&self, labels: &Mask, predictions: &Mask, weights: &[f64]) -> f64 {
        self.0.loss(labels, predictions, weights)
    }
}

impl Default for Loss {
    fn default() -> Self {
        Loss::new(NegWeightedF1)
    }
}

impl fmt::Debug for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Loss({})", self.name())
    }
}

/// Labels and predictions re-oriented so that the anchor's class is positive.
pub fn orient(batch: &PerturbationBatch, predictions: &Mask) -> (Mask, Mask) {
    let labels = batch.label_mask();
    if batch.anchor_label() {
        (labels, predictions.clone())
    } else {
        (labels.not(), predictions.not())
    }
}

/// Loss and F1 of a program's predictions on the batch.
pub fn score_mask(batch: &PerturbationBatch, predictions: &Mask, loss: &Loss) -> (f64, f64) {
    let (labels, preds) = orient(batch, predictions);
    let weights = batch.weights();
    (loss.eval(&labels, &preds, weights), Confusion::from_masks(&labels, &preds, weights).f1())
}

/// Loss of `p` on the batch under `loss`.
pub fn loss_of(batch: &PerturbationBatch, p: &Expr, loss: &Loss) -> Result<f64> {
    type_of(p, batch.schema())?;
    let ev = BatchEvaluator::new(batch.schema(), batch.samples());
    Ok(score_mask(batch, &ev.predict(p), loss).0)
}

/// Weighted F1 of `p` on the batch, oriented to the anchor's class.
pub fn fidelity(batch: &PerturbationBatch, p: &Expr) -> Result<f64> {
    let t = type_of(p, batch.schema())?;
    debug_assert!(matches!(t, Type::Bool | Type::Real));
    let ev = BatchEvaluator::new(batch.schema(), batch.samples());
    let (labels, preds) = orient(batch, &ev.predict(p));
    Ok(Confusion::from_masks(&labels, &preds, batch.weights()).f1())
}
