//! End-to-end explanation of one instance, and the report it produces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anneal::{anneal, ExplanationResult, InducerConfig, ProposalMix};
use crate::error::{Error, Result};
use crate::expr::pretty_print;
use crate::model::BlackBox;
use crate::perturb::{Binarizer, KernelConfig, PerturbationBatch, DEFAULT_SAMPLES};
use crate::schema::{FeatureSchema, Instance};

#[derive(Clone, Debug, PartialEq)]
pub struct ExplainOptions {
    pub samples: usize,
    /// Kernel width; `None` picks the default for the binarized width.
    pub kernel_width: Option<f64>,
    pub inducer: InducerConfig,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        ExplainOptions { samples: DEFAULT_SAMPLES, kernel_width: None, inducer: InducerConfig::default() }
    }
}

/// A labelled batch and the program induced on it.
#[derive(Clone, Debug)]
pub struct Explanation {
    pub batch: PerturbationBatch,
    pub result: ExplanationResult,
    pub kernel_width: f64,
}

/// Perturbs `x` using marginals fitted on `data`, labels the samples with
/// `model` and anneals a program over them.
pub fn explain_instance(
    model: &dyn BlackBox,
    schema: &FeatureSchema,
    data: &[Instance],
    x: &Instance,
    opts: &ExplainOptions,
) -> Result<Explanation> {
    if opts.samples == 0 {
        return Err(Error::Invalid("need at least one sample".into()));
    }
    opts.inducer.validate()?;
    schema.validate(x)?;
    let binarizer = Binarizer::fit(schema, data)?;
    let kernel = match opts.kernel_width {
        Some(w) => KernelConfig::new(w)?,
        None => KernelConfig::default_for(&binarizer),
    };
    let batch = PerturbationBatch::generate(model, &binarizer, x, opts.samples, opts.inducer.seed, kernel)?;
    let result = anneal(&batch, &opts.inducer)?;
    Ok(Explanation { batch, result, kernel_width: kernel.width })
}

/// Settings echoed in a report, enough to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub samples: usize,
    pub kernel_width: Option<f64>,
    pub max_nodes: usize,
    pub iterations: usize,
    pub restarts: usize,
    pub initial_temperature: f64,
    pub proposal_mix: ProposalMix,
    pub arithmetic: bool,
    pub loss: String,
}

impl ConfigEcho {
    pub fn new(cfg: &InducerConfig, samples: usize, kernel_width: Option<f64>) -> Self {
        ConfigEcho {
            seed: cfg.seed,
            samples,
            kernel_width,
            max_nodes: cfg.max_nodes,
            iterations: cfg.iterations,
            restarts: cfg.restarts,
            initial_temperature: cfg.initial_temperature,
            proposal_mix: cfg.proposal_mix,
            arithmetic: cfg.arithmetic,
            loss: cfg.loss.clone(),
        }
    }
}

/// Machine-readable outcome of an explanation. Contains no timing, so the
/// same inputs always serialize to the same bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub program: String,
    pub weighted_f1: f64,
    pub energy: f64,
    pub node_count: usize,
    /// Feature name to displayed value.
    pub anchor: BTreeMap<String, String>,
    pub anchor_label: bool,
    /// Which label the program's `True` stands for, and which class the
    /// F1 score is measured on.
    pub program_true_means: String,
    pub f1_class: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<usize>,
    pub chain_id: usize,
    pub iterations_used: usize,
    pub config: ConfigEcho,
}

impl ExplanationReport {
    pub fn new(
        batch: &PerturbationBatch,
        result: &ExplanationResult,
        config: ConfigEcho,
        model: &str,
        instance: Option<usize>,
    ) -> Self {
        let schema = batch.schema();
        let anchor = schema
            .ids()
            .map(|id| (schema.feature(id).name.clone(), schema.display_value(id, batch.anchor().get(id))))
            .collect();
        let class = |b: bool| match schema.target() {
            Some(t) if b => t.positive.clone(),
            Some(t) => format!("not {}", t.positive),
            None => format!("label {}", u8::from(b)),
        };
        ExplanationReport {
            program: pretty_print(&result.program, schema),
            weighted_f1: result.score,
            energy: result.energy,
            node_count: result.node_count,
            anchor,
            anchor_label: batch.anchor_label(),
            program_true_means: class(true),
            f1_class: class(batch.anchor_label()),
            model: model.to_string(),
            instance,
            chain_id: result.chain_id,
            iterations_used: result.iterations_used,
            config,
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model: {}", self.model));
        if let Some(i) = self.instance {
            out.push_str(&format!(", instance {i}"));
        }
        out.push_str(&format!(
            "\nprediction: {} (program True means {})\n",
            self.f1_class, self.program_true_means
        ));
        out.push_str(&format!(
            "explanation ({} nodes, weighted F1 {:.4} on {} samples):\n",
            self.node_count, self.weighted_f1, self.config.samples
        ));
        for line in self.program.lines() {
            out.push_str("    ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}
