use std::fs;
use std::io::{self, BufReader};
use std::net::TcpListener;
use std::path::Path;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::json;

use progex_core::anneal::{anneal, exhaustive_search, InducerConfig};
use progex_core::compile::{
    compile_linear, compile_rule_list, compile_rule_set, compile_tree, simplify_binary, LinearModel, RuleList, RuleSet,
};
use progex_core::explain::{ConfigEcho, ExplanationReport};
use progex_core::loss::Loss;
use progex_core::model::remote::{serve as serve_stdio, serve_tcp};
use progex_core::model::{
    load_dataset, train_forest, train_logistic, train_tree, BlackBox, Dataset, DecisionTreeModel, Model, RemoteModel,
};
use progex_core::perturb::{Binarizer, KernelConfig, PerturbationBatch};
use progex_core::{pretty_print, FeatureSchema};

use crate::{BatchArgs, CompileArgs, ExplainArgs, ModelKind, OracleArgs, ReprKind, SearchArgs, ServeArgs, TrainArgs, TrainingArgs};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    if let Some(p) = path {
        write(p, &(serde_json::to_string_pretty(value)? + "\n"))?;
    }
    Ok(())
}

fn load_data(data: &Path, schema: &Path) -> Result<Dataset> {
    let d = load_dataset(data, schema).with_context(|| format!("loading {}", data.display()))?;
    for note in &d.notes {
        eprintln!("note: {note}");
    }
    Ok(d)
}

fn fit_model(kind: ModelKind, d: &Dataset, t: &TrainingArgs) -> Result<Model> {
    Ok(match kind {
        ModelKind::Tree => Model::Tree(train_tree(d, t.max_depth)?),
        ModelKind::Forest => Model::Forest(train_forest(d, t.trees, t.max_depth, t.train_seed)?),
        ModelKind::Logistic => Model::Logistic(train_logistic(d, t.epochs, t.learning_rate)?),
        ModelKind::Remote => bail!("a remote model cannot be trained"),
    })
}

fn open_model(args: &BatchArgs, schema: &FeatureSchema, data: &Dataset) -> Result<Box<dyn BlackBox>> {
    if args.model == ModelKind::Remote {
        let target = args.cmd.as_deref().ok_or_else(|| anyhow!("--model remote needs --cmd"))?;
        let remote = RemoteModel::open(target, Duration::from_secs(args.timeout))?;
        remote.expect_arity(schema.arity())?;
        return Ok(Box::new(remote));
    }
    let model = match &args.model_file {
        Some(path) => {
            let m = Model::load(path, schema).with_context(|| format!("loading {}", path.display()))?;
            if m.kind() != args.model.name() {
                bail!("{} holds a {} model but --model is {}", path.display(), m.kind(), args.model.name());
            }
            m
        }
        None => fit_model(args.model, data, &args.training)?,
    };
    Ok(Box::new(model))
}

/// A labelled batch plus what the report needs to know about its origin.
struct Source {
    batch: PerturbationBatch,
    model: String,
    instance: Option<usize>,
    kernel_width: Option<f64>,
}

fn batch_source(args: &BatchArgs, seed: u64) -> Result<Source> {
    if let Some(path) = &args.replay_batch {
        let schema = match &args.data {
            Some(data) => {
                let d = load_data(data, &args.schema)?;
                Binarizer::fit(&d.schema, &d.rows)?.schema().clone()
            }
            None => FeatureSchema::load(&args.schema)?,
        };
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let batch = PerturbationBatch::read_csv(&schema, BufReader::new(file))
            .with_context(|| format!("reading batch {}", path.display()))?;
        return Ok(Source { batch, model: "replay".into(), instance: None, kernel_width: None });
    }
    let data_path = args.data.as_deref().ok_or_else(|| anyhow!("--data is required unless --replay-batch is given"))?;
    let data = load_data(data_path, &args.schema)?;
    let x = data
        .rows
        .get(args.instance)
        .ok_or_else(|| anyhow!("instance {} out of range (dataset has {} rows)", args.instance, data.len()))?;
    let model = open_model(args, &data.schema, &data)?;
    let binarizer = Binarizer::fit(&data.schema, &data.rows)?;
    let kernel = match args.kernel_width {
        Some(w) => KernelConfig::new(w)?,
        None => KernelConfig::default_for(&binarizer),
    };
    let batch = PerturbationBatch::generate(model.as_ref(), &binarizer, x, args.samples, seed, kernel)?;
    if let Some(out) = &args.dump_batch {
        let file = fs::File::create(out).with_context(|| format!("creating {}", out.display()))?;
        batch.write_csv(file)?;
    }
    Ok(Source { batch, model: args.model.name().into(), instance: Some(args.instance), kernel_width: Some(kernel.width) })
}

fn inducer_config(s: &SearchArgs, seed: Option<u64>) -> Result<InducerConfig> {
    let mut cfg = match &s.config {
        Some(path) => InducerConfig::from_json_str(&read(path)?).with_context(|| format!("in {}", path.display()))?,
        None => InducerConfig::default(),
    };
    if let Some(v) = s.max_nodes {
        cfg.max_nodes = v;
    }
    if let Some(v) = s.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = s.restarts {
        cfg.restarts = v;
    }
    if let Some(v) = s.initial_temperature {
        cfg.initial_temperature = v;
    }
    if let Some(v) = &s.loss {
        cfg.loss = v.clone();
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    cfg.arithmetic |= s.arith;
    cfg.validate()?;
    Ok(cfg)
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    let cfg = inducer_config(&args.search, args.batch.seed)?;
    let source = batch_source(&args.batch, cfg.seed)?;
    let started = Instant::now();
    let result = anneal(&source.batch, &cfg)?;
    let elapsed = started.elapsed();
    let echo = ConfigEcho::new(&cfg, source.batch.len(), source.kernel_width);
    let report = ExplanationReport::new(&source.batch, &result, echo, &source.model, source.instance);
    print!("{}", report.to_text());
    println!("search time: {:.2} s", elapsed.as_secs_f64());
    if let Some(p) = &args.json_out {
        write(p, &report.to_json_string())?;
    }
    Ok(())
}

pub fn oracle(args: OracleArgs) -> Result<()> {
    let loss = Loss::by_name(&args.loss)?;
    let seed = args.batch.seed.unwrap_or(0);
    let source = batch_source(&args.batch, seed)?;
    let result = exhaustive_search(&source.batch, args.max_nodes, &loss)?;
    let program = pretty_print(&result.program, source.batch.schema());
    println!("optimum ({} nodes, weighted F1 {:.4}, energy {}):", result.node_count, result.score, result.energy);
    for line in program.lines() {
        println!("    {line}");
    }
    println!("programs enumerated: {}", result.iterations_used);
    write_json(
        args.json_out.as_deref(),
        &json!({
            "program": program,
            "weighted_f1": result.score,
            "energy": result.energy,
            "node_count": result.node_count,
            "programs_enumerated": result.iterations_used,
            "anchor_label": source.batch.anchor_label(),
            "model": source.model,
            "instance": source.instance,
            "max_nodes": args.max_nodes,
            "loss": loss.name(),
            "seed": seed,
            "samples": source.batch.len(),
            "kernel_width": source.kernel_width,
        }),
    )
}

pub fn compile(args: CompileArgs) -> Result<()> {
    let schema = FeatureSchema::load(&args.schema).with_context(|| format!("loading {}", args.schema.display()))?;
    let text = read(&args.file)?;
    let positive = args.positive.as_deref();
    let program = match args.kind {
        ReprKind::Tree => compile_tree(&DecisionTreeModel::from_json_str(&text, &schema)?, &schema)?,
        ReprKind::Linear => compile_linear(&LinearModel::from_json_str(&text, &schema)?),
        ReprKind::RuleList => compile_rule_list(&RuleList::from_json_str(&text, &schema, positive)?),
        ReprKind::RuleSet => compile_rule_set(&RuleSet::from_json_str(&text, &schema, positive)?)?,
    };
    let program = if args.simplify { simplify_binary(&program, &schema, args.max_nodes)? } else { program };
    let printed = pretty_print(&program, &schema);
    println!("{printed}");
    let kind = match args.kind {
        ReprKind::Tree => "tree",
        ReprKind::Linear => "linear",
        ReprKind::RuleList => "rule-list",
        ReprKind::RuleSet => "rule-set",
    };
    write_json(
        args.json_out.as_deref(),
        &json!({
            "kind": kind,
            "program": printed,
            "node_count": program.node_count(),
            "simplified": args.simplify,
            "positive": args.positive,
        }),
    )
}

pub fn train(args: TrainArgs) -> Result<()> {
    let d = load_data(&args.data, &args.schema)?;
    let model = fit_model(args.model, &d, &args.training)?;
    model.save(&args.out, &d.schema)?;
    let correct = d.rows.iter().zip(&d.target).filter(|(x, &t)| model.predict(x) == t).count();
    let accuracy = correct as f64 / d.len() as f64;
    println!("wrote {} model to {} (training accuracy {:.4})", model.kind(), args.out.display(), accuracy);
    write_json(
        args.json_out.as_deref(),
        &json!({
            "model": model.kind(),
            "out": args.out.display().to_string(),
            "rows": d.len(),
            "positives": d.positives(),
            "training_accuracy": accuracy,
            "notes": d.notes,
        }),
    )
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let schema = FeatureSchema::load(&args.schema)?;
    let model = Model::load(&args.model_file, &schema).with_context(|| format!("loading {}", args.model_file.display()))?;
    match &args.tcp {
        Some(addr) => {
            let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(&model, schema.arity(), listener)?;
        }
        None => serve_stdio(&model, schema.arity(), io::stdin().lock(), io::stdout().lock())?,
    }
    Ok(())
}
