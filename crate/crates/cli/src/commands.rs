use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rll_core::confidence::{
    bayesian_confidence, confidence_profile, mle_confidence, prior_from_class_ratio, BetaPrior,
    ConfidenceMode, ConfidenceScore, DEFAULT_PRIOR_STRENGTH,
};
use rll_core::data::{dataset_to_jsonl, load_dataset, write_atomic, Dataset};
use rll_core::encoder::{self, write_checkpoint, EncoderConfig};
use rll_core::eval::{
    cross_validate, render_table, sweep_csv, sweep_d, sweep_k, to_json, EvalConfig, Method,
};
use rll_core::grouping::{partition_by_label, GroupingConfig};
use rll_core::rng::derive_seed;
use rll_core::synth::{self, SynthConfig};
use rll_core::truth::{dawid_skene, majority_labels, majority_vote};
use serde::Serialize;

use crate::args::{
    Cli, Command, CommonArgs, EvaluateArgs, GenerateArgs, InferArgs, ModelArgs, SweepArgs,
    SweepParam, TrainArgs,
};
use crate::config::{read_json, ExperimentConfig};

/// Environment variable capping fold parallelism.
pub const THREADS_VAR: &str = "RLL_THREADS";

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a, out),
        Command::Infer(a) => infer(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Train(a) => train(a, out),
    }
}

fn threads() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => bail!("{THREADS_VAR} must be a positive integer, got {v:?}"),
        },
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(path) => read_json(path)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.n {
        cfg.n_examples = v;
    }
    if let Some(v) = a.dim {
        cfg.feature_dim = v;
    }
    if let Some(v) = a.ratio {
        cfg.class_ratio = v;
    }
    if let Some(v) = a.separation {
        cfg.class_separation = v;
    }
    if let Some(v) = a.noise {
        cfg.noise_scale = v;
    }
    if let Some(v) = a.accuracies {
        cfg.worker_accuracies = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let ds = synth::generate(&cfg)?;
    write_output(&a.out, &dataset_to_jsonl(&ds)?)?;
    let positives = ds.expert_labels()?.iter().filter(|&&y| y == 1).count();
    writeln!(
        out,
        "wrote {} examples to {} (feature_dim {}, d {}, {} positive / {} negative)",
        ds.len(),
        a.out.display(),
        ds.feature_dim(),
        ds.worker_count(),
        positives,
        ds.len() - positives
    )?;
    Ok(())
}

/// Loads the dataset named by the flags or the config file and applies the
/// worker truncation.
fn resolve_dataset(common: &CommonArgs, file: &ExperimentConfig) -> Result<Dataset> {
    let ds = match (&common.data, &file.data, &file.synth) {
        (Some(path), _, _) | (None, Some(path), _) => {
            load_dataset(path).with_context(|| format!("cannot load {}", path.display()))?
        }
        (None, None, Some(cfg)) => synth::generate(cfg)?,
        (None, None, None) => bail!("no dataset: pass --data or set data or synth in the config"),
    };
    match common.d.or(file.d) {
        Some(d) if d != ds.worker_count() => Ok(ds.truncate_workers(d)?),
        _ => Ok(ds),
    }
}

fn prior_strength(common: &CommonArgs, file: &ExperimentConfig) -> f64 {
    common
        .prior_strength
        .or(file.prior_strength)
        .unwrap_or(DEFAULT_PRIOR_STRENGTH)
}

/// Beta prior from the configured class ratio, or from the ratio of
/// majority-vote labels in `ds`.
fn beta_prior(ds: &Dataset, common: &CommonArgs, file: &ExperimentConfig) -> Result<BetaPrior> {
    let ratio = match common.class_ratio.or(file.class_ratio) {
        Some(r) => r,
        None => {
            let mv = majority_labels(ds);
            let pos = mv.iter().filter(|&&y| y == 1).count();
            if pos == 0 || pos == mv.len() {
                bail!("majority-vote labels contain a single class; pass --class-ratio");
            }
            pos as f64 / (mv.len() - pos) as f64
        }
    };
    Ok(prior_from_class_ratio(ratio, prior_strength(common, file))?)
}

fn eval_config(
    common: &CommonArgs,
    model: &ModelArgs,
    folds: Option<usize>,
    file: &ExperimentConfig,
) -> Result<EvalConfig> {
    let d = EvalConfig::default();
    Ok(EvalConfig {
        folds: folds.or(file.folds).unwrap_or(d.folds),
        seed: common.seed.or(file.seed).unwrap_or(d.seed),
        k: model.k.or(file.k).unwrap_or(d.k),
        groups_per_epoch: model.groups_per_epoch.or(file.groups_per_epoch),
        hidden: model.hidden.clone().or_else(|| file.hidden.clone()).unwrap_or(d.hidden),
        eta: model.eta.or(file.eta).unwrap_or(d.eta),
        learning_rate: model.learning_rate.or(file.learning_rate).unwrap_or(d.learning_rate),
        epochs: model.epochs.or(file.epochs).unwrap_or(d.epochs),
        init_scale: model.init_scale.or(file.init_scale).unwrap_or(d.init_scale),
        prior_strength: prior_strength(common, file),
        class_ratio: common.class_ratio.or(file.class_ratio),
        logreg: file.logreg.unwrap_or(d.logreg),
        em: file.em.unwrap_or(d.em),
        threads: threads()?,
    })
}

#[derive(Serialize)]
struct InferRow<'a> {
    id: &'a str,
    mv: u8,
    mle: f64,
    bayes: f64,
    ds_posterior: f64,
}

#[derive(Debug, Serialize)]
struct Agreement {
    labelled: usize,
    mv: f64,
    mle: f64,
    bayes: f64,
    ds: f64,
}

fn infer(a: InferArgs, out: &mut dyn Write) -> Result<()> {
    let file = ExperimentConfig::load(a.common.config.as_deref())?;
    let ds = resolve_dataset(&a.common, &file)?;
    let prior = beta_prior(&ds, &a.common, &file)?;
    let em = dawid_skene(&ds, file.em.unwrap_or_default())?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut hits = [0usize; 4];
    let mut labelled = 0;
    for (ex, (_, &ds_post)) in ds.examples().iter().zip(&em.posterior_positive) {
        let row = InferRow {
            id: &ex.id,
            mv: majority_vote(&ex.crowd_labels)?,
            mle: mle_confidence(&ex.crowd_labels)?,
            bayes: bayesian_confidence(&ex.crowd_labels, prior)?,
            ds_posterior: ds_post,
        };
        csv.serialize(&row)?;
        if let Some(truth) = ex.expert_label {
            labelled += 1;
            let labels = [
                row.mv,
                ConfidenceScore::from_posterior(row.mle).assigned_label,
                ConfidenceScore::from_posterior(row.bayes).assigned_label,
                ConfidenceScore::from_posterior(row.ds_posterior).assigned_label,
            ];
            for (h, y) in hits.iter_mut().zip(labels) {
                *h += usize::from(y == truth);
            }
        }
    }
    let bytes = csv.into_inner().context("cannot flush CSV")?;
    match &a.out {
        Some(path) => write_output(path, &bytes)?,
        None => out.write_all(&bytes)?,
    }

    writeln!(
        out,
        "{} examples, {} workers, Dawid-Skene converged in {} iterations",
        ds.len(),
        ds.worker_count(),
        em.iterations
    )?;
    if labelled == 0 {
        writeln!(out, "no expert labels: agreement not computed")?;
        return Ok(());
    }
    let frac = |h: usize| h as f64 / labelled as f64;
    let agreement = Agreement {
        labelled,
        mv: frac(hits[0]),
        mle: frac(hits[1]),
        bayes: frac(hits[2]),
        ds: frac(hits[3]),
    };
    writeln!(out, "agreement with {labelled} expert labels:")?;
    for (name, v) in [
        ("mv", agreement.mv),
        ("mle", agreement.mle),
        ("bayes", agreement.bayes),
        ("ds", agreement.ds),
    ] {
        writeln!(out, "  {name:<6}{v:.4}")?;
    }
    if let Some(path) = &a.summary {
        let mut json = serde_json::to_string_pretty(&agreement)?;
        json.push('\n');
        write_output(path, json.as_bytes())?;
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let file = ExperimentConfig::load(a.common.config.as_deref())?;
    let ds = resolve_dataset(&a.common, &file)?;
    let cfg = eval_config(&a.common, &a.model, a.folds, &file)?;
    let methods = a
        .methods
        .or(file.methods)
        .unwrap_or_else(|| Method::ALL.to_vec());
    if methods.is_empty() {
        bail!("no methods requested");
    }
    let reports = methods
        .iter()
        .map(|&m| cross_validate(&ds, m, &cfg).with_context(|| format!("method {m}")))
        .collect::<Result<Vec<_>>>()?;
    let table = render_table(&reports);
    if let Some(path) = &a.out {
        write_output(path, to_json(&reports).as_bytes())?;
    }
    if let Some(path) = &a.table {
        write_output(path, table.as_bytes())?;
    }
    out.write_all(table.as_bytes())?;
    Ok(())
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let file = ExperimentConfig::load(a.common.config.as_deref())?;
    let param = a
        .sweep
        .or(file.sweep)
        .context("missing --sweep (k or d)")?;
    let values = a.values.or(file.values.clone()).context("missing --values")?;
    if values.is_empty() {
        bail!("--values is empty");
    }
    let method = a.method.or(file.method).unwrap_or(Method::RllBayes);
    let mut common = a.common;
    if param == SweepParam::D && (common.d.is_some() || file.d.is_some()) {
        bail!("--d cannot be combined with a d sweep");
    }
    let ds = resolve_dataset(&common, &file)?;
    common.d = None;
    let cfg = eval_config(&common, &a.model, a.folds, &file)?;
    let reports = match param {
        SweepParam::K => sweep_k(&ds, &values, method, &cfg),
        SweepParam::D => sweep_d(&ds, &values, method, &cfg)?,
    };
    let csv = sweep_csv(&reports);
    match &a.out {
        Some(path) => {
            write_output(path, csv.as_bytes())?;
            out.write_all(render_table(&reports).as_bytes())?;
        }
        None => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct EmbeddingRecord<'a> {
    id: &'a str,
    embedding: &'a [f64],
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<()> {
    let file = ExperimentConfig::load(a.common.config.as_deref())?;
    let ds = resolve_dataset(&a.common, &file)?;
    let cfg = eval_config(&a.common, &a.model, None, &file)?;
    let mode = a
        .mode
        .map(ConfidenceMode::from)
        .or(file.mode)
        .unwrap_or(ConfidenceMode::Bayesian);
    let prior = match mode {
        ConfidenceMode::Bayesian => Some(beta_prior(&ds, &a.common, &file)?),
        _ => None,
    };
    let profile = confidence_profile(&ds, mode, prior)?;
    let pools = partition_by_label(&ds, &profile)?;
    let grouping = GroupingConfig {
        k: cfg.k,
        groups_per_epoch: cfg
            .groups_per_epoch
            .unwrap_or_else(|| GroupingConfig::default_groups_per_epoch(pools.positives.len())),
        seed: derive_seed(cfg.seed, 100),
    };
    let mut layer_sizes = vec![ds.feature_dim()];
    layer_sizes.extend(&cfg.hidden);
    let enc = EncoderConfig {
        layer_sizes,
        eta: cfg.eta,
        learning_rate: cfg.learning_rate,
        epochs: cfg.epochs,
        seed: derive_seed(cfg.seed, 200),
        init_scale: cfg.init_scale,
    };
    let outcome = encoder::train(&ds, &profile, &grouping, &enc)?;
    write_output(&a.out, write_checkpoint(&outcome.params).as_bytes())?;
    if let Some(path) = &a.embeddings {
        let embeddings = encoder::embed_dataset(&outcome.params, &ds)?;
        let mut bytes = Vec::new();
        for (id, e) in &embeddings {
            serde_json::to_writer(&mut bytes, &EmbeddingRecord { id, embedding: &e.0 })?;
            bytes.push(b'\n');
        }
        write_output(path, &bytes)?;
    }
    let trace = &outcome.loss_trace;
    writeln!(
        out,
        "trained {:?} for {} epochs: monitor loss {:.6} -> {:.6}",
        enc.layer_sizes,
        enc.epochs,
        trace[0],
        trace[trace.len() - 1]
    )?;
    Ok(())
}
