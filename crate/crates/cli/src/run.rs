use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use brie_core::corpus::{
    generate_synthetic, ingest_interactions, load_features, partition, read_split, write_features, write_split,
    write_triads, Corpus, Split, SplitAssignment, SyntheticSpec,
};
use brie_core::evaluation::{
    activity_sweep, build_cases, build_test_cases, evaluate, mean_auc, write_case_dump, write_report_tsv,
    write_sweep, EvalConfig, MetricReport,
};
use brie_core::models::{
    count_params, load_artifact, save_artifact, CentroidScorer, LearnedScorer, ModelConfig, ModelKind,
    ModelParams, RandomScorer, Scorer,
};
use brie_core::seed::derive_seed;
use brie_core::training::{
    train_with_monitor, EarlyStopConfig, LossKind, PowerModel, TrainConfig, TrainOutcome,
};
use brie_core::Exec;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::*;

const MANIFEST: &str = "manifest.json";

/// Everything needed to re-run a command bit-exactly.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub global: Global,
    pub command: Command,
    /// Configuration after defaults and seed derivation, for reference.
    pub resolved: serde_json::Value,
}

pub struct Ctx {
    pub global: Global,
    pub exec: Exec,
}

impl Ctx {
    pub fn new(global: Global) -> Self {
        let exec = if global.workers == 1 { Exec::Sequential } else { Exec::default() };
        Self { global, exec }
    }

    fn seed(&self, label: &str) -> u64 {
        derive_seed(self.global.seed, label)
    }
}

pub fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    match command {
        Command::Replay(r) => replay(r),
        mut command => {
            absolutize(&mut command)?;
            let out = command.out_mut().expect("non-replay command").clone();
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let resolved = match &command {
                Command::Synth(c) => synth(ctx, c)?,
                Command::Train(c) => train_cmd(ctx, c)?,
                Command::Eval(c) => eval_cmd(ctx, c)?,
                Command::Benchmark(c) => benchmark(ctx, c)?,
                Command::Replay(_) => unreachable!(),
            };
            let manifest = Manifest {
                tool: format!("brie {}", env!("CARGO_PKG_VERSION")),
                global: ctx.global.clone(),
                command,
                resolved,
            };
            write_json(&out.join(MANIFEST), &manifest)
        }
    }
}

fn replay(r: ReplayCmd) -> Result<()> {
    let text = fs::read_to_string(&r.manifest).with_context(|| format!("reading {}", r.manifest.display()))?;
    let mut manifest: Manifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", r.manifest.display()))?;
    if let Some(out) = r.out {
        *manifest.command.out_mut().context("manifest holds no runnable command")? = out;
    }
    log::info!("replaying {} from {}", manifest.command.name(), r.manifest.display());
    dispatch(&Ctx::new(manifest.global), manifest.command)
}

/// Input paths are stored absolute so a manifest replays from any directory.
fn absolutize(command: &mut Command) -> Result<()> {
    let fix = |p: &mut Option<PathBuf>| -> Result<()> {
        if let Some(path) = p {
            *path = fs::canonicalize(&*path).with_context(|| format!("resolving {}", path.display()))?;
        }
        Ok(())
    };
    let data = match command {
        Command::Train(c) => Some(&mut c.data),
        Command::Eval(c) => {
            fix(&mut c.artifact)?;
            Some(&mut c.data)
        }
        Command::Benchmark(c) => Some(&mut c.data),
        _ => None,
    };
    if let Some(d) = data {
        fix(&mut d.triads)?;
        fix(&mut d.features)?;
        fix(&mut d.split)?;
    }
    Ok(())
}

fn spec_from(args: &SpecArgs, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_users: args.users,
        n_items: args.items,
        n_photos: args.photos,
        true_dim: args.true_dim,
        feature_dim: args.feature_dim,
        style_noise: args.style_noise,
        feature_noise: args.feature_noise,
        seed,
        val_frac: args.val_frac,
        test_frac: args.test_frac,
    }
}

fn synth(ctx: &Ctx, c: &SynthCmd) -> Result<serde_json::Value> {
    // the root seed drives the generator directly, so `--seed 7` is the
    // reference corpus
    let spec = spec_from(&c.spec, ctx.global.seed);
    let (corpus, split) = generate_synthetic(&spec)?;
    write_triads(&corpus, c.out.join("triads.tsv"))?;
    write_features(corpus.features(), c.out.join("features.bin"))?;
    write_split(&split, c.out.join("split.tsv"))?;
    println!(
        "{} users, {} items, {} photos; train/val/test {}/{}/{}",
        corpus.n_users(),
        corpus.n_items(),
        corpus.n_photos(),
        split.count(Split::Train),
        split.count(Split::Val),
        split.count(Split::Test)
    );
    Ok(json!({ "spec": spec }))
}

struct Data {
    corpus: Corpus,
    split: SplitAssignment,
    source: serde_json::Value,
}

fn load_data(ctx: &Ctx, d: &DataArgs) -> Result<Data> {
    match (&d.triads, d.synthetic) {
        (Some(triads), false) => {
            let features = d.features.as_ref().context("--features is required with --triads")?;
            let t = ingest_interactions(triads)?;
            let table = load_features(features, &t.ids.photos)?;
            let corpus = Corpus::from_triads(t, table)?;
            let split = match &d.split {
                Some(p) => read_split(p, &corpus)?,
                None => partition(&corpus, d.spec.val_frac, d.spec.test_frac, ctx.global.seed)?,
            };
            Ok(Data { corpus, split, source: json!({ "files": { "triads": triads, "features": features, "split": d.split } }) })
        }
        (None, true) => {
            let spec = spec_from(&d.spec, ctx.global.seed);
            let (corpus, split) = generate_synthetic(&spec)?;
            Ok(Data { corpus, split, source: json!({ "synthetic": spec }) })
        }
        _ => Err(brie_core::Error::InvalidConfig("give exactly one data source: --triads/--features or --synthetic".into()).into()),
    }
}

fn model_config(ctx: &Ctx, kind: ModelKind, a: &ModelArgs, feature_dim: usize) -> ModelConfig {
    let d = a.d.unwrap_or(match kind {
        ModelKind::Brie => 64,
        ModelKind::MfElvis => 1024,
        ModelKind::Elvis => 256,
        ModelKind::Cnt | ModelKind::Rnd => 0,
    });
    let mut m = ModelConfig::new(kind, d, feature_dim);
    if let Some(p) = a.dropout {
        m.dropout = p;
    }
    if let Some(h) = &a.mlp_hidden {
        m.mlp_hidden = h.clone();
    }
    if let Some(p) = a.mlp_dropout {
        m.mlp_dropout = p;
    }
    m.init = a.init.into();
    m.seed = ctx.seed("init");
    m
}

fn train_config(ctx: &Ctx, kind: ModelKind, a: &TrainArgs) -> Result<TrainConfig> {
    let natural = LossKind::for_model(kind).with_context(|| format!("model {kind} is not trainable"))?;
    let loss = a.loss.map(LossKind::from).unwrap_or(natural);
    if loss != natural {
        return Err(brie_core::Error::InvalidConfig(format!(
            "model {kind} trains with {natural} loss, not {loss}"
        ))
        .into());
    }
    Ok(TrainConfig {
        loss,
        lr: a.lr,
        batch_size: a.batch_size,
        max_epochs: a.epochs,
        early_stop: EarlyStopConfig {
            enabled: a.early_stop,
            patience: a.patience,
            min_delta: a.min_delta,
            cap: a.epoch_cap,
        },
        seed: ctx.seed("sampler"),
        power: PowerModel { watts: a.watts, grams_per_joule: a.grams_per_kwh / 3.6e6 },
        exec: ctx.exec,
    })
}

/// Train, recording validation MAUC when early stopping drives the run and
/// test MAUC per epoch when `trace` is set.
fn run_training(
    ctx: &Ctx,
    data: &Data,
    model: &ModelConfig,
    cfg: &TrainConfig,
    trace: bool,
) -> Result<(TrainOutcome, Vec<Option<f64>>)> {
    let val = if cfg.early_stop.enabled { build_cases(&data.corpus, &data.split, Split::Val) } else { Vec::new() };
    if cfg.early_stop.enabled && val.is_empty() {
        bail!(brie_core::Error::InvalidSplit("early stopping needs validation interactions".into()));
    }
    let test = if trace { build_test_cases(&data.corpus, &data.split) } else { Vec::new() };
    let mut test_mauc = Vec::new();
    let outcome = train_with_monitor(&data.corpus, &data.split, model, cfg, |_, params| {
        if !trace && !cfg.early_stop.enabled {
            return Ok(None);
        }
        let scorer = LearnedScorer::new(params, &data.corpus, ctx.exec)?;
        if trace {
            test_mauc.push(mean_auc(&test, &scorer, ctx.exec)?);
        }
        if cfg.early_stop.enabled {
            mean_auc(&val, &scorer, ctx.exec)
        } else {
            Ok(None)
        }
    })?;
    Ok((outcome, test_mauc))
}

fn train_cmd(ctx: &Ctx, c: &TrainCmd) -> Result<serde_json::Value> {
    let data = load_data(ctx, &c.data)?;
    let cfg = train_config(ctx, c.model, &c.train)?;
    let model = model_config(ctx, c.model, &c.model_args, data.corpus.feature_dim());
    let (outcome, _) = run_training(ctx, &data, &model, &cfg, false)?;
    save_artifact(&outcome.params, c.out.join("model.bin"))?;
    write_lines(&c.out.join("train_log.jsonl"), outcome.epochs.iter().map(|e| serde_json::to_string(e).unwrap()))?;
    if let Some(last) = outcome.epochs.last() {
        println!(
            "{}: {} epochs, final train loss {:.6}, {:.2}s{}",
            c.model,
            outcome.epochs.len(),
            last.train_loss,
            last.cumulative_seconds,
            outcome.best_epoch.map(|b| format!(", restored epoch {b}")).unwrap_or_default()
        );
    }
    Ok(json!({
        "data": data.source,
        "model": model,
        "train": cfg,
        "params": outcome.params.num_params(),
        "best_epoch": outcome.best_epoch,
        "stopped_early": outcome.stopped_early,
    }))
}

fn eval_config(ctx: &Ctx, a: &EvalArgs) -> EvalConfig {
    EvalConfig { k: a.k, min_activity: a.min_activity, min_candidates: a.min_candidates, exec: ctx.exec }
}

fn baseline<'a>(ctx: &Ctx, kind: ModelKind, data: &'a Data) -> Box<dyn Scorer + 'a> {
    match kind {
        ModelKind::Rnd => Box::new(RandomScorer { seed: ctx.seed("eval") }),
        _ => Box::new(CentroidScorer::new(&data.corpus, &data.split)),
    }
}

fn eval_cmd(ctx: &Ctx, c: &EvalCmd) -> Result<serde_json::Value> {
    let data = load_data(ctx, &c.data)?;
    let params: Option<ModelParams<f32>> = c.artifact.as_ref().map(load_artifact).transpose()?;
    let kind = match (&params, c.model) {
        (Some(p), Some(k)) if p.config.kind != k => {
            return Err(brie_core::Error::InvalidConfig(format!(
                "artifact holds a {} model, not {k}",
                p.config.kind
            ))
            .into())
        }
        (Some(p), _) => p.config.kind,
        (None, Some(k)) if k.is_learned() => {
            return Err(brie_core::Error::InvalidConfig(format!("model {k} needs --artifact")).into())
        }
        (None, Some(k)) => k,
        (None, None) => unreachable!("clap requires --model or --artifact"),
    };
    let scorer: Box<dyn Scorer + '_> = match &params {
        Some(p) => Box::new(LearnedScorer::new(p, &data.corpus, ctx.exec)?),
        None => baseline(ctx, kind, &data),
    };
    let cases = build_test_cases(&data.corpus, &data.split);
    let cfg = eval_config(ctx, &c.eval);
    let ev = evaluate(&cases, scorer.as_ref(), &cfg)?;
    write_reports(&c.out, kind, &ev.report)?;
    if let Some(thresholds) = &c.eval.sweep {
        write_sweep(&activity_sweep(&cases, &ev.ranked, thresholds)?, c.out.join("sweep.tsv"))?;
    }
    if c.eval.dump_cases {
        write_case_dump(&ev.ranked, c.out.join("cases.tsv"))?;
    }
    println!("{}", ev.report.tsv_header());
    println!("{}", ev.report.tsv_row(kind.name()));
    Ok(json!({ "data": data.source, "model": kind, "eval": cfg_json(&cfg), "cases": cases.len() }))
}

fn cfg_json(cfg: &EvalConfig) -> serde_json::Value {
    json!({ "k": cfg.k, "min_activity": cfg.min_activity, "min_candidates": cfg.min_candidates })
}

fn write_reports(out: &Path, kind: ModelKind, report: &MetricReport) -> Result<()> {
    write_json(&out.join("report.json"), &json!({ "model": kind, "report": report }))?;
    write_report_tsv(report, kind.name(), out.join("report.tsv"))?;
    Ok(())
}

const BENCH_PREFIX: &str = "model\td\tparams\tepochs\ttrain_seconds\tenergy_j\tco2_g";

fn benchmark(ctx: &Ctx, c: &BenchmarkCmd) -> Result<serde_json::Value> {
    let data = load_data(ctx, &c.data)?;
    let cases = build_test_cases(&data.corpus, &data.split);
    let cfg = eval_config(ctx, &c.eval);
    let mut rows = Vec::new();
    let mut header = None;
    let mut resolved = Vec::new();
    for &kind in &c.models {
        let started = Instant::now();
        let (row_prefix, report) = if kind.is_learned() {
            let tcfg = train_config(ctx, kind, &c.train)?;
            let model = model_config(ctx, kind, &c.model_args, data.corpus.feature_dim());
            let (outcome, test_mauc) = run_training(ctx, &data, &model, &tcfg, true)?;
            write_trace(&c.out.join(format!("trace_{}.tsv", kind.name())), &outcome, &test_mauc)?;
            let scorer = LearnedScorer::new(&outcome.params, &data.corpus, ctx.exec)?;
            let report = evaluate(&cases, &scorer, &cfg)?.report;
            let last = outcome.epochs.last();
            resolved.push(json!({ "model": model, "train": tcfg, "best_epoch": outcome.best_epoch }));
            (
                format!(
                    "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}",
                    kind.name(),
                    model.d,
                    count_params(&model, data.corpus.n_users() as u64),
                    outcome.epochs.len(),
                    last.map_or(0.0, |e| e.cumulative_seconds),
                    last.map_or(0.0, |e| e.cumulative_energy_j),
                    last.map_or(0.0, |e| e.cumulative_co2_g),
                ),
                report,
            )
        } else {
            let report = evaluate(&cases, baseline(ctx, kind, &data).as_ref(), &cfg)?.report;
            resolved.push(json!({ "model": kind }));
            (format!("{}\t0\t0\t0\t0.000000\t0.000000\t0.000000", kind.name()), report)
        };
        log::info!("{kind}: done in {:.2}s", started.elapsed().as_secs_f64());
        header.get_or_insert_with(|| report.tsv_header());
        // the report row starts with the model name, already in the prefix
        let metrics = report.tsv_row(kind.name());
        let metrics = metrics.split_once('\t').map_or("", |(_, rest)| rest);
        rows.push(format!("{row_prefix}\t{metrics}"));
    }
    let header = header.unwrap_or_default();
    let metric_cols = header.split_once('\t').map_or("", |(_, rest)| rest);
    let full_header = format!("{BENCH_PREFIX}\t{metric_cols}");
    write_lines(&c.out.join("benchmark.tsv"), std::iter::once(full_header.clone()).chain(rows.iter().cloned()))?;
    println!("{full_header}");
    for r in &rows {
        println!("{r}");
    }
    Ok(json!({ "data": data.source, "eval": cfg_json(&cfg), "models": resolved, "cases": cases.len() }))
}

fn write_trace(path: &Path, outcome: &TrainOutcome, test_mauc: &[Option<f64>]) -> Result<()> {
    let fmt = |v: Option<f64>| v.map_or("null".to_string(), |x| format!("{x:.6}"));
    let header = "epoch\tcumulative_seconds\ttrain_loss\ttest_mauc\tval_mauc\tcumulative_energy_j\tcumulative_co2_g";
    let rows = outcome.epochs.iter().enumerate().map(|(i, e)| {
        format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{:.6}\t{:.6}",
            e.epoch,
            e.cumulative_seconds,
            e.train_loss,
            fmt(test_mauc.get(i).copied().flatten()),
            fmt(e.val_mauc),
            e.cumulative_energy_j,
            e.cumulative_co2_g
        )
    });
    write_lines(path, std::iter::once(header.to_string()).chain(rows))
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut w = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
