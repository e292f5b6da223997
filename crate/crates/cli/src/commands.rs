use std::collections::BTreeMap;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::{Duration, Instant};

use anyhow::{bail, Context as _, Result};
use serde_json::json;

use mibids_core::dataset::{load_csv, load_unlabeled_csv, split, write_csv};
use mibids_core::eval::{ConfusionMatrix, EvalReport};
use mibids_core::features::{rank_features, select_group, select_top_k, GroupCatalog};
use mibids_core::model::{dataset_fingerprint, fit, ModelKind, SplitInfo, TrainParams, TrainedModel};
use mibids_core::snmp::{deltas, load_fixture, poll, write_delta_csv, PollConfig, SnmpError, StubAgent};
use mibids_core::synth::{default_scenario, generate, ScenarioSpec};

use crate::args::*;
use crate::usage;

pub const DEFAULT_SEED: u64 = 42;

pub struct Context {
    /// Seed given on the command line or in the config file.
    pub seed: Option<u64>,
    pub quiet: bool,
    pub report: Option<PathBuf>,
    pub cfg: Config,
}

impl Context {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn write_report(&self, value: &serde_json::Value) -> Result<()> {
        if let Some(path) = &self.report {
            let text = serde_json::to_string_pretty(value)?;
            write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))?;
        }
        Ok(())
    }
}

pub fn run(cmd: Command, ctx: &Context) -> Result<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(a, ctx),
        Command::Train(a) => cmd_train(a, ctx),
        Command::Evaluate(a) => cmd_evaluate(a, ctx),
        Command::Predict(a) => cmd_predict(a, ctx),
        Command::Collect(a) => cmd_collect(a, ctx),
        Command::Inspect(a) => cmd_inspect(a, ctx),
        Command::StubAgent(a) => cmd_stub_agent(a, ctx),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed command never leaves a partial file.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating file in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn cmd_generate(a: GenerateArgs, ctx: &Context) -> Result<()> {
    let file = if a.default { None } else { a.scenario.or_else(|| ctx.cfg.generate.scenario.clone()) };
    let mut spec = match &file {
        Some(path) => ScenarioSpec::load(path)?,
        None => default_scenario(),
    };
    if let Some(seed) = ctx.seed {
        spec.seed = seed;
    }
    let d = generate(&spec)?;
    write_atomic(&a.out, |w| Ok(write_csv(&d, w)?))?;

    let counts: BTreeMap<&str, usize> = d.classes().iter().map(String::as_str).zip(d.class_counts()).collect();
    ctx.say(format!("wrote {} records ({} classes, seed {}) to {}", d.len(), d.n_classes(), spec.seed, a.out.display()));
    for (name, n) in d.classes().iter().zip(d.class_counts()) {
        ctx.say(format!("  {name:<12} {n}"));
    }
    ctx.write_report(&json!({
        "command": "generate",
        "records": d.len(),
        "seed": spec.seed,
        "class_counts": counts,
    }))
}

fn train_params(a: &TrainArgs, c: &TrainConfig, seed: u64) -> Result<TrainParams> {
    let mut p = TrainParams::default().with_seed(seed);
    if let Some(v) = a.trees.or(c.trees) {
        p.forest.n_trees = v;
    }
    if let Some(v) = a.features.or(c.features) {
        p.forest.feature_sample_size = Some(v);
    }
    if let Some(v) = a.rounds.or(c.rounds) {
        p.boost.n_rounds = v;
    }
    if let Some(v) = a.epochs.or(c.epochs) {
        p.mlp.epochs = v;
    }
    if let Some(v) = a.learning_rate.or(c.learning_rate) {
        p.mlp.learning_rate = v;
    }
    if let Some(v) = a.momentum.or(c.momentum) {
        p.mlp.momentum = v;
    }
    if let Some(v) = a.hidden.or(c.hidden) {
        p.mlp.hidden_units = Some(v);
    }
    if let Some(v) = a.min_leaf.or(c.min_leaf) {
        p.tree.min_leaf_weight = v;
        p.forest.min_leaf_weight = v;
    }
    if a.no_prune {
        p.tree.pruning = false;
    } else if let Some(v) = c.prune {
        p.tree.pruning = v;
    }
    if let Some(v) = a.confidence.or(c.confidence) {
        p.tree.prune_confidence = v;
    }
    if a.no_parallel {
        p.forest.parallel = false;
    } else if let Some(v) = c.parallel {
        p.forest.parallel = v;
    }
    if a.no_normalize || c.normalize == Some(false) {
        p.normalize = Some(false);
    }
    Ok(p)
}

fn cmd_train(a: TrainArgs, ctx: &Context) -> Result<()> {
    let c = &ctx.cfg.train;
    let kind: ModelKind = a
        .model
        .clone()
        .or_else(|| c.model.clone())
        .ok_or_else(|| usage("--model is required (tree, forest, adaboost or mlp)"))?
        .parse()?;
    let fraction = a.split.or(c.split).unwrap_or(0.7);
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(usage(format!("--split must lie strictly between 0 and 1, got {fraction}")));
    }
    let stratified = a.stratified || c.stratified.unwrap_or(false);
    let seed = ctx.seed();
    let params = train_params(&a, c, seed)?;

    let mut groups = GroupCatalog::default();
    if let Some(path) = a.groups_file.as_ref().or(c.groups_file.as_ref()) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        groups.extend_from_toml(&text)?;
    }
    let group_name = a.group.clone().or_else(|| c.group.clone()).unwrap_or_else(|| "interface".into());
    let group = groups.get(&group_name)?.clone();

    let full = load_csv(&a.data, None)?;
    let selected = select_group(&full, &group)?;
    let (mut train, mut test) = split(&selected, fraction, seed, stratified)?;
    let mut selection = group.name.clone();
    if let Some(k) = a.top_k.or(c.top_k) {
        let ranking = rank_features(&train)?;
        train = select_top_k(&train, &ranking, k)?;
        test = test.project(train.schema())?;
        selection = format!("{}:top{k}", group.name);
    }

    let start = Instant::now();
    let mut model = fit(kind, &train, &params)?;
    let secs = start.elapsed().as_secs_f64();
    model.fingerprint = dataset_fingerprint(&full);
    model.split = Some(SplitInfo {
        seed,
        train_fraction: fraction,
        stratified,
        group: selection,
    });
    let bytes = model.to_bytes();
    write_atomic(&a.out, |w| Ok(w.write_all(&bytes)?))?;

    let accuracy = if test.is_empty() {
        None
    } else {
        let predicted = model.predict_dataset(&test)?;
        let hits = predicted.iter().zip(test.records()).filter(|(p, r)| **p == r.label).count();
        Some(hits as f64 / test.len() as f64)
    };
    ctx.say(format!(
        "{kind}: train {} / test {} records, {} features, {} classes, test accuracy {}, {secs:.2} s",
        train.len(),
        test.len(),
        train.n_features(),
        train.n_classes(),
        accuracy.map_or("n/a".to_string(), |a| format!("{a:.4}")),
    ));
    ctx.write_report(&json!({
        "command": "train",
        "kind": kind.as_str(),
        "train_records": train.len(),
        "test_records": test.len(),
        "features": train.schema().names(),
        "test_accuracy": accuracy,
        "seconds": secs,
        "config": model.config.iter().cloned().collect::<BTreeMap<_, _>>(),
    }))
}

fn cmd_evaluate(a: EvaluateArgs, ctx: &Context) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let mut data = load_csv(&a.data, None)?;
    if a.heldout {
        let Some(s) = &model.split else {
            return Err(usage("model records no training split; evaluate without --heldout"));
        };
        if dataset_fingerprint(&data) != model.fingerprint {
            bail!(
                "{} is not the dataset this model was trained on (fingerprint {} expected)",
                a.data.display(),
                model.fingerprint_hex()
            );
        }
        data = split(&data, s.train_fraction, s.seed, s.stratified)?.1;
        if data.is_empty() {
            bail!("the recorded split leaves no held-out records");
        }
    }
    let data = data.relabel(&model.classes);
    let predicted = model.predict_dataset(&data)?;
    let cm = ConfusionMatrix::from_indices(data.classes().to_vec(), &data.labels(), &predicted)?;
    let report = EvalReport::from_matrix(cm)?;
    print!("{report}");

    if let Some(path) = &a.predictions {
        write_atomic(path, |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["actual", "predicted"])?;
            for (r, p) in data.records().iter().zip(&predicted) {
                out.write_record([data.label_name(r), model.classes[*p].as_str()])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    if let Some(path) = &ctx.report {
        write_atomic(path, |w| Ok(w.write_all(report.to_json().as_bytes())?))?;
    }
    Ok(())
}

fn cmd_predict(a: PredictArgs, ctx: &Context) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let table = load_unlabeled_csv(&a.input)?;
    let predicted = model.predict_rows(&table.schema, &table.rows)?;
    let stdout = io::stdout();
    let mut out = csv::Writer::from_writer(stdout.lock());
    let mut header: Vec<&str> = table.schema.names().iter().map(String::as_str).collect();
    header.push(mibids_core::dataset::CLASS_COLUMN);
    out.write_record(&header)?;
    for (cells, p) in table.raw.iter().zip(&predicted) {
        let mut row: Vec<&str> = cells.iter().map(String::as_str).collect();
        row.push(&model.classes[*p]);
        out.write_record(&row)?;
    }
    out.flush()?;
    let mut counts = vec![0usize; model.classes.len()];
    for p in &predicted {
        counts[*p] += 1;
    }
    ctx.write_report(&json!({
        "command": "predict",
        "rows": predicted.len(),
        "class_counts": model.classes.iter().map(String::as_str).zip(counts).collect::<BTreeMap<_, _>>(),
    }))
}

fn seconds(flag: &str, v: f64) -> Result<Duration> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(usage(format!("--{flag} must be a positive number of seconds, got {v}")));
    }
    Ok(Duration::from_secs_f64(v))
}

fn cmd_collect(a: CollectArgs, ctx: &Context) -> Result<()> {
    let c = &ctx.cfg.collect;
    let defaults = PollConfig::default();
    let agent = a
        .agent
        .clone()
        .or_else(|| c.agent.clone())
        .ok_or_else(|| usage("--agent is required"))?;
    let interval = seconds("interval", a.interval.or(c.interval).unwrap_or(defaults.interval.as_secs_f64()))?;
    let count = match (a.count, a.duration) {
        (Some(n), _) => n,
        (None, Some(d)) => (seconds("duration", d)?.as_secs_f64() / interval.as_secs_f64()).floor() as usize,
        (None, None) => match (c.count, c.duration) {
            (Some(n), _) => n,
            (None, Some(d)) => (seconds("duration", d)?.as_secs_f64() / interval.as_secs_f64()).floor() as usize,
            (None, None) => defaults.count,
        },
    };
    if count < 2 {
        return Err(usage(format!("need at least 2 polls to form a delta, got {count}")));
    }
    let cfg = PollConfig {
        agent,
        community: a.community.clone().or_else(|| c.community.clone()).unwrap_or(defaults.community),
        if_index: a.if_index.or(c.if_index).unwrap_or(defaults.if_index),
        interval,
        count,
        timeout: seconds("timeout", a.timeout.or(c.timeout).unwrap_or(defaults.timeout.as_secs_f64()))?,
        retries: a.retries.or(c.retries).unwrap_or(defaults.retries),
        max_failures: a.max_failures.or(c.max_failures).unwrap_or(defaults.max_failures).max(1),
    };

    let mut samples = Vec::with_capacity(count);
    for s in poll(cfg)? {
        samples.push(s?);
    }
    if samples.len() < 2 {
        return Err(SnmpError::Transport(format!(
            "only {} of {count} polls returned complete samples; no deltas to write",
            samples.len()
        ))
        .into());
    }
    let rows = deltas(&samples);
    write_atomic(&a.out, |w| Ok(write_delta_csv(&rows, w)?))?;
    let substituted = samples.iter().filter(|s| !s.substituted.is_empty()).count();
    ctx.say(format!(
        "{} of {count} polls complete, {} delta rows written to {}",
        samples.len(),
        rows.len(),
        a.out.display()
    ));
    ctx.write_report(&json!({
        "command": "collect",
        "polls": count,
        "samples": samples.len(),
        "rows": rows.len(),
        "samples_with_substitutions": substituted,
    }))
}

fn cmd_inspect(a: InspectArgs, ctx: &Context) -> Result<()> {
    let m = TrainedModel::load(&a.model)?;
    println!("kind:        {}", m.kind());
    println!("features:    {}", m.schema.names().join(", "));
    println!("classes:     {}", m.classes.join(", "));
    println!("normalized:  {}", if m.normalizer.is_some() { "yes" } else { "no" });
    println!("fingerprint: {}", m.fingerprint_hex());
    if let Some(s) = &m.split {
        println!(
            "split:       seed {}, train fraction {}, {}, features {}",
            s.seed,
            s.train_fraction,
            if s.stratified { "stratified" } else { "shuffled" },
            s.group
        );
    }
    for (k, v) in &m.config {
        println!("  {k} = {v}");
    }
    ctx.write_report(&json!({
        "command": "inspect",
        "kind": m.kind().as_str(),
        "features": m.schema.names(),
        "classes": m.classes,
        "normalized": m.normalizer.is_some(),
        "fingerprint": m.fingerprint_hex(),
        "config": m.config.iter().cloned().collect::<BTreeMap<_, _>>(),
    }))
}

fn cmd_stub_agent(a: StubArgs, _ctx: &Context) -> Result<()> {
    let rows = load_fixture(&a.fixture)?;
    let agent = StubAgent::bind(&a.bind, rows)
        .map_err(|e| SnmpError::Transport(format!("binding {}: {e}", a.bind)))?
        .community(&a.community)
        .if_index(a.if_index);
    println!("listening on {}", agent.local_addr()?);
    io::stdout().flush()?;
    agent.serve(&AtomicBool::new(false));
    Ok(())
}
