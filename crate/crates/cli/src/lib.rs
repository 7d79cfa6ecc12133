//! Subcommands of the `hierclass` binary.
//!
//! Every command reads its inputs, does its work and writes to the given
//! output stream; `main` only maps [`CliError`] to an exit code.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hierclass::evaluation::{self, render_json, render_table};
use hierclass::fnv::fnv1a64;
use hierclass::hierloss;
use hierclass::taxonomy::{NodeId, Taxonomy};
use hierclass::textmodel::{LossKind, Model};
use hierclass::trainer::{self, Corpus, TrainError, TrainingConfig};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag values.
    Usage(anyhow::Error),
    /// Unreadable, malformed or mutually inconsistent inputs.
    Data(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::Data(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Data(e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "hierclass",
    version,
    about = "Hierarchical text classification with an ultrametric win"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a `__label__` corpus.
    Train(TrainArgs),
    /// Evaluate a model and print the metric table.
    Test(TestArgs),
    /// Decode one leaf per line of standard input.
    Predict(PredictArgs),
    /// Summarize a taxonomy and check corpus labels against it.
    TaxonomyCheck(CheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub loss: LossKind,
    #[arg(long)]
    pub lr: f64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epoch: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub bucket: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub thread: u64,
    #[arg(long, default_value_t = 1)]
    pub min_count: u64,
    /// Largest tolerated fraction of samples whose label is not a leaf.
    #[arg(long, default_value_t = 0.0)]
    pub max_unresolved: f64,
    /// Add an `<node>/other` leaf under every internal node first.
    #[arg(long)]
    pub augment_other: bool,
    /// Manifest path; defaults to `<output>.manifest.toml`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub augment_other: bool,
    /// Also write the report as one JSON line.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the run manifest here instead of to the log.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Row label in the table; defaults to the model's loss kind.
    #[arg(long)]
    pub run_name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub augment_other: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub taxonomy: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub augment_other: bool,
}

/// Everything needed to re-run a train or test invocation.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub code_version: String,
    pub wall_time_secs: f64,
    pub seed: Option<u64>,
    pub augment_other: bool,
    pub taxonomy: FileDigest,
    pub corpus: FileDigest,
    pub model: Option<FileDigest>,
    pub taxonomy_checksum: String,
    pub config: Option<TrainingConfig>,
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub fnv1a64: String,
}

impl FileDigest {
    fn of(path: &Path, bytes: &[u8]) -> Self {
        FileDigest {
            path: path.display().to_string(),
            fnv1a64: hex(fnv1a64(bytes)),
        }
    }
}

fn hex(x: u64) -> String {
    format!("{x:016x}")
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn utf8(path: &Path, bytes: Vec<u8>) -> anyhow::Result<String> {
    String::from_utf8(bytes).with_context(|| format!("{} is not valid UTF-8", path.display()))
}

fn load_taxonomy_text(path: &Path, text: &str, augment: bool) -> anyhow::Result<Taxonomy> {
    let t = Taxonomy::parse(text).with_context(|| format!("taxonomy {}", path.display()))?;
    if augment {
        return t
            .augment_with_other()
            .with_context(|| format!("augmenting {}", path.display()));
    }
    Ok(t)
}

fn load_taxonomy(path: &Path, augment: bool) -> anyhow::Result<Taxonomy> {
    let text = utf8(path, read(path)?)?;
    load_taxonomy_text(path, &text, augment)
}

fn load_corpus(path: &Path, bytes: Vec<u8>) -> anyhow::Result<Corpus> {
    let text = utf8(path, bytes)?;
    let corpus = Corpus::parse(&text).with_context(|| format!("corpus {}", path.display()))?;
    if corpus.multi_label > 0 {
        log::warn!(
            "{}: dropped {} multi-label lines",
            path.display(),
            corpus.multi_label
        );
    }
    Ok(corpus)
}

fn load_model(path: &Path) -> anyhow::Result<Model> {
    Model::load(path).with_context(|| format!("model {}", path.display()))
}

fn write_manifest(manifest: &RunManifest, path: Option<&Path>) -> anyhow::Result<()> {
    let text = toml::to_string(manifest).context("serializing manifest")?;
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            log::info!("run manifest:\n{text}");
            Ok(())
        }
    }
}

fn command_line() -> Vec<String> {
    std::env::args().collect()
}

/// Appends `suffix` to the full file name, keeping any extension.
fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn cmd_train(args: &TrainArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = TrainingConfig {
        loss_kind: args.loss,
        lr0: args.lr,
        epochs: args.epoch as usize,
        dim: args.dim as usize,
        buckets: args.bucket as usize,
        seed: args.seed,
        threads: args.thread as usize,
        min_count: args.min_count,
        max_unresolved_fraction: args.max_unresolved,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.into()))?;

    let tax_bytes = read(&args.taxonomy)?;
    let tax_digest = FileDigest::of(&args.taxonomy, &tax_bytes);
    let t = load_taxonomy_text(
        &args.taxonomy,
        &utf8(&args.taxonomy, tax_bytes)?,
        args.augment_other,
    )?;
    let corpus_bytes = read(&args.input)?;
    let corpus_digest = FileDigest::of(&args.input, &corpus_bytes);
    let corpus = load_corpus(&args.input, corpus_bytes)?;

    let trained = trainer::train(&corpus, &t, &cfg).map_err(|e| match e {
        TrainError::Config(_) => CliError::Usage(e.into()),
        other => CliError::Data(
            anyhow::Error::new(other).context(format!("training on {}", args.input.display())),
        ),
    })?;
    for entry in &trained.log {
        writeln!(err, "{entry}").context("writing epoch log")?;
    }
    if trained.unresolved > 0 {
        log::warn!(
            "skipped {} samples with unresolvable labels",
            trained.unresolved
        );
    }

    let mut model_bytes = Vec::new();
    trained
        .model
        .write_to(&mut model_bytes)
        .context("serializing model")?;
    fs::write(&args.output, &model_bytes)
        .with_context(|| format!("cannot write {}", args.output.display()))?;

    let manifest = RunManifest {
        command_line: command_line(),
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        seed: Some(args.seed),
        augment_other: args.augment_other,
        taxonomy: tax_digest,
        corpus: corpus_digest,
        model: Some(FileDigest::of(&args.output, &model_bytes)),
        taxonomy_checksum: hex(t.checksum()),
        config: Some(cfg),
    };
    let path = args
        .manifest
        .clone()
        .unwrap_or_else(|| sidecar(&args.output, ".manifest.toml"));
    write_manifest(&manifest, Some(&path))?;
    Ok(())
}

pub fn cmd_test(args: &TestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let started = Instant::now();
    let tax_bytes = read(&args.taxonomy)?;
    let tax_digest = FileDigest::of(&args.taxonomy, &tax_bytes);
    let t = load_taxonomy_text(
        &args.taxonomy,
        &utf8(&args.taxonomy, tax_bytes)?,
        args.augment_other,
    )?;
    let model_bytes = read(&args.model)?;
    let model_digest = FileDigest::of(&args.model, &model_bytes);
    let model = Model::read_from(&mut model_bytes.as_slice())
        .with_context(|| format!("model {}", args.model.display()))?;
    let corpus_bytes = read(&args.input)?;
    let corpus_digest = FileDigest::of(&args.input, &corpus_bytes);
    let corpus = load_corpus(&args.input, corpus_bytes)?;

    let resolved = corpus.resolve(&t);
    for (line, e) in resolved.unresolved.iter().take(5) {
        log::warn!("{} line {line}: {e}", args.input.display());
    }
    if !resolved.unresolved.is_empty() {
        log::warn!(
            "skipped {} of {} samples with unresolvable labels",
            resolved.unresolved.len(),
            corpus.len()
        );
    }
    let report = evaluation::evaluate(&model, &t, &resolved.samples).with_context(|| {
        format!(
            "evaluating {} on {}",
            args.model.display(),
            args.input.display()
        )
    })?;

    let name = args
        .run_name
        .clone()
        .unwrap_or_else(|| model.loss_kind().to_string());
    let runs = [(name, report)];
    out.write_all(render_table(&runs).as_bytes())
        .context("writing report")?;
    if let Some(path) = &args.json {
        fs::write(path, render_json(&runs))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }

    let manifest = RunManifest {
        command_line: command_line(),
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_time_secs: started.elapsed().as_secs_f64(),
        seed: None,
        augment_other: args.augment_other,
        taxonomy: tax_digest,
        corpus: corpus_digest,
        model: Some(model_digest),
        taxonomy_checksum: hex(t.checksum()),
        config: None,
    };
    write_manifest(&manifest, args.manifest.as_deref())?;
    Ok(())
}

fn path_string(t: &Taxonomy, path: &[NodeId]) -> String {
    path.iter()
        .map(|&n| t.name(n))
        .collect::<Vec<_>>()
        .join("/")
}

/// One output line per input line: `name confidence root/.../name`, plus
/// `empty_features` when the line yields no features.
pub fn cmd_predict(
    args: &PredictArgs,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let t = load_taxonomy(&args.taxonomy, args.augment_other)?;
    let model = load_model(&args.model)?;
    let expected = match model.loss_kind() {
        LossKind::Coarse => t.coarsest_classes().len(),
        _ => t.leaf_count(),
    };
    if model.taxonomy_checksum() != t.checksum() || model.classes() != expected {
        return Err(CliError::Data(anyhow::anyhow!(
            "model {} was trained against a different taxonomy than {}",
            args.model.display(),
            args.taxonomy.display()
        )));
    }

    let mut line = String::new();
    loop {
        line.clear();
        if input
            .read_line(&mut line)
            .context("reading standard input")?
            == 0
        {
            break;
        }
        let feats = model.featurize_text(&line);
        let p = hierloss::softmax(&model.forward(&feats));
        let (node, mass) = if model.loss_kind() == LossKind::Coarse {
            let best = p
                .iter()
                .enumerate()
                .fold(0, |b, (i, &x)| if x > p[b] { i } else { b });
            (t.coarsest_classes()[best], p[best])
        } else {
            let leaf = hierloss::decode_best_leaf(&t, &p).context("decoding")?;
            (t.leaf_node(leaf).context("decoding")?, p[leaf])
        };
        let mut path = vec![node];
        while let Some(parent) = t.parent(*path.last().expect("nonempty")) {
            path.push(parent);
        }
        path.reverse();
        let flag = if feats.is_empty() {
            " empty_features"
        } else {
            ""
        };
        writeln!(
            out,
            "{} {mass:.6} {}{flag}",
            t.name(node),
            path_string(&t, &path)
        )
        .context("writing prediction")?;
    }
    Ok(())
}

pub fn cmd_taxonomy_check(args: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let t = load_taxonomy(&args.taxonomy, args.augment_other)?;
    let parents = if t.is_flat() {
        "1(root)".to_owned()
    } else {
        t.leaf_parents().len().to_string()
    };
    let mut report = format!(
        "coarsest={} parents={parents} leaves={} depth={}\nnodes={}\n",
        t.coarsest_classes().len(),
        t.leaf_count(),
        t.depth(),
        t.node_count()
    );
    if let Some(path) = &args.corpus {
        let corpus = load_corpus(path, read(path)?)?;
        let resolved = corpus.resolve(&t);
        report.push_str(&format!(
            "samples={} multi_label_dropped={} unresolved={}\n",
            corpus.len(),
            corpus.multi_label,
            resolved.unresolved.len()
        ));
        for (line, e) in &resolved.unresolved {
            report.push_str(&format!("unresolved\tline {line}\t{e}\n"));
        }
    }
    out.write_all(report.as_bytes()).context("writing report")?;
    Ok(())
}

pub fn run(
    cli: &Cli,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, err),
        Command::Test(a) => cmd_test(a, out),
        Command::Predict(a) => cmd_predict(a, input, out),
        Command::TaxonomyCheck(a) => cmd_taxonomy_check(a, out),
    }
}
