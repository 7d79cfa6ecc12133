//! SGD training over a labeled corpus.
//!
//! The learning rate starts at `lr0` and decays linearly to zero over the
//! global sample count `epochs * |corpus|`. Every epoch visits the samples
//! in a fresh seed-derived permutation.

use std::cell::UnsafeCell;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{Taxonomy, TaxonomyError};
use crate::textmodel::{tokenize, ModelError, Objective, Vocabulary};

pub use crate::textmodel::{LossKind, Model};

pub const LABEL_PREFIX: &str = "__label__";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid schedule: step {step} of {total}")]
    Schedule { step: usize, total: usize },
    #[error("corpus has no usable samples")]
    EmptyCorpus,
    #[error("{unresolved} of {total} samples have unresolvable labels (first: {first})")]
    UnresolvedLabels {
        unresolved: usize,
        total: usize,
        first: String,
    },
    #[error("non-finite loss at sample {sample}")]
    NonFiniteLoss { sample: usize },
    #[error("sample {sample}: {source}")]
    Step {
        sample: usize,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: missing `{LABEL_PREFIX}` label")]
    MissingLabel { line: usize },
}

/// One corpus line: a label name and its text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub label: String,
    pub text: String,
    /// 1-based line in the source file.
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    /// Lines carrying more than one label; these are dropped.
    pub multi_label: usize,
}

impl Corpus {
    /// Parses `__label__<name> token token ...` lines. Blank lines are
    /// skipped and multi-label lines are counted and dropped.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for (i, raw) in text.lines().enumerate() {
            let tokens = tokenize(raw);
            if tokens.is_empty() {
                continue;
            }
            let labels = tokens
                .iter()
                .take_while(|t| t.starts_with(LABEL_PREFIX))
                .count();
            match labels {
                0 => return Err(CorpusError::MissingLabel { line: i + 1 }),
                1 => corpus.samples.push(Sample {
                    label: tokens[0][LABEL_PREFIX.len()..].to_owned(),
                    text: tokens[1..].join(" "),
                    line: i + 1,
                }),
                _ => corpus.multi_label += 1,
            }
        }
        Ok(corpus)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Resolves labels to leaf ordinals of `t`.
    pub fn resolve(&self, t: &Taxonomy) -> Resolved {
        let mut out = Resolved::default();
        for s in &self.samples {
            match t.resolve_label(&s.label) {
                Ok(target) => out.samples.push(LabeledSample {
                    target,
                    text: s.text.clone(),
                }),
                Err(err) => out.unresolved.push((s.line, err)),
            }
        }
        out
    }
}

/// A sample whose label is a class ordinal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub target: usize,
    pub text: String,
}

#[derive(Debug, Clone, Default)]
pub struct Resolved {
    pub samples: Vec<LabeledSample>,
    /// `(line, reason)` for each rejected sample.
    pub unresolved: Vec<(usize, TaxonomyError)>,
}

/// Replaces each leaf label by the position of its coarsest ancestor among
/// the root's children.
pub fn map_labels_coarse(
    samples: &[LabeledSample],
    t: &Taxonomy,
) -> Result<Vec<LabeledSample>, TaxonomyError> {
    samples
        .iter()
        .map(|s| {
            Ok(LabeledSample {
                target: t.coarse_label(s.target)?,
                text: s.text.clone(),
            })
        })
        .collect()
}

/// `lr0 * (1 - step / total)`.
pub fn lr_at(step: usize, total_steps: usize, lr0: f64) -> Result<f64, TrainError> {
    if total_steps == 0 || step >= total_steps {
        return Err(TrainError::Schedule {
            step,
            total: total_steps,
        });
    }
    Ok(lr0 * (1.0 - step as f64 / total_steps as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub loss_kind: LossKind,
    pub lr0: f64,
    pub epochs: usize,
    pub dim: usize,
    pub buckets: usize,
    pub seed: u64,
    pub threads: usize,
    pub min_count: u64,
    /// Largest tolerated fraction of samples with unresolvable labels.
    pub max_unresolved_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            loss_kind: LossKind::Flat,
            lr0: 0.1,
            epochs: 5,
            dim: 20,
            buckets: 1_000_000,
            seed: 0,
            threads: 1,
            min_count: 1,
            max_unresolved_fraction: 0.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: &str| Err(TrainError::Config(msg.to_owned()));
        // lr0 = 0 is accepted so that a run can reproduce its initialization.
        if !(self.lr0.is_finite() && self.lr0 >= 0.0) {
            return fail("learning rate must be finite and non-negative");
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if self.buckets == 0 {
            return fail("bucket count must be at least 1");
        }
        if self.threads == 0 {
            return fail("thread count must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.max_unresolved_fraction) {
            return fail("unresolved fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr_end: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} loss={:.6} lr_end={:.6}",
            self.epoch, self.mean_loss, self.lr_end
        )
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Model,
    pub log: Vec<EpochLog>,
    /// Samples dropped for unresolvable labels (within the tolerated fraction).
    pub unresolved: usize,
}

/// Resolves labels, builds the vocabulary and runs SGD.
pub fn train(corpus: &Corpus, t: &Taxonomy, cfg: &TrainingConfig) -> Result<Trained, TrainError> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let resolved = corpus.resolve(t);
    let unresolved = resolved.unresolved.len();
    if unresolved as f64 > cfg.max_unresolved_fraction * corpus.len() as f64 {
        let (line, err) = &resolved.unresolved[0];
        return Err(TrainError::UnresolvedLabels {
            unresolved,
            total: corpus.len(),
            first: format!("line {line}: {err}"),
        });
    }
    let (samples, classes) = match cfg.loss_kind {
        LossKind::Coarse => (
            map_labels_coarse(&resolved.samples, t)?,
            t.coarsest_classes().len(),
        ),
        _ => (resolved.samples, t.leaf_count()),
    };
    if samples.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }

    let tokens: Vec<Vec<&str>> = samples.iter().map(|s| tokenize(&s.text)).collect();
    let vocab = Vocabulary::build(&tokens, cfg.min_count, cfg.buckets);
    let feats: Vec<Vec<usize>> = tokens.iter().map(|toks| vocab.featurize(toks)).collect();
    let targets: Vec<usize> = samples.iter().map(|s| s.target).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = Model::new(
        vocab,
        cfg.dim,
        classes,
        cfg.loss_kind,
        t.checksum(),
        &mut rng,
    );
    let objective = Objective::for_kind(cfg.loss_kind, t);

    let mut run = Run {
        feats: &feats,
        targets: &targets,
        objective: &objective,
        lr0: cfg.lr0,
        total: cfg.epochs * samples.len(),
    };
    let (model, log) = if cfg.threads == 1 {
        run.sequential(model, cfg.epochs, &mut rng)?
    } else {
        run.hogwild(model, cfg.epochs, cfg.threads, &mut rng)?
    };
    Ok(Trained {
        model,
        log,
        unresolved,
    })
}

struct Run<'a> {
    feats: &'a [Vec<usize>],
    targets: &'a [usize],
    objective: &'a Objective<'a>,
    lr0: f64,
    total: usize,
}

impl Run<'_> {
    fn step(
        &self,
        model: &mut Model,
        sample: usize,
        global_step: usize,
    ) -> Result<(f64, f64), TrainError> {
        let lr = lr_at(global_step, self.total, self.lr0)?;
        let loss = model
            .sgd_step(
                &self.feats[sample],
                self.targets[sample],
                lr,
                self.objective,
            )
            .map_err(|source| TrainError::Step { sample, source })?;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { sample });
        }
        Ok((loss, lr))
    }

    fn sequential(
        &mut self,
        mut model: Model,
        epochs: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Model, Vec<EpochLog>), TrainError> {
        let n = self.targets.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut log = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            order.shuffle(rng);
            let mut sum = 0.0;
            let mut lr_end = self.lr0;
            for (i, &sample) in order.iter().enumerate() {
                let (loss, lr) = self.step(&mut model, sample, epoch * n + i)?;
                sum += loss;
                lr_end = lr;
            }
            log.push(EpochLog {
                epoch: epoch + 1,
                mean_loss: sum / n as f64,
                lr_end,
            });
        }
        Ok((model, log))
    }

    /// Lock-free parallel SGD: workers update the shared parameters without
    /// synchronization. Each epoch's permutation is split into contiguous
    /// chunks, one per worker; the learning rate follows a shared step
    /// counter.
    fn hogwild(
        &mut self,
        model: Model,
        epochs: usize,
        threads: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Model, Vec<EpochLog>), TrainError> {
        let n = self.targets.len();
        let shared = Hogwild::new(model);
        let mut order: Vec<usize> = (0..n).collect();
        let mut log = Vec::with_capacity(epochs);
        let counter = AtomicUsize::new(0);
        let chunk = n.div_ceil(threads);
        for epoch in 0..epochs {
            order.shuffle(rng);
            let results: Vec<Result<(f64, f64), TrainError>> = std::thread::scope(|scope| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .map(|part| {
                        let shared = &shared;
                        let counter = &counter;
                        let this = &*self;
                        scope.spawn(move || {
                            let mut sum = 0.0;
                            let mut lr_end = this.lr0;
                            for &sample in part {
                                let step =
                                    counter.fetch_add(1, Ordering::Relaxed).min(this.total - 1);
                                // SAFETY: concurrent unsynchronized updates are the
                                // hogwild contract; no worker resizes the model.
                                let model = unsafe { shared.get_mut() };
                                let (loss, lr) = this.step(model, sample, step)?;
                                sum += loss;
                                lr_end = lr;
                            }
                            Ok((sum, lr_end))
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .collect()
            });
            let mut sum = 0.0;
            let mut lr_end = f64::INFINITY;
            for r in results {
                let (s, lr) = r?;
                sum += s;
                lr_end = lr_end.min(lr);
            }
            log.push(EpochLog {
                epoch: epoch + 1,
                mean_loss: sum / n as f64,
                lr_end,
            });
        }
        Ok((shared.into_inner(), log))
    }
}

/// Model shared between hogwild workers.
struct Hogwild(UnsafeCell<Model>);

// SAFETY: see `Run::hogwild`. Races only ever touch `f64` parameter entries.
unsafe impl Sync for Hogwild {}

impl Hogwild {
    fn new(model: Model) -> Self {
        Hogwild(UnsafeCell::new(model))
    }

    #[allow(clippy::mut_from_ref)]
    unsafe fn get_mut(&self) -> &mut Model {
        &mut *self.0.get()
    }

    fn into_inner(self) -> Model {
        self.0.into_inner()
    }
}
