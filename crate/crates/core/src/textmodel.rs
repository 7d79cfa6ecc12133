//! Linear text classifier in the style of fastText.
//!
//! A document is a bag of features: the ids of its in-vocabulary unigrams
//! plus one hashed bucket per adjacent token pair. The hidden vector is the
//! mean of the feature embeddings and the logits are a linear map of it.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fnv::{fnv1a64, fnv1a64_extend};
use crate::hierloss::{self, HierLossError, LossGrad};
use crate::taxonomy::Taxonomy;

/// Joins the two tokens of a bigram before hashing (ASCII unit separator).
pub const BIGRAM_SEPARATOR: u8 = 0x1f;

pub const MODEL_MAGIC: [u8; 4] = *b"HWIN";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("non-finite gradient for target {target}")]
    NonFiniteGradient { target: usize },
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error(transparent)]
    Loss(#[from] HierLossError),
}

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Cross-entropy over all leaves.
    Flat,
    /// `1 - normalized win`, full hierarchy.
    Raw,
    /// `-ln(normalized win)`, full hierarchy.
    Log,
    /// Cross-entropy over the coarsest classes only.
    Coarse,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Flat,
        LossKind::Raw,
        LossKind::Log,
        LossKind::Coarse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Flat => "flat",
            LossKind::Raw => "raw",
            LossKind::Log => "log",
            LossKind::Coarse => "coarse",
        }
    }

    fn code(self) -> u8 {
        match self {
            LossKind::Flat => 0,
            LossKind::Raw => 1,
            LossKind::Log => 2,
            LossKind::Coarse => 3,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        LossKind::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown loss `{s}` (expected flat, raw, log or coarse)"))
    }
}

/// Maps logits and a target class to a loss and its logit gradient.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    CrossEntropy,
    HierLog(&'a Taxonomy),
    HierRaw(&'a Taxonomy),
}

impl<'a> Objective<'a> {
    pub fn for_kind(kind: LossKind, taxonomy: &'a Taxonomy) -> Self {
        match kind {
            LossKind::Flat | LossKind::Coarse => Objective::CrossEntropy,
            LossKind::Log => Objective::HierLog(taxonomy),
            LossKind::Raw => Objective::HierRaw(taxonomy),
        }
    }

    pub fn loss_grad(&self, logits: &[f64], target: usize) -> Result<LossGrad, HierLossError> {
        match *self {
            Objective::CrossEntropy => hierloss::cross_entropy(logits, target),
            Objective::HierLog(t) => hierloss::loss_log(t, logits, target),
            Objective::HierRaw(t) => hierloss::loss_raw(t, logits, target),
        }
    }
}

/// Splits on runs of whitespace. No case folding.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

/// Bucket of the bigram `(first, second)` among `buckets`.
pub fn bigram_bucket(first: &str, second: &str, buckets: usize) -> usize {
    let h = fnv1a64(first.as_bytes());
    let h = fnv1a64_extend(h, &[BIGRAM_SEPARATOR]);
    let h = fnv1a64_extend(h, second.as_bytes());
    (h % buckets as u64) as usize
}

/// Exact unigram vocabulary plus the bigram bucket count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<(String, u64)>,
    index: HashMap<String, usize>,
    buckets: usize,
    min_count: u64,
}

impl Vocabulary {
    /// Counts tokens over `docs` and keeps those seen at least `min_count`
    /// times. Ids follow first occurrence.
    pub fn build<D, S>(docs: D, min_count: u64, buckets: usize) -> Self
    where
        D: IntoIterator,
        D::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: Vec<(String, u64)> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            for token in doc {
                let token = token.as_ref();
                match seen.get(token) {
                    Some(&i) => counts[i].1 += 1,
                    None => {
                        seen.insert(token.to_owned(), counts.len());
                        counts.push((token.to_owned(), 1));
                    }
                }
            }
        }
        counts.retain(|(_, c)| *c >= min_count);
        Self::from_words(counts, min_count, buckets)
    }

    fn from_words(words: Vec<(String, u64)>, min_count: u64, buckets: usize) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, (w, _))| (w.clone(), i))
            .collect();
        Vocabulary {
            words,
            index,
            buckets,
            min_count,
        }
    }

    /// Number of unigrams, `V`.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Number of bigram buckets, `B`.
    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// `V + B`, the number of embedding rows.
    pub fn feature_count(&self) -> usize {
        self.words.len() + self.buckets
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    /// Unigram ids of in-vocabulary tokens, then one bucket id per adjacent
    /// pair. Duplicates are kept.
    pub fn featurize<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        let v = self.words.len();
        let mut feats: Vec<usize> = tokens.iter().filter_map(|t| self.id(t.as_ref())).collect();
        if self.buckets > 0 {
            feats.extend(
                tokens
                    .windows(2)
                    .map(|w| v + bigram_bucket(w[0].as_ref(), w[1].as_ref(), self.buckets)),
            );
        }
        feats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    vocab: Vocabulary,
    dim: usize,
    classes: usize,
    loss_kind: LossKind,
    taxonomy_checksum: u64,
    // (V + B) x dim, row-major.
    embeddings: Vec<f64>,
    // dim x classes, row-major.
    output: Vec<f64>,
}

impl Model {
    /// Embeddings uniform in `[-1/dim, 1/dim]`, output matrix zero.
    pub fn new<R: Rng + ?Sized>(
        vocab: Vocabulary,
        dim: usize,
        classes: usize,
        loss_kind: LossKind,
        taxonomy_checksum: u64,
        rng: &mut R,
    ) -> Self {
        assert!(dim >= 1, "embedding dimension must be positive");
        let bound = 1.0 / dim as f64;
        let dist = Uniform::new_inclusive(-bound, bound);
        let embeddings = (0..vocab.feature_count() * dim)
            .map(|_| dist.sample(rng))
            .collect();
        Model {
            vocab,
            dim,
            classes,
            loss_kind,
            taxonomy_checksum,
            embeddings,
            output: vec![0.0; dim * classes],
        }
    }

    /// Builds a model from explicit parameter matrices.
    pub fn from_parameters(
        vocab: Vocabulary,
        dim: usize,
        classes: usize,
        loss_kind: LossKind,
        taxonomy_checksum: u64,
        embeddings: Vec<f64>,
        output: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::Format("embedding dimension is zero".into()));
        }
        if embeddings.len() != vocab.feature_count() * dim {
            return Err(ModelError::Format(format!(
                "embedding matrix has {} entries, expected {}",
                embeddings.len(),
                vocab.feature_count() * dim
            )));
        }
        if output.len() != dim * classes {
            return Err(ModelError::Format(format!(
                "output matrix has {} entries, expected {}",
                output.len(),
                dim * classes
            )));
        }
        Ok(Model {
            vocab,
            dim,
            classes,
            loss_kind,
            taxonomy_checksum,
            embeddings,
            output,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Output size `K`: leaf count, or coarsest-class count in coarse mode.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn taxonomy_checksum(&self) -> u64 {
        self.taxonomy_checksum
    }

    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }

    pub fn embeddings_mut(&mut self) -> &mut [f64] {
        &mut self.embeddings
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn output_mut(&mut self) -> &mut [f64] {
        &mut self.output
    }

    pub fn featurize_text(&self, text: &str) -> Vec<usize> {
        self.vocab.featurize(&tokenize(text))
    }

    /// Mean of the embedding rows of `feats`; zero when `feats` is empty.
    pub fn hidden(&self, feats: &[usize]) -> Vec<f64> {
        let mut h = vec![0.0; self.dim];
        if feats.is_empty() {
            return h;
        }
        for &f in feats {
            let row = &self.embeddings[f * self.dim..(f + 1) * self.dim];
            for (hi, &e) in h.iter_mut().zip(row) {
                *hi += e;
            }
        }
        let scale = 1.0 / feats.len() as f64;
        for hi in &mut h {
            *hi *= scale;
        }
        h
    }

    fn logits_from_hidden(&self, h: &[f64]) -> Vec<f64> {
        let mut logits = vec![0.0; self.classes];
        for (i, &hi) in h.iter().enumerate() {
            let row = &self.output[i * self.classes..(i + 1) * self.classes];
            for (z, &o) in logits.iter_mut().zip(row) {
                *z += hi * o;
            }
        }
        logits
    }

    pub fn forward(&self, feats: &[usize]) -> Vec<f64> {
        self.logits_from_hidden(&self.hidden(feats))
    }

    /// One SGD update on a single sample. Returns the sample's loss before
    /// the update. Only the embedding rows listed in `feats` change.
    pub fn sgd_step(
        &mut self,
        feats: &[usize],
        target: usize,
        lr: f64,
        objective: &Objective<'_>,
    ) -> Result<f64, ModelError> {
        if target >= self.classes {
            return Err(ModelError::TargetOutOfRange {
                target,
                classes: self.classes,
            });
        }
        let h = self.hidden(feats);
        let logits = self.logits_from_hidden(&h);
        let LossGrad { loss, grad } = objective.loss_grad(&logits, target)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(ModelError::NonFiniteGradient { target });
        }

        // Gradient w.r.t. the hidden vector uses the output matrix before
        // it is updated.
        let k = self.classes;
        let mut grad_hidden = vec![0.0; self.dim];
        for (i, gh) in grad_hidden.iter_mut().enumerate() {
            let row = &mut self.output[i * k..(i + 1) * k];
            *gh = row.iter().zip(&grad).map(|(o, g)| o * g).sum();
            let step = lr * h[i];
            for (o, g) in row.iter_mut().zip(&grad) {
                *o -= step * g;
            }
        }

        if !feats.is_empty() {
            let scale = lr / feats.len() as f64;
            for &f in feats {
                let row = &mut self.embeddings[f * self.dim..(f + 1) * self.dim];
                for (e, gh) in row.iter_mut().zip(&grad_hidden) {
                    *e -= scale * gh;
                }
            }
        }
        Ok(loss)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), ModelError> {
        w.write_all(&MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        w.write_all(&[self.loss_kind.code()])?;
        for v in [
            self.vocab.len() as u64,
            self.vocab.buckets() as u64,
            self.dim as u64,
            self.classes as u64,
            self.vocab.min_count(),
            self.taxonomy_checksum,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for (word, count) in self.vocab.words() {
            let len = u32::try_from(word.len())
                .map_err(|_| ModelError::Format(format!("token too long: {} bytes", word.len())))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(word.as_bytes())?;
            w.write_all(&count.to_le_bytes())?;
        }
        for x in self.embeddings.iter().chain(&self.output) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ModelError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if magic != MODEL_MAGIC {
            return Err(ModelError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(read_array(r)?);
        if version != MODEL_VERSION {
            return Err(ModelError::Format(format!("unsupported version {version}")));
        }
        let [code] = read_array::<1, _>(r)?;
        let loss_kind = LossKind::from_code(code)
            .ok_or_else(|| ModelError::Format(format!("unknown loss code {code}")))?;
        let mut header = [0u64; 6];
        for v in &mut header {
            *v = u64::from_le_bytes(read_array(r)?);
        }
        let [words, buckets, dim, classes, min_count, checksum] = header;
        let to_usize = |v: u64, what: &str| {
            usize::try_from(v).map_err(|_| ModelError::Format(format!("{what} too large: {v}")))
        };
        let (words, buckets, dim, classes) = (
            to_usize(words, "vocabulary size")?,
            to_usize(buckets, "bucket count")?,
            to_usize(dim, "dimension")?,
            to_usize(classes, "class count")?,
        );

        let mut vocab = Vec::with_capacity(words.min(1 << 20));
        for _ in 0..words {
            let len = u32::from_le_bytes(read_array(r)?) as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            let word = String::from_utf8(bytes)
                .map_err(|_| ModelError::Format("token is not UTF-8".into()))?;
            let count = u64::from_le_bytes(read_array(r)?);
            vocab.push((word, count));
        }
        let vocab = Vocabulary::from_words(vocab, min_count, buckets);

        let rows = vocab
            .feature_count()
            .checked_mul(dim)
            .ok_or_else(|| ModelError::Format("embedding matrix too large".into()))?;
        let embeddings = read_f64s(r, rows)?;
        let out_len = dim
            .checked_mul(classes)
            .ok_or_else(|| ModelError::Format("output matrix too large".into()))?;
        let output = read_f64s(r, out_len)?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(ModelError::Format(
                "trailing bytes after output matrix".into(),
            ));
        }
        Model::from_parameters(vocab, dim, classes, loss_kind, checksum, embeddings, output)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, ModelError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>, ModelError> {
    const CHUNK: usize = 1 << 16;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut buf = vec![0u8; CHUNK * 8];
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(CHUNK);
        let bytes = &mut buf[..take * 8];
        r.read_exact(bytes)?;
        out.extend(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))),
        );
        remaining -= take;
    }
    if let Some(bad) = out.iter().find(|x| !x.is_finite()) {
        return Err(ModelError::Format(format!("non-finite parameter {bad}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab_of(docs: &[&str], buckets: usize) -> Vocabulary {
        Vocabulary::build(docs.iter().map(|d| tokenize(d)), 1, buckets)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("the cat sat"), ["the", "cat", "sat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("a  b\tc"), ["a", "b", "c"]);
    }

    #[test]
    fn vocabulary_is_first_occurrence_ordered() {
        let v = vocab_of(&["b a b", "c a"], 10);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("b"), Some(0));
        assert_eq!(v.id("a"), Some(1));
        assert_eq!(v.id("c"), Some(2));
        assert_eq!(v.words()[0], ("b".to_owned(), 2));
        assert_eq!(v.feature_count(), 13);
    }

    #[test]
    fn min_count_drops_rare_tokens() {
        let v = Vocabulary::build(["x y x", "z x y"].iter().map(|d| tokenize(d)), 2, 4);
        assert_eq!(v.len(), 2);
        assert!(v.id("z").is_none());
    }

    #[test]
    fn featurize_examples() {
        let v = vocab_of(&["the cat"], 1000);
        let feats = v.featurize(&["the", "cat"]);
        assert_eq!(
            feats,
            vec![
                v.id("the").unwrap(),
                v.id("cat").unwrap(),
                2 + bigram_bucket("the", "cat", 1000)
            ]
        );
        assert_eq!(v.featurize(&["cat"]), vec![v.id("cat").unwrap()]);
        let oov = v.featurize(&["oov1", "oov2"]);
        assert_eq!(oov, vec![2 + bigram_bucket("oov1", "oov2", 1000)]);
        assert!(v.featurize::<&str>(&[]).is_empty());
    }

    #[test]
    fn bigram_hash_is_pinned() {
        // FNV-1a 64 over b"the\x1fcat".
        assert_eq!(
            fnv1a64(b"the\x1fcat") % 1_000_000,
            bigram_bucket("the", "cat", 1_000_000) as u64
        );
        let expected = {
            let mut h: u64 = 0xcbf29ce484222325;
            for &b in b"the\x1fcat" {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h
        };
        assert_eq!(
            bigram_bucket("the", "cat", usize::MAX),
            (expected % usize::MAX as u64) as usize
        );
        assert_ne!(
            bigram_bucket("a", "bc", 1 << 30),
            bigram_bucket("ab", "c", 1 << 30)
        );
    }

    fn tiny_model(embeddings: Vec<f64>, output: Vec<f64>, dim: usize, classes: usize) -> Model {
        let vocab = vocab_of(&["f g"], 0);
        Model::from_parameters(vocab, dim, classes, LossKind::Flat, 0, embeddings, output).unwrap()
    }

    #[test]
    fn forward_examples() {
        let m = tiny_model(vec![0.0; 2], vec![3.0, -1.0], 1, 2);
        assert_eq!(m.forward(&[0, 1]), vec![0.0, 0.0]);

        let m = tiny_model(vec![2.0, 5.0], vec![3.0, -1.0], 1, 2);
        assert_eq!(m.forward(&[0]), vec![6.0, -2.0]);
        assert_eq!(m.forward(&[0, 0]), m.forward(&[0]));
        assert_eq!(m.forward(&[0, 1]), m.forward(&[1, 0]));
        assert_eq!(m.forward(&[]), vec![0.0, 0.0]);
    }

    #[test]
    fn init_is_bounded_and_output_zero() {
        let vocab = vocab_of(&["a b c"], 50);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Model::new(vocab, 4, 3, LossKind::Log, 7, &mut rng);
        assert!(m.embeddings().iter().all(|&e| e.abs() <= 0.25));
        assert!(m.output().iter().all(|&o| o == 0.0));
        assert_eq!(m.forward(&[0, 1, 2]), vec![0.0; 3]);
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let vocab = vocab_of(&["a b c"], 50);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = Model::new(vocab, 3, 2, LossKind::Flat, 0, &mut rng);
        m.output_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = i as f64 * 0.1);
        let before = m.clone();
        let loss = m
            .sgd_step(&[0, 1, 3], 1, 0.0, &Objective::CrossEntropy)
            .unwrap();
        assert_eq!(m, before);
        assert!(loss > 0.0);
    }

    #[test]
    fn sgd_step_touches_only_listed_rows() {
        let vocab = vocab_of(&["a b c d"], 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = Model::new(vocab, 3, 2, LossKind::Flat, 0, &mut rng);
        m.output_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = i as f64 * 0.5);
        let before = m.clone();
        m.sgd_step(&[1, 5], 0, 0.3, &Objective::CrossEntropy)
            .unwrap();
        for row in 0..m.vocab().feature_count() {
            let a = &before.embeddings()[row * 3..row * 3 + 3];
            let b = &m.embeddings()[row * 3..row * 3 + 3];
            assert_eq!(a == b, row != 1 && row != 5, "row {row}");
        }
    }

    #[test]
    fn flat_cross_entropy_and_log_updates_match() {
        let t = Taxonomy::flat("R", &["c0", "c1", "c2"]).unwrap();
        let vocab = vocab_of(&["a b c d"], 16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut m = Model::new(vocab, 5, 3, LossKind::Flat, 0, &mut rng);
        m.output_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = (i as f64 * 0.37).sin());
        let mut a = m.clone();
        let mut b = m;
        for step in 0..20 {
            let feats = [step % 4, 4 + step % 7];
            let target = step % 3;
            a.sgd_step(&feats, target, 0.2, &Objective::CrossEntropy)
                .unwrap();
            b.sgd_step(&feats, target, 0.2, &Objective::HierLog(&t))
                .unwrap();
        }
        for (x, y) in a
            .embeddings()
            .iter()
            .zip(b.embeddings())
            .chain(a.output().iter().zip(b.output()))
        {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn repeated_steps_do_not_increase_single_sample_loss() {
        let t = Taxonomy::parse("a1\tA\na2\tA\nb1\tB\nb2\tB\nA\tR\nB\tR\n").unwrap();
        let vocab = vocab_of(&["x y z"], 32);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Model::new(vocab, 6, 4, LossKind::Log, 0, &mut rng);
        let feats = m.featurize_text("x y z");
        let objective = Objective::HierLog(&t);
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let loss = m.sgd_step(&feats, 1, 0.05, &objective).unwrap();
            assert!(loss <= last + 1e-15, "{loss} > {last}");
            last = loss;
        }
        assert!(last < 1.0);
    }

    #[test]
    fn target_out_of_range() {
        let mut m = tiny_model(vec![1.0; 2], vec![0.0; 2], 1, 2);
        assert!(matches!(
            m.sgd_step(&[0], 2, 0.1, &Objective::CrossEntropy),
            Err(ModelError::TargetOutOfRange { .. })
        ));
    }

    #[test]
    fn serialization_round_trip() {
        let vocab = vocab_of(&["alpha beta gamma", "beta delta"], 7);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut m = Model::new(vocab, 3, 4, LossKind::Coarse, 0xdead_beef, &mut rng);
        m.output_mut()
            .iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = i as f64 - 2.5);
        let mut bytes = Vec::new();
        m.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"HWIN");
        let back = Model::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);

        let mut truncated = bytes.clone();
        truncated.pop();
        assert!(Model::read_from(&mut truncated.as_slice()).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            Model::read_from(&mut extra.as_slice()),
            Err(ModelError::Format(_))
        ));
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(
            Model::read_from(&mut bad.as_slice()),
            Err(ModelError::Format(_))
        ));
    }

    #[test]
    fn loss_kind_parsing() {
        for k in LossKind::ALL {
            assert_eq!(k.as_str().parse::<LossKind>().unwrap(), k);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }
}
