//! Random taxonomies, distributions and corpora for tests and demos.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::taxonomy::Taxonomy;
use crate::trainer::{Corpus, Sample};

/// A random tree whose leaves sit at most `max_depth` edges below the root
/// (so paths hold at most `max_depth + 1` nodes) with at most `max_leaves`
/// leaves. Single-child chains occur. Node names are `n<k>`.
pub fn random_taxonomy<R: Rng + ?Sized>(
    rng: &mut R,
    max_depth: usize,
    max_leaves: usize,
) -> Taxonomy {
    assert!(max_depth >= 1 && max_leaves >= 1);
    let branch_prob = rng.gen_range(0.3..0.85);
    let mut edges: Vec<(String, String)> = Vec::new();
    let mut next = 1usize;
    let mut leaves = 1usize;
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((node, depth)) = queue.pop_front() {
        let expand = node == 0 || (depth < max_depth && rng.gen_bool(branch_prob));
        if !expand {
            continue;
        }
        let max_k = 4.min(max_leaves + 1 - leaves);
        if max_k == 0 {
            continue;
        }
        let k = rng.gen_range(1..=max_k);
        leaves += k - 1;
        for _ in 0..k {
            edges.push((format!("n{next}"), format!("n{node}")));
            queue.push_back((next, depth + 1));
            next += 1;
        }
    }
    Taxonomy::from_edges(edges).expect("generated edges form a tree")
}

/// A random point on the probability simplex. Roughly a fifth of the time
/// some entries are exactly zero.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let sparse = rng.gen_bool(0.2);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.gen_bool(0.5) {
                0.0
            } else {
                -(1.0 - rng.gen::<f64>()).ln()
            }
        })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        let i = rng.gen_range(0..n);
        v[i] = 1.0;
    }
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

/// Uniform logits in `[-scale, scale]`.
pub fn random_logits<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Shape of a [`SeparableSpec::corpus`].
#[derive(Debug, Clone, Copy)]
pub struct SeparableSpec {
    pub coarse: usize,
    pub leaves_per_coarse: usize,
    /// Distinct tokens owned by each leaf.
    pub words_per_class: usize,
    /// Tokens drawn from the sample's own leaf vocabulary.
    pub tokens_per_sample: usize,
    /// Extra tokens per sample drawn from a shared vocabulary.
    pub noise_tokens: usize,
    pub noise_words: usize,
}

impl Default for SeparableSpec {
    fn default() -> Self {
        SeparableSpec {
            coarse: 4,
            leaves_per_coarse: 4,
            words_per_class: 3,
            tokens_per_sample: 3,
            noise_tokens: 0,
            noise_words: 20,
        }
    }
}

impl SeparableSpec {
    /// Two-level taxonomy `root -> C<i> -> C<i>L<j>`.
    pub fn taxonomy(&self) -> Taxonomy {
        let mut edges = Vec::new();
        for c in 0..self.coarse {
            for l in 0..self.leaves_per_coarse {
                edges.push((format!("C{c}L{l}"), format!("C{c}")));
            }
        }
        for c in 0..self.coarse {
            edges.push((format!("C{c}"), "root".to_owned()));
        }
        Taxonomy::from_edges(edges).expect("two-level tree")
    }

    /// `per_leaf` samples for every leaf, in shuffled order. Each sample
    /// draws its class tokens `c<i>l<j>w<k>` from its leaf's vocabulary
    /// and its noise tokens `noise<k>` from the shared one.
    pub fn corpus<R: Rng + ?Sized>(&self, rng: &mut R, per_leaf: usize) -> Corpus {
        let mut samples = Vec::new();
        for c in 0..self.coarse {
            for l in 0..self.leaves_per_coarse {
                for _ in 0..per_leaf {
                    let mut tokens: Vec<String> = (0..self.tokens_per_sample)
                        .map(|_| format!("c{c}l{l}w{}", rng.gen_range(0..self.words_per_class)))
                        .collect();
                    tokens.extend(
                        (0..self.noise_tokens)
                            .map(|_| format!("noise{}", rng.gen_range(0..self.noise_words))),
                    );
                    tokens.shuffle(rng);
                    samples.push(Sample {
                        label: format!("C{c}L{l}"),
                        text: tokens.join(" "),
                        line: 0,
                    });
                }
            }
        }
        samples.shuffle(rng);
        for (i, s) in samples.iter_mut().enumerate() {
            s.line = i + 1;
        }
        Corpus {
            samples,
            multi_label: 0,
        }
    }
}

/// Serializes a corpus back to `__label__` lines.
pub fn corpus_to_text(corpus: &Corpus) -> String {
    corpus
        .samples
        .iter()
        .map(|s| format!("__label__{} {}\n", s.label, s.text))
        .collect()
}
