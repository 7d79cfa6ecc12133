//! Hierarchical win and loss over a class taxonomy.
//!
//! Leaf probabilities are propagated up the tree so that every node holds
//! the total mass of the leaves beneath it. The win for a target leaf is the
//! sum over the root-to-target path of `2^-j` times the mass at the `j`-th
//! node (root is `j = 1`), with the target leaf counted twice. A correct
//! one-hot input therefore scores exactly 1 on any tree, and a maximally
//! wrong one scores 1/2.
//!
//! Downstream of a softmax the root term is dropped and the rest doubled
//! ([`WinKind::Normalized`]), which rescales the range to `[0, 1]` and turns
//! `-ln(win)` on a flat hierarchy into ordinary cross-entropy.
//!
//! The win is linear in the leaf vector: `win(d, t) = <w_t, d>` where
//! `w_t[j]` depends only on how many leading path nodes leaf `j` shares with
//! `t`. [`win_weights`] builds that vector; it is also the gradient of the
//! win with respect to `d`.

use thiserror::Error;

use crate::taxonomy::{NodeId, Taxonomy, TaxonomyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierLossError {
    #[error("expected {expected} values (one per leaf), got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("logits are empty")]
    EmptyLogits,
    #[error("logit {index} is not finite ({value})")]
    NonFiniteLogit { index: usize, value: f64 },
    #[error("hierarchical win underflowed to zero for target leaf {target}")]
    WinUnderflow { target: usize },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

pub type Result<T> = std::result::Result<T, HierLossError>;

/// Which form of the win to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WinKind {
    /// Root included; range `[1/2, 1]` on probability inputs.
    Raw,
    /// Root omitted and doubled; range `[0, 1]` on probability inputs.
    Normalized,
}

/// The linear functional `d -> win(d, target)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WinWeights {
    pub target: usize,
    pub kind: WinKind,
    pub weights: Vec<f64>,
}

impl WinWeights {
    pub fn dot(&self, d: &[f64]) -> f64 {
        self.weights.iter().zip(d).map(|(w, x)| w * x).sum()
    }
}

/// A scalar loss and its derivative with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

fn check_len(t: &Taxonomy, d: &[f64]) -> Result<()> {
    if d.len() != t.leaf_count() {
        return Err(HierLossError::LengthMismatch {
            expected: t.leaf_count(),
            found: d.len(),
        });
    }
    Ok(())
}

fn check_logits(logits: &[f64]) -> Result<()> {
    if logits.is_empty() {
        return Err(HierLossError::EmptyLogits);
    }
    if let Some((index, &value)) = logits.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(HierLossError::NonFiniteLogit { index, value });
    }
    Ok(())
}

/// Total mass under every node, indexed by [`NodeId`]. One bottom-up pass.
pub fn propagate(t: &Taxonomy, d: &[f64]) -> Result<Vec<f64>> {
    check_len(t, d)?;
    let mut values = vec![0.0; t.node_count()];
    for (leaf, &mass) in d.iter().enumerate() {
        values[t.leaf_node(leaf)?.index()] = mass;
    }
    for &node in t.top_down().iter().skip(1).rev() {
        let parent = t.parent(node).expect("non-root node has a parent");
        values[parent.index()] += values[node.index()];
    }
    Ok(values)
}

fn path_sum(path: &[NodeId], values: &[f64], kind: WinKind) -> f64 {
    let mut acc = 0.0;
    let mut weight = 1.0;
    for &node in path {
        weight *= 0.5;
        acc += weight * values[node.index()];
    }
    let leaf = *path.last().expect("paths are nonempty");
    acc += weight * values[leaf.index()];
    match kind {
        WinKind::Raw => acc,
        // Dropping the root term then doubling.
        WinKind::Normalized => 2.0 * (acc - 0.5 * values[path[0].index()]),
    }
}

pub fn win(t: &Taxonomy, d: &[f64], target: usize, kind: WinKind) -> Result<f64> {
    let values = propagate(t, d)?;
    Ok(path_sum(t.path(target)?, &values, kind))
}

pub fn raw_win(t: &Taxonomy, d: &[f64], target: usize) -> Result<f64> {
    win(t, d, target, WinKind::Raw)
}

pub fn normalized_win(t: &Taxonomy, d: &[f64], target: usize) -> Result<f64> {
    win(t, d, target, WinKind::Normalized)
}

/// Weight of a non-target leaf whose path shares `shared` leading nodes with
/// the target's path.
#[inline]
fn off_target_weight(shared: usize, kind: WinKind) -> f64 {
    let exponent = match kind {
        WinKind::Raw => shared as i32,
        WinKind::Normalized => shared as i32 - 1,
    };
    1.0 - 0.5f64.powi(exponent)
}

pub fn win_weights(t: &Taxonomy, target: usize, kind: WinKind) -> Result<WinWeights> {
    t.check_leaf(target)?;
    let weights = (0..t.leaf_count())
        .map(|j| {
            if j == target {
                1.0
            } else {
                off_target_weight(t.shared_prefix_unchecked(j, target), kind)
            }
        })
        .collect();
    Ok(WinWeights {
        target,
        kind,
        weights,
    })
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

/// Returns `(max, sum of exp(z - max))`.
fn shifted_exp_sum(logits: &[f64]) -> (f64, f64) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max, logits.iter().map(|&z| (z - max).exp()).sum())
}

/// Standard softmax cross-entropy, `-ln softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> Result<LossGrad> {
    check_logits(logits)?;
    if target >= logits.len() {
        return Err(TaxonomyError::LeafOutOfRange {
            leaf: target,
            leaves: logits.len(),
        }
        .into());
    }
    let (max, sum) = shifted_exp_sum(logits);
    let loss = max + sum.ln() - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    Ok(LossGrad { loss, grad })
}

/// `-ln` of the normalized win of `softmax(logits)`.
pub fn loss_log(t: &Taxonomy, logits: &[f64], target: usize) -> Result<LossGrad> {
    check_len(t, logits)?;
    let weights = win_weights(t, target, WinKind::Normalized)?;
    loss_log_with(&weights, logits)
}

/// As [`loss_log`] with precomputed normalized weights.
///
/// Works in the log domain: `ln W = lse_j(z_j + ln w_j) - lse_j(z_j)`, with
/// the first sum shifted by the largest logit among positive-weight leaves.
/// Since the target's weight is 1 that sum is at least 1, so `W` cannot
/// underflow for finite logits. On a flat hierarchy the gradient reduces
/// term for term to `softmax(z) - onehot(target)`.
pub fn loss_log_with(weights: &WinWeights, logits: &[f64]) -> Result<LossGrad> {
    check_logits(logits)?;
    if weights.weights.len() != logits.len() {
        return Err(HierLossError::LengthMismatch {
            expected: weights.weights.len(),
            found: logits.len(),
        });
    }
    let w = &weights.weights;
    let (max, sum) = shifted_exp_sum(logits);
    let max_w = logits
        .iter()
        .zip(w)
        .filter(|(_, &wj)| wj > 0.0)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits
        .iter()
        .zip(w)
        .map(|(&z, &wj)| {
            if wj > 0.0 {
                wj * (z - max_w).exp()
            } else {
                0.0
            }
        })
        .collect();
    let sum_w: f64 = scaled.iter().sum();

    let loss = (max + sum.ln()) - (max_w + sum_w.ln());
    if !loss.is_finite() || sum_w == 0.0 {
        return Err(HierLossError::WinUnderflow {
            target: weights.target,
        });
    }
    let mut grad = softmax(logits);
    for (g, r) in grad.iter_mut().zip(&scaled) {
        *g -= r / sum_w;
    }
    Ok(LossGrad { loss, grad })
}

/// `1 - normalized_win(softmax(logits))`.
pub fn loss_raw(t: &Taxonomy, logits: &[f64], target: usize) -> Result<LossGrad> {
    check_len(t, logits)?;
    let weights = win_weights(t, target, WinKind::Normalized)?;
    loss_raw_with(&weights, logits)
}

pub fn loss_raw_with(weights: &WinWeights, logits: &[f64]) -> Result<LossGrad> {
    check_logits(logits)?;
    if weights.weights.len() != logits.len() {
        return Err(HierLossError::LengthMismatch {
            expected: weights.weights.len(),
            found: logits.len(),
        });
    }
    let p = softmax(logits);
    let win = weights.dot(&p);
    // d(1 - W)/dz_k = -p_k (w_k - W)
    let grad = p
        .iter()
        .zip(&weights.weights)
        .map(|(&pk, &wk)| -pk * (wk - win))
        .collect();
    Ok(LossGrad {
        loss: 1.0 - win,
        grad,
    })
}

/// Greedy top-down decode: from the root, repeatedly step into the child
/// holding the most propagated mass until a leaf is reached. Ties go to the
/// earlier child.
pub fn decode_best_leaf(t: &Taxonomy, d: &[f64]) -> Result<usize> {
    let values = propagate(t, d)?;
    let mut node = t.root();
    loop {
        let children = t.children(node);
        let Some((&first, rest)) = children.split_first() else {
            break;
        };
        let mut best = first;
        for &c in rest {
            if values[c.index()] > values[best.index()] {
                best = c;
            }
        }
        node = best;
    }
    Ok(t.leaf_ordinal(node).expect("descent ends at a leaf"))
}

/// Literal reference computations, used to cross-check the routines above.
///
/// Nothing here shares code with the fast paths: propagation adds each
/// leaf's mass along its whole path, and the win walks the path with its own
/// weight loop.
pub mod oracle {
    use super::{check_len, Result, WinKind};
    use crate::taxonomy::Taxonomy;

    /// Per-leaf path accumulation: for every leaf, add its mass to every
    /// node from the root to the leaf.
    pub fn propagate_per_leaf(t: &Taxonomy, d: &[f64]) -> Result<Vec<f64>> {
        check_len(t, d)?;
        let mut values = vec![0.0; t.node_count()];
        for (leaf, &mass) in d.iter().enumerate() {
            for node in t.path(leaf)? {
                values[node.index()] += mass;
            }
        }
        Ok(values)
    }

    pub fn win_oracle(t: &Taxonomy, d: &[f64], target: usize, kind: WinKind) -> Result<f64> {
        let values = propagate_per_leaf(t, d)?;
        let path = t.path(target)?;
        let len = path.len();
        let first = match kind {
            WinKind::Raw => 1,
            WinKind::Normalized => 2,
        };
        let mut acc = 0.0;
        for j in first..=len {
            acc += values[path[j - 1].index()] / 2f64.powi(j as i32);
        }
        acc += values[path[len - 1].index()] / 2f64.powi(len as i32);
        Ok(match kind {
            WinKind::Raw => acc,
            WinKind::Normalized => 2.0 * acc,
        })
    }
}
