//! Multi-view relationship losses and the combined training objective.
//!
//! All three losses are negative log-likelihoods of a softmax retrieval
//! distribution within one sentence:
//!
//! ```text
//! P(target, anchor) = exp(target · anchor) / Σ_k exp(h_k · anchor)
//! ```
//!
//! where `k` ranges over every node of the view that supplies the target.
//!
//! * `R1` (inter-node, intra-view) scores graph neighbours of the same view.
//! * `R2` (intra-node, inter-view) retrieves a node's twin from the other view.
//! * `R3` (inter-node, inter-view) retrieves view-`z` neighbours from the other view.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{NumericsError, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiviewError {
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("target {target} is outside a candidate set of {len}")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("vector width {found} does not match anchor width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("loss weights must be finite and non-negative")]
    InvalidWeights,
}

/// Multipliers of `R1`, `R2` and `R3` in the combined loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 0.024,
            beta: 0.012,
            gamma: 0.012,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        alpha: 0.0,
        beta: 0.0,
        gamma: 0.0,
    };

    pub fn validate(&self) -> Result<(), MultiviewError> {
        if [self.alpha, self.beta, self.gamma].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(MultiviewError::InvalidWeights)
        }
    }
}

/// Probability of `candidates[target]` under a softmax of dot products with
/// `anchor`.
pub fn pairwise_softmax_prob(target: usize, anchor: &[f64], candidates: &[Vec<f64>]) -> Result<f64, MultiviewError> {
    if candidates.is_empty() {
        return Err(MultiviewError::EmptyCandidates);
    }
    if target >= candidates.len() {
        return Err(MultiviewError::TargetOutOfRange {
            target,
            len: candidates.len(),
        });
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.len() != anchor.len() {
            return Err(MultiviewError::WidthMismatch {
                expected: anchor.len(),
                found: c.len(),
            });
        }
        scores.push(c.iter().zip(anchor).map(|(a, b)| a * b).sum::<f64>());
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let denom: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    Ok((scores[target] - max).exp() / denom)
}

/// Node representations of one view together with its adjacency mask.
#[derive(Clone, Copy, Debug)]
pub struct ViewRep<'a> {
    pub hidden: Var,
    /// Row-major `n×n`, self-loops included.
    pub adjacency: &'a [bool],
}

/// Edge weights `e_ij` as a dense matrix, optionally without the diagonal.
fn edge_weights(adjacency: &[bool], n: usize, exclude_self_loops: bool) -> Result<Tensor, NumericsError> {
    if adjacency.len() != n * n {
        return Err(NumericsError::ShapeMismatch {
            op: "edge_weights",
            lhs: vec![n, n],
            rhs: vec![adjacency.len()],
        });
    }
    let mut w = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            if adjacency[i * n + j] && !(exclude_self_loops && i == j) {
                w.set(i, j, 1.0);
            }
        }
    }
    Ok(w)
}

/// Row-wise log-softmax of `anchors · targetsᵀ`: entry `[a][t]` is
/// `log P(targets_t, anchors_a)`.
fn retrieval_log_probs(tape: &mut Tape, anchors: Var, targets: Var) -> Result<Var, NumericsError> {
    let tt = tape.transpose(targets)?;
    let scores = tape.matmul(anchors, tt)?;
    tape.log_softmax_rows(scores)
}

fn negated_total(tape: &mut Tape, terms: Vec<Var>) -> Result<Var, NumericsError> {
    let mut iter = terms.into_iter();
    let mut total = match iter.next() {
        Some(t) => t,
        None => tape.constant(Tensor::scalar(0.0)),
    };
    for t in iter {
        total = tape.add(total, t)?;
    }
    tape.scalar_mul(total, -1.0)
}

/// `−Σ_z Σ_i Σ_j e^z_ij · log P(h^z_j, h^z_i)` over the given views.
pub fn loss_r1(tape: &mut Tape, views: &[ViewRep<'_>], exclude_self_loops: bool) -> Result<Var, NumericsError> {
    let mut terms = Vec::with_capacity(views.len());
    for v in views {
        let n = tape.value(v.hidden).rows();
        let weights = edge_weights(v.adjacency, n, exclude_self_loops)?;
        let lp = retrieval_log_probs(tape, v.hidden, v.hidden)?;
        terms.push(tape.weighted_sum(lp, weights)?);
    }
    negated_total(tape, terms)
}

/// `−Σ_z Σ_i log P(h^{z'}_i, h^z_i)`.
pub fn loss_r2(tape: &mut Tape, a: Var, b: Var) -> Result<Var, NumericsError> {
    let n = tape.value(a).rows();
    let mut terms = Vec::with_capacity(2);
    for (anchor, target) in [(a, b), (b, a)] {
        let lp = retrieval_log_probs(tape, anchor, target)?;
        terms.push(tape.weighted_sum(lp, Tensor::identity(n))?);
    }
    negated_total(tape, terms)
}

/// `−Σ_z Σ_i Σ_j e^z_ij · log P(h^{z'}_i, h^z_j)`.
pub fn loss_r3(tape: &mut Tape, a: ViewRep<'_>, b: ViewRep<'_>, exclude_self_loops: bool) -> Result<Var, NumericsError> {
    let n = tape.value(a.hidden).rows();
    let mut terms = Vec::with_capacity(2);
    for (z, other) in [(a, b), (b, a)] {
        // Anchor j from view z, target i from view z': weight e^z_ij at [j][i].
        let weights = edge_weights(z.adjacency, n, exclude_self_loops)?.transposed();
        let lp = retrieval_log_probs(tape, z.hidden, other.hidden)?;
        terms.push(tape.weighted_sum(lp, weights)?);
    }
    negated_total(tape, terms)
}

/// Mean token-level cross-entropy.
pub fn tagging_loss(tape: &mut Tape, logits: Var, gold: &[usize]) -> Result<Var, NumericsError> {
    tape.cross_entropy_with_logits(logits, gold)
}

/// Sub-losses of one instance; absent terms contribute nothing.
#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub ce: Var,
    pub r1: Option<Var>,
    pub r2: Option<Var>,
    pub r3: Option<Var>,
}

/// `L = L_CE + α·L_R1 + β·L_R2 + γ·L_R3`.
///
/// Terms with a zero weight are left off the tape, so the result is
/// bit-identical to `L_CE` when all weights are zero.
pub fn combined_loss(tape: &mut Tape, parts: &LossParts, w: &LossWeights) -> Result<Var, NumericsError> {
    let mut total = parts.ce;
    for (term, weight) in [(parts.r1, w.alpha), (parts.r2, w.beta), (parts.r3, w.gamma)] {
        if let Some(t) = term {
            if weight != 0.0 {
                let scaled = tape.scalar_mul(t, weight)?;
                total = tape.add(total, scaled)?;
            }
        }
    }
    Ok(total)
}
