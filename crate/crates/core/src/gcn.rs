//! Attention-weighted graph convolution over the syntactic graphs.
//!
//! For view `z`, node labels are embedded (`l_i`), each node attends over its
//! graph neighbours with unscaled dot products of `m_i = h_i ⊕ l_i`, and the
//! attended messages `h_j + W·l_j + b` pass through a ReLU.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::UNK;
use crate::numerics::{NumericsError, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GcnError {
    #[error("node {node} has an empty constituency path")]
    EmptyPath { node: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Label → row id; id 0 is the unknown-label row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelInventory {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelInventory {
    fn from(labels: Vec<String>) -> Self {
        LabelInventory::from_labels(labels)
    }
}

impl From<LabelInventory> for Vec<String> {
    fn from(v: LabelInventory) -> Self {
        v.labels
    }
}

impl LabelInventory {
    pub fn from_labels<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut inv = LabelInventory {
            labels: vec![UNK.to_string()],
            index: HashMap::from([(UNK.to_string(), 0)]),
        };
        for l in labels {
            let l = l.into();
            if !inv.index.contains_key(&l) {
                inv.index.insert(l.clone(), inv.labels.len());
                inv.labels.push(l);
            }
        }
        inv
    }

    pub fn id(&self, label: &str) -> usize {
        self.index.get(label).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Per-view parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    /// `N × d_l` label embeddings, one row per label.
    pub labels: Tensor,
    /// `d_l × d_h` projection of label embeddings into the hidden space.
    pub proj: Tensor,
    pub bias: Tensor,
}

impl GcnParams {
    pub fn init<R: Rng + ?Sized>(n_labels: usize, d_l: usize, d_h: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (d_l + d_h) as f64).sqrt();
        GcnParams {
            labels: Tensor::uniform(&[n_labels, d_l], -0.1, 0.1, rng),
            proj: Tensor::uniform(&[d_l, d_h], -limit, limit, rng),
            bias: Tensor::zeros(&[d_h]),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GcnVars {
    pub labels: Var,
    pub proj: Var,
    pub bias: Var,
}

/// Single-label lookup used by the dependency view.
pub fn node_label_embed_dep(tape: &mut Tape, vars: &GcnVars, label_ids: &[usize]) -> Result<Var, GcnError> {
    Ok(tape.embedding_lookup(vars.labels, label_ids)?)
}

/// Mean of the tag embeddings along each node's constituency path.
pub fn node_label_embed_const(tape: &mut Tape, vars: &GcnVars, paths: &[Vec<usize>]) -> Result<Var, GcnError> {
    let n_labels = tape.value(vars.labels).rows();
    let mut averaging = Tensor::zeros(&[paths.len(), n_labels]);
    for (node, path) in paths.iter().enumerate() {
        if path.is_empty() {
            return Err(GcnError::EmptyPath { node });
        }
        let w = 1.0 / path.len() as f64;
        for &tag in path {
            if tag >= n_labels {
                return Err(NumericsError::IndexOutOfRange {
                    op: "node_label_embed_const",
                    index: tag,
                    len: n_labels,
                }
                .into());
            }
            let cur = averaging.get(node, tag);
            averaging.set(node, tag, cur + w);
        }
    }
    let a = tape.constant(averaging);
    Ok(tape.matmul(a, vars.labels)?)
}

/// Output of one graph convolution, with its attention matrix.
#[derive(Clone, Copy, Debug)]
pub struct GcnOutput {
    pub hidden: Var,
    pub attention: Var,
}

/// One attention-weighted convolution layer.
///
/// `adjacency` is the row-major `n×n` mask, self-loops included.
pub fn gcn_layer(tape: &mut Tape, adjacency: &[bool], h_ctx: Var, labels: Var, vars: &GcnVars) -> Result<GcnOutput, GcnError> {
    let m = tape.concat_cols(&[h_ctx, labels])?;
    let mt = tape.transpose(m)?;
    let logits = tape.matmul(m, mt)?;
    let attention = tape.softmax_over_masked_set(logits, adjacency)?;
    let messages = label_messages(tape, h_ctx, labels, vars)?;
    let mixed = tape.matmul(attention, messages)?;
    let hidden = tape.relu(mixed)?;
    Ok(GcnOutput { hidden, attention })
}

/// `h_j + W·l_j + b` for every node.
fn label_messages(tape: &mut Tape, h_ctx: Var, labels: Var, vars: &GcnVars) -> Result<Var, GcnError> {
    let projected = tape.matmul(labels, vars.proj)?;
    let biased = tape.add_row(projected, vars.bias)?;
    Ok(tape.add(h_ctx, biased)?)
}

/// Label representation without message passing: `W·l_i + b`.
pub fn label_only(tape: &mut Tape, labels: Var, vars: &GcnVars) -> Result<Var, GcnError> {
    let projected = tape.matmul(labels, vars.proj)?;
    Ok(tape.add_row(projected, vars.bias)?)
}

/// Per-token concatenation `h_ctx ⊕ h_con ⊕ h_dep`.
pub fn aggregate(tape: &mut Tape, h_ctx: Var, h_con: Var, h_dep: Var) -> Result<Var, GcnError> {
    let (c, k, d) = (tape.value(h_ctx), tape.value(h_con), tape.value(h_dep));
    if c.shape() != k.shape() || c.shape() != d.shape() {
        return Err(NumericsError::ShapeMismatch {
            op: "aggregate",
            lhs: c.shape().to_vec(),
            rhs: if c.shape() != k.shape() { k.shape().to_vec() } else { d.shape().to_vec() },
        }
        .into());
    }
    Ok(tape.concat_cols(&[h_ctx, h_con, h_dep])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bind(tape: &mut Tape, p: &GcnParams) -> GcnVars {
        GcnVars {
            labels: tape.param(p.labels.clone()),
            proj: tape.param(p.proj.clone()),
            bias: tape.param(p.bias.clone()),
        }
    }

    #[test]
    fn inventory_falls_back_to_unk() {
        let inv = LabelInventory::from_labels(["ROOT", "nsubj", "ROOT"]);
        assert_eq!(inv.len(), 3);
        assert_eq!(inv.id("nsubj"), 2);
        assert_eq!(inv.id("never-seen"), 0);
    }

    #[test]
    fn dep_labels_share_rows() {
        let p = GcnParams::init(4, 3, 2, &mut ChaCha8Rng::seed_from_u64(1));
        let mut tape = Tape::new();
        let v = bind(&mut tape, &p);
        let l = node_label_embed_dep(&mut tape, &v, &[2, 2, 0]).unwrap();
        let l = tape.value(l);
        assert_eq!(l.row(0), l.row(1));
        assert_eq!(l.row(0), p.labels.row(2));
        assert_eq!(l.row(2), p.labels.row(0));
    }

    #[test]
    fn const_paths_are_averaged() {
        let p = GcnParams::init(4, 3, 2, &mut ChaCha8Rng::seed_from_u64(2));
        let mut tape = Tape::new();
        let v = bind(&mut tape, &p);
        // S = 1, NP = 2
        let l = node_label_embed_const(&mut tape, &v, &[vec![1], vec![1, 2, 2]]).unwrap();
        let l = tape.value(l);
        for c in 0..3 {
            assert!((l.get(0, c) - p.labels.get(1, c)).abs() < 1e-15);
            let expected = (p.labels.get(1, c) + 2.0 * p.labels.get(2, c)) / 3.0;
            assert!((l.get(1, c) - expected).abs() < 1e-15);
        }
        let mut tape = Tape::new();
        let v = bind(&mut tape, &p);
        assert_eq!(
            node_label_embed_const(&mut tape, &v, &[vec![1], vec![]]).unwrap_err(),
            GcnError::EmptyPath { node: 1 }
        );
    }

    #[test]
    fn self_loop_only_node() {
        let p = GcnParams::init(3, 2, 2, &mut ChaCha8Rng::seed_from_u64(3));
        let mut tape = Tape::new();
        let v = bind(&mut tape, &p);
        let h = tape.constant(Tensor::matrix(2, 2, vec![0.5, 0.2, -0.1, 0.3]).unwrap());
        let l = node_label_embed_dep(&mut tape, &v, &[1, 2]).unwrap();
        let out = gcn_layer(&mut tape, &[true, false, false, true], h, l, &v).unwrap();
        let att = tape.value(out.attention);
        assert_eq!(att.data(), &[1.0, 0.0, 0.0, 1.0]);
        let hv = tape.value(h).clone();
        let lv = tape.value(l).clone();
        let hidden = tape.value(out.hidden);
        for i in 0..2 {
            for c in 0..2 {
                let proj: f64 = (0..2).map(|k| lv.get(i, k) * p.proj.get(k, c)).sum();
                let expected = (hv.get(i, c) + proj + p.bias.data()[c]).max(0.0);
                assert!((hidden.get(i, c) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn equal_representations_attend_uniformly() {
        let p = GcnParams::init(2, 2, 2, &mut ChaCha8Rng::seed_from_u64(4));
        let mut tape = Tape::new();
        let v = bind(&mut tape, &p);
        let h = tape.constant(Tensor::filled(&[3, 2], 0.4));
        let l = node_label_embed_dep(&mut tape, &v, &[1, 1, 1]).unwrap();
        let adj = [true, true, false, true, true, true, false, true, true];
        let out = gcn_layer(&mut tape, &adj, h, l, &v).unwrap();
        let att = tape.value(out.attention);
        assert_eq!(att.row(0), &[0.5, 0.5, 0.0]);
        for v in att.row(1) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_widths() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::filled(&[2, 4], 1.0));
        let z = tape.constant(Tensor::zeros(&[2, 4]));
        let out = aggregate(&mut tape, a, z, z).unwrap();
        let v = tape.value(out);
        assert_eq!(v.shape(), &[2, 12]);
        assert_eq!(&v.row(0)[..4], &[1.0; 4]);
        assert!(v.row(1)[4..].iter().all(|x| *x == 0.0));
        let bad = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(aggregate(&mut tape, a, bad, z).is_err());
    }
}
