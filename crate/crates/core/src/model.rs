//! The full tagger: encoder, two syntactic GCNs, aggregation and tagging head.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{expand_instances, CorpusError, ParsedSentence};
use crate::encoder::{self, EncoderError, EncoderKind, EncoderParams, EncoderVars, PrecomputedVectors, Vocabulary};
use crate::gcn::{self, GcnError, GcnParams, GcnVars, LabelInventory};
use crate::graphs::{build_const_graph, build_dep_graph, FlattenConfig};
use crate::multiview::{self, LossParts, LossWeights, ViewRep};
use crate::numerics::{grad_check_many, GradCheckReport, NumericsError, Tape, Tensor, Var};
use crate::tagger::{self, decode_logits};
use crate::tuple::{TagSet, Tuple};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Gcn(#[from] GcnError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("expected {expected} parameter tensors, found {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("the external encoder needs precomputed vectors")]
    MissingExternalVectors,
}

/// Architecture switches and sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d_h: usize,
    pub d_l: usize,
    pub max_arg: u8,
    pub flatten: FlattenConfig,
    pub use_dep: bool,
    pub use_const: bool,
    pub use_gcn: bool,
    pub encoder: EncoderKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_h: 64,
            d_l: 32,
            max_arg: crate::tuple::DEFAULT_MAX_ARG,
            flatten: FlattenConfig::default(),
            use_dep: true,
            use_const: true,
            use_gcn: true,
            encoder: EncoderKind::Toy,
        }
    }
}

/// Names of the parameter tensors in storage order.
pub const PARAM_NAMES: [&str; 12] = [
    "encoder.word",
    "encoder.verb",
    "encoder.mix_w",
    "encoder.mix_b",
    "const.labels",
    "const.proj",
    "const.bias",
    "dep.labels",
    "dep.proj",
    "dep.bias",
    "head.w",
    "head.b",
];

/// Parameters bound to one tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundParams {
    pub encoder: EncoderVars,
    pub con: GcnVars,
    pub dep: GcnVars,
    pub head_w: Var,
    pub head_b: Var,
}

impl BoundParams {
    pub fn from_vars(v: &[Var]) -> Result<Self, ModelError> {
        if v.len() != PARAM_NAMES.len() {
            return Err(ModelError::ParamCount {
                expected: PARAM_NAMES.len(),
                found: v.len(),
            });
        }
        Ok(BoundParams {
            encoder: EncoderVars {
                word: v[0],
                verb: v[1],
                mix_w: v[2],
                mix_b: v[3],
            },
            con: GcnVars {
                labels: v[4],
                proj: v[5],
                bias: v[6],
            },
            dep: GcnVars {
                labels: v[7],
                proj: v[8],
                bias: v[9],
            },
            head_w: v[10],
            head_b: v[11],
        })
    }
}

/// Everything the forward pass needs from one sentence, computed once.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceFeatures {
    pub id: String,
    pub n: usize,
    pub token_ids: Vec<usize>,
    pub dep_labels: Vec<usize>,
    pub const_paths: Vec<Vec<usize>>,
    pub dep_adjacency: Vec<bool>,
    pub const_adjacency: Vec<bool>,
}

/// One (sentence, indicator verb) pair with gold label ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub sentence: usize,
    pub verb: usize,
    pub gold: Vec<usize>,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub logits: Var,
    pub h_con: Option<Var>,
    pub h_dep: Option<Var>,
    pub att_con: Option<Var>,
    pub att_dep: Option<Var>,
}

/// Options of the multi-view part of the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub weights: LossWeights,
    pub exclude_self_loops: bool,
}

/// Tape handles of one instance's loss.
#[derive(Clone, Copy, Debug)]
pub struct InstanceLoss {
    pub total: Var,
    pub parts: LossParts,
    pub forward: Forward,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub dep_labels: LabelInventory,
    pub const_labels: LabelInventory,
    pub params: Vec<Tensor>,
    pub external: Option<PrecomputedVectors>,
}

fn const_labels_of(s: &ParsedSentence, cfg: &FlattenConfig) -> Vec<Vec<String>> {
    build_const_graph(s, cfg).labels().to_vec()
}

impl Model {
    /// Builds vocabularies and label inventories from `corpus` and draws
    /// initial parameters.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, corpus: &[ParsedSentence], rng: &mut R) -> Self {
        let vocab = Vocabulary::from_corpus(corpus);
        let mut dep = BTreeSet::new();
        let mut con = BTreeSet::new();
        for s in corpus {
            for l in build_dep_graph(s).labels() {
                dep.extend(l.iter().cloned());
            }
            for l in const_labels_of(s, &config.flatten) {
                con.extend(l);
            }
        }
        let dep_labels = LabelInventory::from_labels(dep);
        let const_labels = LabelInventory::from_labels(con);
        let tags = TagSet::new(config.max_arg);
        let (d_h, d_l) = (config.d_h, config.d_l);

        let enc = EncoderParams::init(vocab.len(), d_h, rng);
        let con_p = GcnParams::init(const_labels.len(), d_l, d_h, rng);
        let dep_p = GcnParams::init(dep_labels.len(), d_l, d_h, rng);
        let limit = (6.0 / (3 * d_h + tags.len()) as f64).sqrt();
        let head_w = Tensor::uniform(&[3 * d_h, tags.len()], -limit, limit, rng);
        let params = vec![
            enc.word,
            enc.verb,
            enc.mix_w,
            enc.mix_b,
            con_p.labels,
            con_p.proj,
            con_p.bias,
            dep_p.labels,
            dep_p.proj,
            dep_p.bias,
            head_w,
            Tensor::zeros(&[tags.len()]),
        ];
        Model {
            config,
            vocab,
            dep_labels,
            const_labels,
            params,
            external: None,
        }
    }

    pub fn tag_set(&self) -> TagSet {
        TagSet::new(self.config.max_arg)
    }

    /// Expected shape of every parameter tensor.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let (d_h, d_l, t) = (self.config.d_h, self.config.d_l, self.tag_set().len());
        vec![
            vec![self.vocab.len(), d_h],
            vec![2, d_h],
            vec![3 * d_h, d_h],
            vec![d_h],
            vec![self.const_labels.len(), d_l],
            vec![d_l, d_h],
            vec![d_h],
            vec![self.dep_labels.len(), d_l],
            vec![d_l, d_h],
            vec![d_h],
            vec![3 * d_h, t],
            vec![t],
        ]
    }

    pub fn check_params(&self) -> Result<(), ModelError> {
        let shapes = self.param_shapes();
        if shapes.len() != self.params.len() {
            return Err(ModelError::ParamCount {
                expected: shapes.len(),
                found: self.params.len(),
            });
        }
        for ((name, want), got) in PARAM_NAMES.iter().zip(shapes).zip(&self.params) {
            if got.shape() != want.as_slice() {
                return Err(ModelError::ParamShape {
                    name: name.to_string(),
                    expected: want,
                    found: got.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn features(&self, s: &ParsedSentence) -> SentenceFeatures {
        let dep = build_dep_graph(s);
        let con = build_const_graph(s, &self.config.flatten);
        SentenceFeatures {
            id: s.id.clone(),
            n: s.len(),
            token_ids: self.vocab.ids(s),
            dep_labels: dep.labels().iter().map(|l| self.dep_labels.id(&l[0])).collect(),
            const_paths: con
                .labels()
                .iter()
                .map(|p| p.iter().map(|t| self.const_labels.id(t)).collect())
                .collect(),
            dep_adjacency: dep.adjacency().to_vec(),
            const_adjacency: con.adjacency().to_vec(),
        }
    }

    /// Records every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.params.iter().map(|t| tape.param(t.clone())).collect()
    }

    fn context(&self, tape: &mut Tape, p: &BoundParams, f: &SentenceFeatures, verb: usize) -> Result<Var, ModelError> {
        match self.config.encoder {
            EncoderKind::Toy => {
                let w = encoder::embed(tape, &p.encoder, &f.token_ids, verb)?;
                Ok(encoder::encode(tape, &p.encoder, w)?)
            }
            EncoderKind::ExternalPrecomputed => {
                let ext = self.external.as_ref().ok_or(ModelError::MissingExternalVectors)?;
                let t = ext.lookup(&f.id, verb, f.n, self.config.d_h)?;
                Ok(tape.constant(t.clone()))
            }
        }
    }

    /// Forward pass for one instance with parameters `vars` (from [`Model::bind`]).
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], f: &SentenceFeatures, verb: usize) -> Result<Forward, ModelError> {
        let p = BoundParams::from_vars(vars)?;
        let h_ctx = self.context(tape, &p, f, verb)?;

        let (h_con, att_con) = if self.config.use_const {
            let l = gcn::node_label_embed_const(tape, &p.con, &f.const_paths)?;
            self.view(tape, &f.const_adjacency, h_ctx, l, &p.con)?
        } else {
            (None, None)
        };
        let (h_dep, att_dep) = if self.config.use_dep {
            let l = gcn::node_label_embed_dep(tape, &p.dep, &f.dep_labels)?;
            self.view(tape, &f.dep_adjacency, h_ctx, l, &p.dep)?
        } else {
            (None, None)
        };

        let zeros = |tape: &mut Tape| tape.constant(Tensor::zeros(&[f.n, self.config.d_h]));
        let con_block = match h_con {
            Some(h) => h,
            None => zeros(tape),
        };
        let dep_block = match h_dep {
            Some(h) => h,
            None => zeros(tape),
        };
        let h_final = gcn::aggregate(tape, h_ctx, con_block, dep_block)?;
        let logits = tagger::tag_logits(tape, h_final, p.head_w, p.head_b)?;
        Ok(Forward {
            logits,
            h_con,
            h_dep,
            att_con,
            att_dep,
        })
    }

    fn view(
        &self,
        tape: &mut Tape,
        adjacency: &[bool],
        h_ctx: Var,
        labels: Var,
        vars: &GcnVars,
    ) -> Result<(Option<Var>, Option<Var>), ModelError> {
        if self.config.use_gcn {
            let out = gcn::gcn_layer(tape, adjacency, h_ctx, labels, vars)?;
            Ok((Some(out.hidden), Some(out.attention)))
        } else {
            Ok((Some(gcn::label_only(tape, labels, vars)?), None))
        }
    }

    /// Combined loss of one instance.
    ///
    /// `R1` covers the enabled views; `R2` and `R3` need both. A loss with a
    /// zero weight is not built at all.
    pub fn instance_loss(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        f: &SentenceFeatures,
        verb: usize,
        gold: &[usize],
        opts: &LossOptions,
    ) -> Result<InstanceLoss, ModelError> {
        let fwd = self.forward(tape, vars, f, verb)?;
        let ce = multiview::tagging_loss(tape, fwd.logits, gold)?;
        let w = opts.weights;
        let mut views = Vec::new();
        if let Some(h) = fwd.h_con {
            views.push(ViewRep {
                hidden: h,
                adjacency: &f.const_adjacency,
            });
        }
        if let Some(h) = fwd.h_dep {
            views.push(ViewRep {
                hidden: h,
                adjacency: &f.dep_adjacency,
            });
        }
        let r1 = if w.alpha > 0.0 && !views.is_empty() {
            Some(multiview::loss_r1(tape, &views, opts.exclude_self_loops)?)
        } else {
            None
        };
        let both = views.len() == 2;
        let r2 = if w.beta > 0.0 && both {
            Some(multiview::loss_r2(tape, views[0].hidden, views[1].hidden)?)
        } else {
            None
        };
        let r3 = if w.gamma > 0.0 && both {
            Some(multiview::loss_r3(tape, views[0], views[1], opts.exclude_self_loops)?)
        } else {
            None
        };
        let parts = LossParts { ce, r1, r2, r3 };
        let total = multiview::combined_loss(tape, &parts, &w)?;
        Ok(InstanceLoss {
            total,
            parts,
            forward: fwd,
        })
    }

    /// Logits of one instance as a plain tensor.
    pub fn logits(&self, f: &SentenceFeatures, verb: usize) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|t| tape.constant(t.clone())).collect();
        let fwd = self.forward(&mut tape, &vars, f, verb)?;
        Ok(tape.value(fwd.logits).clone())
    }

    /// Training instances of a corpus, one per verb.
    pub fn instances(&self, corpus: &[ParsedSentence]) -> Result<Vec<Instance>, ModelError> {
        let tags = self.tag_set();
        let mut out = Vec::new();
        for (idx, s) in corpus.iter().enumerate() {
            for inst in expand_instances(s, &tags)? {
                out.push(Instance {
                    sentence: idx,
                    verb: inst.indicator_verb,
                    gold: inst.label_ids(&tags),
                });
            }
        }
        Ok(out)
    }
}

/// Runs one instance per verb and keeps every decoded tuple.
pub fn extract(s: &ParsedSentence, model: &Model) -> Result<Vec<Tuple>, ModelError> {
    let f = model.features(s);
    extract_with_features(s, &f, model)
}

pub fn extract_with_features(s: &ParsedSentence, f: &SentenceFeatures, model: &Model) -> Result<Vec<Tuple>, ModelError> {
    let tags = model.tag_set();
    let mut out = Vec::new();
    for &verb in s.verbs() {
        let logits = model.logits(f, verb)?;
        if let Some(t) = decode_logits(&logits, &tags, verb) {
            out.push(t);
        }
    }
    Ok(out)
}

/// Fraction of gold token tags predicted exactly, over every instance.
pub fn token_accuracy(model: &Model, corpus: &[ParsedSentence]) -> Result<f64, ModelError> {
    let (mut hit, mut total) = (0usize, 0usize);
    for inst in model.instances(corpus)? {
        let f = model.features(&corpus[inst.sentence]);
        let logits = model.logits(&f, inst.verb)?;
        for (pred, gold) in tagger::argmax_probs(&logits).iter().zip(&inst.gold) {
            hit += usize::from(pred.0 == *gold);
            total += 1;
        }
    }
    Ok(if total == 0 { 0.0 } else { hit as f64 / total as f64 })
}

/// Sizes of a [`gradient_check`] run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckSpec {
    pub n: usize,
    pub d_h: usize,
    pub d_l: usize,
    pub weights: LossWeights,
    pub eps: f64,
}

impl Default for GradCheckSpec {
    fn default() -> Self {
        GradCheckSpec {
            n: 6,
            d_h: 8,
            d_l: 4,
            weights: LossWeights {
                alpha: 1.0,
                beta: 1.0,
                gamma: 1.0,
            },
            eps: 1e-5,
        }
    }
}

/// Compares the analytic gradient of the combined loss of one random
/// instance against central differences over every parameter coordinate.
pub fn gradient_check<R: Rng + ?Sized>(rng: &mut R, spec: &GradCheckSpec) -> Result<GradCheckReport, ModelError> {
    let s = crate::synth::random_sentence(rng, "gradcheck", spec.n);
    let cfg = ModelConfig {
        d_h: spec.d_h,
        d_l: spec.d_l,
        ..ModelConfig::default()
    };
    let mut model = Model::init(cfg, std::slice::from_ref(&s), rng);
    for p in &mut model.params {
        *p = Tensor::uniform(p.shape(), -0.5, 0.5, rng);
    }
    let f = model.features(&s);
    let inst = model
        .instances(std::slice::from_ref(&s))?
        .into_iter()
        .next()
        .expect("random sentences have a verb");
    let opts = LossOptions {
        weights: spec.weights,
        exclude_self_loops: true,
    };
    let report = grad_check_many(
        |tape, vars| match model.instance_loss(tape, vars, &f, inst.verb, &inst.gold, &opts) {
            Ok(l) => Ok(l.total),
            Err(ModelError::Numerics(e)) => Err(e),
            Err(other) => Err(NumericsError::InvalidArgument(other.to_string())),
        },
        &model.params,
        spec.eps,
    )?;
    Ok(report)
}
