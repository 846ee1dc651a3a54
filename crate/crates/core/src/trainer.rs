//! Training loop, checkpoints, evaluation and the ablation grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ParsedSentence;
use crate::encoder::{EncoderKind, PrecomputedVectors, Vocabulary};
use crate::eval::{self, EvalError, EvalSentence, EvalTuple, MatchMode, ScoreReport};
use crate::gcn::LabelInventory;
use crate::graphs::{ConstVariant, FlattenConfig};
use crate::model::{extract_with_features, Instance, LossOptions, Model, ModelConfig, ModelError, SentenceFeatures, PARAM_NAMES};
use crate::multiview::LossWeights;
use crate::numerics::{adam_step, AdamConfig, AdamState, NumericsError, Tape, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("non-finite loss at epoch {epoch} (sentence `{sentence}`, verb {verb}): {detail}")]
    NonFiniteLoss {
        epoch: usize,
        sentence: String,
        verb: usize,
        detail: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {message}")]
    Checkpoint { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl TrainError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        TrainError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Every training knob. Serialized as flat TOML keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub d_h: usize,
    pub d_l: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub max_distance: usize,
    pub const_variant: ConstVariant,
    pub clause_tags: Vec<String>,
    pub use_dep: bool,
    pub use_const: bool,
    pub use_gcn: bool,
    pub use_r1: bool,
    pub use_r2: bool,
    pub use_r3: bool,
    pub max_arg: u8,
    pub dev_fraction: f64,
    pub mv_exclude_self_loops: bool,
    pub encoder: EncoderKind,
    pub external_vectors: Option<PathBuf>,
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let weights = LossWeights::default();
        let flatten = FlattenConfig::default();
        TrainConfig {
            seed: 42,
            d_h: 64,
            d_l: 32,
            lr: 1e-3,
            epochs: 50,
            batch_size: 8,
            alpha: weights.alpha,
            beta: weights.beta,
            gamma: weights.gamma,
            max_distance: flatten.max_distance,
            const_variant: flatten.variant,
            clause_tags: flatten.clause_tags,
            use_dep: true,
            use_const: true,
            use_gcn: true,
            use_r1: true,
            use_r2: true,
            use_r3: true,
            max_arg: crate::tuple::DEFAULT_MAX_ARG,
            dev_fraction: 0.1,
            mv_exclude_self_loops: true,
            encoder: EncoderKind::Toy,
            external_vectors: None,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        toml::from_str(text).map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TrainError::io(path, e))?;
        TrainConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.d_h == 0 || self.d_l == 0 {
            return bad("d_h and d_l must be positive");
        }
        if self.batch_size == 0 || self.workers == 0 {
            return bad("batch_size and workers must be positive");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return bad("dev_fraction must lie in [0, 1)");
        }
        if self.max_distance == 0 {
            return bad("max_distance must be at least 1");
        }
        self.raw_weights()
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }

    fn raw_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        }
    }

    /// Loss weights after the `use_r*` switches.
    pub fn weights(&self) -> LossWeights {
        let on = |flag: bool, w: f64| if flag { w } else { 0.0 };
        LossWeights {
            alpha: on(self.use_r1, self.alpha),
            beta: on(self.use_r2, self.beta),
            gamma: on(self.use_r3, self.gamma),
        }
    }

    pub fn flatten(&self) -> FlattenConfig {
        FlattenConfig {
            max_distance: self.max_distance,
            variant: self.const_variant,
            clause_tags: self.clause_tags.clone(),
            ..FlattenConfig::default()
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            d_h: self.d_h,
            d_l: self.d_l,
            max_arg: self.max_arg,
            flatten: self.flatten(),
            use_dep: self.use_dep,
            use_const: self.use_const,
            use_gcn: self.use_gcn,
            encoder: self.encoder,
        }
    }

    pub fn loss_options(&self) -> LossOptions {
        LossOptions {
            weights: self.weights(),
            exclude_self_loops: self.mv_exclude_self_loops,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Metrics of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
    pub dev_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

pub const CHECKPOINT_FORMAT: &str = "synoie-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Self-describing container of named tensors and training metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub dep_labels: LabelInventory,
    pub const_labels: LabelInventory,
    pub tensors: Vec<NamedTensor>,
    pub epoch: usize,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model, config: &TrainConfig, epoch: usize, history: Vec<EpochRecord>) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            vocab: model.vocab.clone(),
            dep_labels: model.dep_labels.clone(),
            const_labels: model.const_labels.clone(),
            tensors: PARAM_NAMES
                .iter()
                .zip(&model.params)
                .map(|(n, t)| NamedTensor {
                    name: n.to_string(),
                    tensor: t.clone(),
                })
                .collect(),
            epoch,
            history,
        }
    }

    /// Rebuilds the model, loading external vectors when configured.
    pub fn to_model(&self) -> Result<Model, TrainError> {
        let mut params = Vec::with_capacity(PARAM_NAMES.len());
        for name in PARAM_NAMES {
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| TrainError::Checkpoint {
                    path: String::new(),
                    message: format!("missing tensor `{name}`"),
                })?;
            params.push(t.tensor.clone());
        }
        let model = Model {
            config: self.config.model_config(),
            vocab: self.vocab.clone(),
            dep_labels: self.dep_labels.clone(),
            const_labels: self.const_labels.clone(),
            params,
            external: load_external(&self.config)?,
        };
        model.check_params()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|e| TrainError::Checkpoint {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        fs::write(path, text).map_err(|e| TrainError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| TrainError::io(path, e))?;
        let err = |message: String| TrainError::Checkpoint {
            path: path.display().to_string(),
            message,
        };
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(err(format!("not a checkpoint (format `{}`)", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }
}

fn load_external(cfg: &TrainConfig) -> Result<Option<PrecomputedVectors>, TrainError> {
    match (cfg.encoder, &cfg.external_vectors) {
        (EncoderKind::Toy, _) => Ok(None),
        (EncoderKind::ExternalPrecomputed, Some(path)) => {
            Ok(Some(PrecomputedVectors::load(path).map_err(ModelError::from)?))
        }
        (EncoderKind::ExternalPrecomputed, None) => Err(ModelError::MissingExternalVectors.into()),
    }
}

/// Seeded split into `(train, dev)` sentence indices.
pub fn split_corpus(n: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_5917);
    idx.shuffle(&mut rng);
    let n_dev = ((n as f64) * cfg.dev_fraction).floor() as usize;
    let n_dev = n_dev.min(n.saturating_sub(1));
    let mut dev = idx[..n_dev].to_vec();
    let mut train = idx[n_dev..].to_vec();
    dev.sort_unstable();
    train.sort_unstable();
    (train, dev)
}

/// Loss value and per-parameter gradients of one instance.
fn instance_gradients(
    model: &Model,
    f: &SentenceFeatures,
    inst: &Instance,
    opts: &LossOptions,
) -> Result<(f64, Vec<Tensor>), ModelError> {
    let mut tape = Tape::new();
    let vars = model.bind(&mut tape);
    let loss = model.instance_loss(&mut tape, &vars, f, inst.verb, &inst.gold, opts)?;
    let value = tape.value(loss.total).item();
    let grads = tape.backward(loss.total)?;
    let out = vars
        .iter()
        .zip(&model.params)
        .map(|(v, p)| grads.get_or_zeros(*v, p.shape()))
        .collect();
    Ok((value, out))
}

type InstanceResult = Result<(f64, Vec<Tensor>), ModelError>;

/// Evaluates a batch on `workers` threads; results come back in batch order.
fn batch_gradients(
    model: &Model,
    features: &[SentenceFeatures],
    batch: &[&Instance],
    opts: &LossOptions,
    workers: usize,
) -> Vec<InstanceResult> {
    let run = |inst: &&Instance| instance_gradients(model, &features[inst.sentence], inst, opts);
    if workers <= 1 || batch.len() <= 1 {
        return batch.iter().map(run).collect();
    }
    let chunk = batch.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn non_finite(epoch: usize, f: &SentenceFeatures, verb: usize, detail: String) -> TrainError {
    TrainError::NonFiniteLoss {
        epoch,
        sentence: f.id.clone(),
        verb,
        detail,
    }
}

/// Mean loss over instances with the given options, without gradients.
fn mean_loss(model: &Model, features: &[SentenceFeatures], instances: &[Instance], opts: &LossOptions) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for inst in instances {
        let mut tape = Tape::new();
        let vars: Vec<_> = model.params.iter().map(|t| tape.constant(t.clone())).collect();
        let l = model.instance_loss(&mut tape, &vars, &features[inst.sentence], inst.verb, &inst.gold, opts)?;
        total += tape.value(l.total).item();
    }
    Ok(total / instances.len().max(1) as f64)
}

/// Trains on `corpus` and returns the best checkpoint by development
/// exact-match F1 (ties: lower development loss). Without a development
/// split the last epoch is returned.
pub fn train(corpus: &[ParsedSentence], cfg: &TrainConfig) -> Result<Checkpoint, TrainError> {
    train_with_progress(corpus, cfg, |_| {})
}

pub fn train_with_progress<F>(corpus: &[ParsedSentence], cfg: &TrainConfig, mut progress: F) -> Result<Checkpoint, TrainError>
where
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let (train_idx, dev_idx) = split_corpus(corpus.len(), cfg);
    let train_set: Vec<ParsedSentence> = train_idx.iter().map(|i| corpus[*i].clone()).collect();
    let dev_set: Vec<ParsedSentence> = dev_idx.iter().map(|i| corpus[*i].clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::init(cfg.model_config(), &train_set, &mut rng);
    model.external = load_external(cfg)?;

    let features: Vec<SentenceFeatures> = train_set.iter().map(|s| model.features(s)).collect();
    let instances = model.instances(&train_set)?;
    if instances.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let dev_features: Vec<SentenceFeatures> = dev_set.iter().map(|s| model.features(s)).collect();
    let dev_instances = model.instances(&dev_set)?;

    let opts = cfg.loss_options();
    let adam = cfg.adam();
    let mut state = AdamState::new(&model.params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, Vec<Tensor>)> = None;
    let mut order: Vec<usize> = (0..instances.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch_idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Instance> = batch_idx.iter().map(|i| &instances[*i]).collect();
            let results = batch_gradients(&model, &features, &batch, &opts, cfg.workers);
            let mut sum: Vec<Tensor> = model.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            for (inst, r) in batch.iter().zip(results) {
                let f = &features[inst.sentence];
                let (value, grads) = r.map_err(|e| match e {
                    ModelError::Numerics(NumericsError::NonFiniteValue { op }) => {
                        non_finite(epoch, f, inst.verb, format!("non-finite value in `{op}`"))
                    }
                    other => other.into(),
                })?;
                if !value.is_finite() {
                    return Err(non_finite(epoch, f, inst.verb, format!("loss = {value}")));
                }
                epoch_loss += value;
                for (acc, g) in sum.iter_mut().zip(&grads) {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for g in &mut sum {
                for v in g.data_mut() {
                    *v *= scale;
                }
            }
            adam_step(&mut model.params, &sum, &mut state, &adam).map_err(ModelError::from)?;
        }

        let mut record = EpochRecord {
            epoch,
            train_loss: epoch_loss / instances.len() as f64,
            dev_f1: None,
            dev_loss: None,
        };
        if !dev_set.is_empty() {
            let report = score_with_features(&model, &dev_set, &dev_features, MatchMode::Exact)?;
            let loss = mean_loss(&model, &dev_features, &dev_instances, &opts)?;
            record.dev_f1 = Some(report.f1);
            record.dev_loss = Some(loss);
            let better = match &best {
                None => true,
                Some((f1, l, _, _)) => report.f1 > *f1 || (report.f1 == *f1 && loss < *l),
            };
            if better {
                best = Some((report.f1, loss, epoch, model.params.clone()));
            }
        }
        progress(&record);
        history.push(record);
    }

    let epoch = match best {
        Some((_, _, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => cfg.epochs,
    };
    Ok(Checkpoint::from_model(&model, cfg, epoch, history))
}

fn score_with_features(
    model: &Model,
    corpus: &[ParsedSentence],
    features: &[SentenceFeatures],
    mode: MatchMode,
) -> Result<ScoreReport, TrainError> {
    let mut pred = Vec::with_capacity(corpus.len());
    for (s, f) in corpus.iter().zip(features) {
        let tokens = s.surfaces();
        let tuples = extract_with_features(s, f, model)?;
        pred.push(EvalSentence {
            id: s.id.clone(),
            tuples: tuples.iter().map(|t| EvalTuple::from_tuple(t, &tokens)).collect(),
        });
    }
    let gold: Vec<EvalSentence> = corpus.iter().map(EvalSentence::from_gold).collect();
    Ok(eval::score(&pred, &gold, mode, false)?)
}

/// Extracts with `model` on every sentence and scores against the gold tuples.
pub fn evaluate_model(model: &Model, corpus: &[ParsedSentence], mode: MatchMode) -> Result<ScoreReport, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let features: Vec<SentenceFeatures> = corpus.iter().map(|s| model.features(s)).collect();
    score_with_features(model, corpus, &features, mode)
}

pub fn evaluate_checkpoint(ckpt: &Checkpoint, corpus: &[ParsedSentence], mode: MatchMode) -> Result<ScoreReport, TrainError> {
    evaluate_model(&ckpt.to_model()?, corpus, mode)
}

/// Which settings [`run_ablation`] compares.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationGrid {
    /// Full model and GCN-free model, each with every single loss removed.
    Table,
    /// Constituency-only model under each graph variant.
    Variants,
    All,
}

impl FromStr for AblationGrid {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" | "losses" => Ok(AblationGrid::Table),
            "variants" => Ok(AblationGrid::Variants),
            "all" => Ok(AblationGrid::All),
            other => Err(TrainError::InvalidConfig(format!(
                "unknown ablation grid `{other}` (expected table, variants or all)"
            ))),
        }
    }
}

/// One named configuration of the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AblationSetting {
    pub name: String,
    pub config: TrainConfig,
}

pub fn ablation_settings(base: &TrainConfig, grid: AblationGrid) -> Vec<AblationSetting> {
    let mut out = Vec::new();
    if matches!(grid, AblationGrid::Table | AblationGrid::All) {
        for (gcn_name, use_gcn) in [("full", true), ("w/o GCN", false)] {
            let with = TrainConfig {
                use_gcn,
                use_dep: true,
                use_const: true,
                use_r1: true,
                use_r2: true,
                use_r3: true,
                ..base.clone()
            };
            out.push(AblationSetting {
                name: gcn_name.to_string(),
                config: with.clone(),
            });
            for k in 1..=3 {
                let mut c = with.clone();
                match k {
                    1 => c.use_r1 = false,
                    2 => c.use_r2 = false,
                    _ => c.use_r3 = false,
                }
                out.push(AblationSetting {
                    name: format!("{gcn_name} - w/o R{k}"),
                    config: c,
                });
            }
        }
    }
    if matches!(grid, AblationGrid::Variants | AblationGrid::All) {
        for (name, variant) in [
            ("const-graph", ConstVariant::Paper),
            ("variant 1", ConstVariant::V1),
            ("variant 2", ConstVariant::V2),
            ("variant 3", ConstVariant::V3),
        ] {
            out.push(AblationSetting {
                name: format!("const-only {name}"),
                config: TrainConfig {
                    use_dep: false,
                    use_const: true,
                    use_gcn: true,
                    use_r1: false,
                    use_r2: false,
                    use_r3: false,
                    const_variant: variant,
                    ..base.clone()
                },
            });
        }
    }
    out
}

/// Scores of one grid row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub exact: ScoreReport,
    pub lexical: ScoreReport,
}

/// Trains every setting on `train_corpus` and scores it on `test_corpus`.
pub fn run_ablation<F>(
    train_corpus: &[ParsedSentence],
    test_corpus: &[ParsedSentence],
    base: &TrainConfig,
    grid: AblationGrid,
    mut progress: F,
) -> Result<Vec<AblationRow>, TrainError>
where
    F: FnMut(&str, &AblationRow),
{
    let mut rows = Vec::new();
    for setting in ablation_settings(base, grid) {
        let ckpt = train(train_corpus, &setting.config)?;
        let model = ckpt.to_model()?;
        let row = AblationRow {
            name: setting.name.clone(),
            exact: evaluate_model(&model, test_corpus, MatchMode::Exact)?,
            lexical: evaluate_model(&model, test_corpus, MatchMode::Lexical)?,
        };
        progress(&setting.name, &row);
        rows.push(row);
    }
    Ok(rows)
}

/// Plain-text comparison table of ablation rows.
pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(7);
    let mut out = format!(
        "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}\n",
        "setting", "P", "R", "F1", "AUC", "lex-F1"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}  {:>7.2}\n",
            r.name,
            100.0 * r.exact.precision,
            100.0 * r.exact.recall,
            100.0 * r.exact.f1,
            100.0 * r.exact.auc,
            100.0 * r.lexical.f1,
        ));
    }
    out
}
