use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use synoie::corpus::{load_corpus, load_zipped, CorpusError, ParsedSentence};
use synoie::encoder::EncoderKind;
use synoie::eval::{self, EvalError, MatchMode};
use synoie::graphs::{build_const_graph, build_dep_graph, ConstVariant, FlattenConfig, GraphError, GraphFormat};
use synoie::model::{extract, gradient_check, GradCheckSpec, ModelError};
use synoie::numerics::NumericsError;
use synoie::tagger::{write_extractions, ExtractedTuple, ExtractionRecord};
use synoie::trainer::{
    format_ablation_table, run_ablation, split_corpus, train_with_progress, AblationGrid, Checkpoint, TrainConfig,
    TrainError,
};

#[derive(Parser)]
#[command(name = "synoie", version, about = "Syntax-aware open information extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump constituency and dependency graphs.
    BuildGraphs(BuildGraphsArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Extract tuples with a trained checkpoint.
    Extract(ExtractArgs),
    /// Score predicted tuples against gold tuples.
    Score(ScoreArgs),
    /// Check analytic gradients of the combined loss against finite differences.
    Gradcheck(GradcheckArgs),
    /// Train and score every setting of an ablation grid.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// JSONL corpus with tokens, parses, verbs and optional gold tuples.
    #[arg(long, required_unless_present = "ptb")]
    corpus: Option<PathBuf>,
    /// Bracketed constituency trees, zipped with --conllu and --verbs.
    #[arg(long, requires_all = ["conllu", "verbs"], conflicts_with = "corpus")]
    ptb: Option<PathBuf>,
    #[arg(long)]
    conllu: Option<PathBuf>,
    /// One line of 0-based verb indices per sentence.
    #[arg(long)]
    verbs: Option<PathBuf>,
}

impl CorpusArgs {
    fn load(&self) -> Result<Vec<ParsedSentence>, CliError> {
        let corpus = match (&self.corpus, &self.ptb, &self.conllu, &self.verbs) {
            (Some(path), ..) => load_corpus(path),
            (None, Some(ptb), Some(conllu), Some(verbs)) => load_zipped(ptb, conllu, verbs),
            _ => return Err(CliError::Usage(anyhow!("give --corpus or all of --ptb, --conllu and --verbs"))),
        };
        corpus.map_err(CliError::from)
    }
}

#[derive(Args, Default)]
struct FlattenArgs {
    /// Maximum word distance of const-graph edges.
    #[arg(long)]
    max_distance: Option<usize>,
    /// Const-graph construction: paper, v1, v2 or v3.
    #[arg(long)]
    const_variant: Option<ConstVariant>,
    /// Comma-separated constituent tags treated as clauses.
    #[arg(long, value_delimiter = ',')]
    clause_tags: Option<Vec<String>>,
}

#[derive(Args)]
struct BuildGraphsArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    /// const, dep or both.
    #[arg(long, default_value = "both")]
    view: String,
    /// Output directory, one file per sentence and view. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// json or dot.
    #[arg(long, default_value = "json")]
    format: String,
    #[command(flatten)]
    flatten: FlattenArgs,
}

/// Flags that override keys of the config file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML file with training settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed; falls back to SMILE_SEED, then to the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    d_h: Option<usize>,
    #[arg(long)]
    d_l: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    use_dep: Option<bool>,
    #[arg(long)]
    use_const: Option<bool>,
    #[arg(long)]
    use_gcn: Option<bool>,
    #[arg(long)]
    use_r1: Option<bool>,
    #[arg(long)]
    use_r2: Option<bool>,
    #[arg(long)]
    use_r3: Option<bool>,
    #[arg(long)]
    max_arg: Option<u8>,
    #[arg(long)]
    dev_fraction: Option<f64>,
    #[arg(long)]
    mv_exclude_self_loops: Option<bool>,
    /// toy or external-precomputed.
    #[arg(long, value_parser = parse_encoder)]
    encoder: Option<EncoderKind>,
    #[arg(long)]
    external_vectors: Option<PathBuf>,
    /// Threads for data-parallel instance evaluation.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    flatten: FlattenArgs,
}

fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    match s {
        "toy" => Ok(EncoderKind::Toy),
        "external-precomputed" => Ok(EncoderKind::ExternalPrecomputed),
        other => Err(format!("unknown encoder `{other}`")),
    }
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v; })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::load(path)?,
            None => TrainConfig::default(),
        };
        if let Ok(seed) = std::env::var("SMILE_SEED") {
            cfg.seed = seed
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(anyhow!("SMILE_SEED must be an unsigned integer, got `{seed}`")))?;
        }
        apply!(
            cfg, self, seed, epochs, lr, batch_size, d_h, d_l, alpha, beta, gamma, use_dep, use_const, use_gcn,
            use_r1, use_r2, use_r3, max_arg, dev_fraction, mv_exclude_self_loops, encoder, workers
        );
        if self.external_vectors.is_some() {
            cfg.external_vectors = self.external_vectors.clone();
        }
        let f = &self.flatten;
        apply!(cfg, f, max_distance, const_variant, clause_tags);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Checkpoint file to write.
    #[arg(long)]
    out_ckpt: PathBuf,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    corpus: CorpusArgs,
    /// Extraction JSONL. Stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Extraction JSONL.
    #[arg(long)]
    pred: PathBuf,
    /// Extraction JSONL or a corpus with gold tuples.
    #[arg(long)]
    gold: PathBuf,
    /// exact or lexical.
    #[arg(long, default_value = "exact")]
    mode: String,
    /// json or text.
    #[arg(long, default_value = "json")]
    report: String,
    /// Join ARG1..n into one argument before matching.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sentence length.
    #[arg(long, default_value_t = 6)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    d_h: usize,
    #[arg(long, default_value_t = 4)]
    d_l: usize,
    /// Number of random instances.
    #[arg(long, default_value_t = 5)]
    instances: usize,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// table, variants or all.
    #[arg(long, default_value = "table")]
    grid: String,
    /// Held-out corpus to score on. Defaults to the development split, or the
    /// training corpus when that split is empty.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Also write the rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Numeric(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.into())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::UnknownMode(_) => CliError::Usage(e.into()),
            _ => CliError::Data(e.into()),
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Usage(e.into())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Numerics(_) => CliError::Numeric(e.into()),
            _ => CliError::Data(e.into()),
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        CliError::Numeric(e.into())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig(_) => CliError::Usage(e.into()),
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.into()),
            TrainError::Model(m) => m.into(),
            TrainError::Eval(v) => v.into(),
            _ => CliError::Data(e.into()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.into())
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Data(anyhow!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).map_err(io_error(p))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_graphs(args: BuildGraphsArgs) -> Result<(), CliError> {
    let format: GraphFormat = args.format.parse()?;
    let (want_const, want_dep) = match args.view.as_str() {
        "const" => (true, false),
        "dep" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::Usage(anyhow!("unknown view `{other}` (expected const, dep or both)"))),
    };
    let mut flatten = FlattenConfig::default();
    let f = &args.flatten;
    apply!(flatten, f, max_distance, clause_tags);
    if let Some(v) = f.const_variant {
        flatten.variant = v;
    }
    let corpus = args.corpus.load()?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let mut stdout = io::stdout().lock();
    for s in &corpus {
        let words = s.surfaces();
        let mut graphs = Vec::new();
        if want_const {
            graphs.push(("const", build_const_graph(s, &flatten)));
        }
        if want_dep {
            graphs.push(("dep", build_dep_graph(s)));
        }
        for (view, g) in graphs {
            let text = synoie::graphs::render_graph(&g, format, Some(&words));
            match &args.out {
                Some(dir) => {
                    let path = dir.join(format!("{}.{view}.{}", s.id, format.extension()));
                    fs::write(&path, text).map_err(io_error(&path))?;
                }
                None => writeln!(stdout, "{text}")?,
            }
        }
    }
    Ok(())
}

fn train_cmd(args: TrainArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve()?;
    let corpus = args.corpus.load()?;
    let quiet = args.quiet;
    let ckpt = train_with_progress(&corpus, &cfg, |r| {
        if !quiet {
            let dev = match (r.dev_f1, r.dev_loss) {
                (Some(f), Some(l)) => format!("  dev F1 {f:.4}  dev loss {l:.5}"),
                _ => String::new(),
            };
            eprintln!("epoch {:>4}  train loss {:.5}{dev}", r.epoch, r.train_loss);
        }
    })?;
    ckpt.save(&args.out_ckpt)?;
    eprintln!("saved epoch {} to {}", ckpt.epoch, args.out_ckpt.display());
    Ok(())
}

fn extract_cmd(args: ExtractArgs) -> Result<(), CliError> {
    let model = Checkpoint::load(&args.ckpt)?.to_model()?;
    let corpus = args.corpus.load()?;
    let mut records = Vec::with_capacity(corpus.len());
    for s in &corpus {
        let words = s.surfaces();
        records.push(ExtractionRecord {
            sentence_id: s.id.clone(),
            tuples: extract(s, &model)?
                .iter()
                .map(|t| ExtractedTuple::from_tuple(t, &words))
                .collect(),
        });
    }
    let mut out = output(args.out.as_deref())?;
    write_extractions(&mut out, &records)?;
    out.flush()?;
    Ok(())
}

fn score_cmd(args: ScoreArgs) -> Result<(), CliError> {
    let mode: MatchMode = args.mode.parse()?;
    let pred = eval::load_eval_file(&args.pred)?;
    let gold = eval::load_eval_file(&args.gold)?;
    let report = eval::score(&pred, &gold, mode, args.binary)?;
    match args.report.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        "text" => println!(
            "P {:.4}  R {:.4}  F1 {:.4}  AUC {:.4}",
            report.precision, report.recall, report.f1, report.auc
        ),
        other => return Err(CliError::Usage(anyhow!("unknown report format `{other}` (expected json or text)"))),
    }
    Ok(())
}

fn gradcheck_cmd(args: GradcheckArgs) -> Result<(), CliError> {
    if args.size == 0 || args.d_h == 0 || args.d_l == 0 || args.instances == 0 {
        return Err(CliError::Usage(anyhow!("--size, --d-h, --d-l and --instances must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let spec = GradCheckSpec {
        n: args.size,
        d_h: args.d_h,
        d_l: args.d_l,
        ..GradCheckSpec::default()
    };
    let mut worst = 0.0f64;
    for _ in 0..args.instances {
        worst = worst.max(gradient_check(&mut rng, &spec)?.max_rel_error);
    }
    println!("max relative error {worst:.3e} over {} instances", args.instances);
    if worst < args.tolerance {
        Ok(())
    } else {
        Err(CliError::Numeric(anyhow!("max relative error {worst:.3e} exceeds {:.1e}", args.tolerance)))
    }
}

fn ablate_cmd(args: AblateArgs) -> Result<(), CliError> {
    let grid: AblationGrid = args.grid.parse()?;
    let cfg = args.config.resolve()?;
    let corpus = args.corpus.load()?;
    let test = match &args.test {
        Some(path) => load_corpus(path)?,
        None => {
            let (_, dev) = split_corpus(corpus.len(), &cfg);
            if dev.is_empty() {
                corpus.clone()
            } else {
                dev.iter().map(|i| corpus[*i].clone()).collect()
            }
        }
    };
    let rows = run_ablation(&corpus, &test, &cfg, grid, |name, row| {
        eprintln!("{name}: F1 {:.4}", row.exact.f1);
    })?;
    print!("{}", format_ablation_table(&rows));
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&rows).expect("rows serialize");
        fs::write(path, text).map_err(io_error(path))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::BuildGraphs(a) => build_graphs(a),
        Command::Train(a) => train_cmd(a),
        Command::Extract(a) => extract_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Gradcheck(a) => gradcheck_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(err) | CliError::Data(err) | CliError::Numeric(err)) = &e;
            eprintln!("error: {err}");
            ExitCode::from(e.code())
        }
    }
}
