//! Command-line front end. Logs go to standard error, data only to the
//! files named by flags.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::corpus::{
    generate_synthetic, read_conll, read_conll_inferred, read_tokens, selective_retag, write_conll,
    AnnotatedCorpus, AnnotatedSentence, GeneratorSpec,
};
use crate::error::{Error, Result};
use crate::evalmetrics::{micro_prf, EvalResult};
use crate::model::{Model, ModelKind};
use crate::tagspace::{BioLabel, TagHierarchy, TagSet};
use crate::trainer::{decode_all, DevSet, Optimizer, TrainConfig, TrainReport};
use crate::unify::{
    distill, merge_corpus, train_marginal_crf, train_supervised, Mode, ScenarioConfig,
    TeacherHandle,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "tagunify",
    version,
    about = "Train one tagger over several heterogeneous tag sets"
)]
struct Cli {
    /// Seed for shuffling and generation; overrides seeds in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for inference and gradients (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a supervised tagger, or a marginal CRF over several tag sets.
    Train(TrainArgs),
    /// Distill teachers into a unified student as described by a scenario file.
    Distill(DistillArgs),
    /// Merge teacher decodes token by token (no training).
    Merge(MergeArgs),
    /// Decode sentences with a model.
    Tag(TagArgs),
    /// Score predictions against gold spans.
    Eval(EvalArgs),
    /// Write a synthetic annotated corpus.
    Generate(GenerateArgs),
    /// Validate a hierarchy file and print its unified labels.
    HierarchyCheck(HierarchyCheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TrainMode {
    Supervised,
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Crf,
    Local,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Crf => ModelKind::Crf,
            KindArg::Local => ModelKind::Local,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DistillMode {
    Mardi,
    MardiData,
    Progressive,
}

/// Optimization flags shared by `train` and `distill`.
#[derive(Debug, Args)]
struct OptimArgs {
    /// TOML file of training settings; flags below override it.
    #[arg(long, value_name = "TOML")]
    train_config: Option<PathBuf>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Per-epoch JSON-lines training log.
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
}

impl OptimArgs {
    fn inputs(&self) -> Vec<&Path> {
        self.train_config.iter().map(PathBuf::as_path).collect()
    }

    fn apply(&self, mut cfg: TrainConfig, global: &Cli) -> Result<TrainConfig> {
        if let Some(p) = &self.train_config {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            cfg = toml::from_str(&text)?;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.epochs {
            cfg.max_epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(o) = self.optimizer {
            cfg.optimizer = match o {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Adam => Optimizer::Adam,
            };
        }
        if let Some(l) = &self.log {
            cfg.log_path = Some(l.clone());
        }
        if let Some(s) = global.seed {
            cfg.seed = s;
        }
        if global.workers.is_some() {
            cfg.workers = global.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "supervised")]
    mode: TrainMode,
    /// Training corpus in CoNLL format. In marginal mode write `ID=PATH`
    /// where ID is a tag set declared in the hierarchy. Repeatable.
    #[arg(long = "data", value_name = "[ID=]PATH", required = true)]
    data: Vec<String>,
    /// Hierarchy file; required in marginal mode.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Dev corpus for checkpoint selection, labeled in the model's output tag set.
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "crf")]
    kind: KindArg,
    /// Where to write the trained model.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args)]
struct DistillArgs {
    /// Scenario TOML naming hierarchy, teachers, text and labeled data.
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario's mode.
    #[arg(long, value_enum)]
    mode: Option<DistillMode>,
    /// Override the supervision weight α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the distillation temperature.
    #[arg(long)]
    temperature: Option<f64>,
    /// Where to write the student model.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    optim: OptimArgs,
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[arg(long)]
    hierarchy: PathBuf,
    /// Teacher model; repeatable. Ties go to the earliest teacher.
    #[arg(long = "teacher", required = true)]
    teachers: Vec<PathBuf>,
    /// Sentences to tag: one token per line (extra columns ignored), blank line between sentences.
    #[arg(long)]
    input: PathBuf,
    /// CoNLL output over the unified labels.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sentences to tag: one token per line (extra columns ignored), blank line between sentences.
    #[arg(long)]
    input: PathBuf,
    /// CoNLL output.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Also write the metrics as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Score after mapping every leaf to its root in this hierarchy.
    #[arg(long)]
    coarse: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generator settings in TOML.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1000)]
    sentences: usize,
    /// Keep only these types, relabeling the rest as O.
    #[arg(long, value_delimiter = ',', value_name = "TYPE,...")]
    keep: Vec<String>,
    /// Write tokens only, without labels.
    #[arg(long)]
    tokens_only: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct HierarchyCheckArgs {
    #[arg(long)]
    hierarchy: PathBuf,
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code. Reports go to standard output.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run_with_output(argv, &mut std::io::stdout())
}

/// [`run`] with the printed reports (`eval`, `hierarchy-check`) sent to
/// `out`.
pub fn run_with_output<I, T>(argv: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .try_init();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return EXIT_USAGE;
    }
    let missing: Vec<&Path> = inputs(&cli.command)
        .into_iter()
        .filter(|p| !p.exists())
        .collect();
    if !missing.is_empty() {
        for p in missing {
            eprintln!("error: input file {} does not exist", p.display());
        }
        return EXIT_USAGE;
    }
    let outcome = match cli.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, out)),
            Err(e) => Err(Error::InvalidArgument(format!(
                "cannot start {n} workers: {e}"
            ))),
        },
        None => dispatch(&cli, out),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn split_data_arg(arg: &str) -> (Option<&str>, &Path) {
    match arg.split_once('=') {
        Some((id, path)) if !id.is_empty() && !id.contains(['/', '\\']) => {
            (Some(id), Path::new(path))
        }
        _ => (None, Path::new(arg)),
    }
}

/// Every file a command reads, checked before any work starts.
fn inputs(cmd: &Command) -> Vec<&Path> {
    let mut v: Vec<&Path> = Vec::new();
    match cmd {
        Command::Train(a) => {
            v.extend(a.data.iter().map(|d| split_data_arg(d).1));
            v.extend(a.hierarchy.as_deref());
            v.extend(a.dev.as_deref());
            v.extend(a.optim.inputs());
        }
        Command::Distill(a) => {
            v.push(&a.config);
            v.extend(a.optim.inputs());
        }
        Command::Merge(a) => {
            v.push(&a.hierarchy);
            v.extend(a.teachers.iter().map(PathBuf::as_path));
            v.push(&a.input);
        }
        Command::Tag(a) => v.extend([a.model.as_path(), a.input.as_path()]),
        Command::Eval(a) => {
            v.extend([a.gold.as_path(), a.pred.as_path()]);
            v.extend(a.coarse.as_deref());
        }
        Command::Generate(a) => v.push(&a.spec),
        Command::HierarchyCheck(a) => v.push(&a.hierarchy),
    }
    v
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a, cli),
        Command::Distill(a) => cmd_distill(a, cli),
        Command::Merge(a) => cmd_merge(a),
        Command::Tag(a) => cmd_tag(a),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Generate(a) => cmd_generate(a, cli),
        Command::HierarchyCheck(a) => cmd_hierarchy_check(a, out),
    }
}

fn dev_set(path: &Path, tag_set: &TagSet) -> Result<DevSet> {
    let c = read_conll(path, tag_set)?;
    DevSet::new(c.tokens(), c.bio_labels())
}

fn report(r: &TrainReport, out: &Path) {
    match r.best_dev {
        Some(d) => log::info!(
            "best epoch {} dev f1 {:.4}; model written to {}",
            r.best_epoch,
            d.f1,
            out.display()
        ),
        None => log::info!(
            "trained {} epochs; model written to {}",
            r.epochs.len(),
            out.display()
        ),
    }
}

fn cmd_train(a: &TrainArgs, cli: &Cli) -> Result<()> {
    let cfg = a.optim.apply(TrainConfig::default(), cli)?;
    let (model, rep) = match a.mode {
        TrainMode::Supervised => {
            let [data] = a.data.as_slice() else {
                return Err(Error::InvalidArgument(
                    "supervised training takes exactly one --data".into(),
                ));
            };
            let (id, path) = split_data_arg(data);
            let corpus = read_conll_inferred(path, id.unwrap_or("gold"))?;
            let dev = a
                .dev
                .as_deref()
                .map(|p| dev_set(p, corpus.tag_set()))
                .transpose()?;
            train_supervised(&corpus, a.kind.into(), dev.as_ref(), &cfg)?
        }
        TrainMode::Marginal => {
            let hpath = a.hierarchy.as_ref().ok_or_else(|| {
                Error::InvalidArgument("marginal training needs --hierarchy".into())
            })?;
            if a.kind != KindArg::Crf {
                return Err(Error::InvalidArgument(
                    "marginal training needs a CRF".into(),
                ));
            }
            let h = TagHierarchy::from_file(hpath)?;
            let corpora = a
                .data
                .iter()
                .map(|d| {
                    let (id, path) = split_data_arg(d);
                    let id = id.ok_or_else(|| {
                        Error::InvalidArgument(format!("--data {d}: marginal mode needs ID=PATH"))
                    })?;
                    let k = h.tag_set(id).ok_or_else(|| {
                        Error::InvalidArgument(format!("tag set `{id}` is not in the hierarchy"))
                    })?;
                    read_conll(path, k)
                })
                .collect::<Result<Vec<_>>>()?;
            let dev = a
                .dev
                .as_deref()
                .map(|p| dev_set(p, h.unified()))
                .transpose()?;
            train_marginal_crf(&corpora, &h, dev.as_ref(), &cfg)?
        }
    };
    model.save(&a.out)?;
    report(&rep, &a.out);
    Ok(())
}

fn cmd_distill(a: &DistillArgs, cli: &Cli) -> Result<()> {
    let mut sc_cfg = ScenarioConfig::from_file(&a.config)?;
    let mut referenced: Vec<&Path> = vec![&sc_cfg.hierarchy];
    referenced.extend(sc_cfg.teachers.iter().map(PathBuf::as_path));
    referenced.extend(sc_cfg.unlabeled.iter().map(PathBuf::as_path));
    referenced.extend(sc_cfg.source_unlabeled.iter().map(PathBuf::as_path));
    referenced.extend(sc_cfg.labeled.values().map(PathBuf::as_path));
    referenced.extend(sc_cfg.dev.as_deref());
    if let Some(p) = referenced.into_iter().find(|p| !p.exists()) {
        return Err(Error::Scenario(format!(
            "referenced file {} does not exist",
            p.display()
        )));
    }
    if let Some(m) = a.mode {
        sc_cfg.mode = match m {
            DistillMode::Mardi => Mode::Mardi,
            DistillMode::MardiData => Mode::MardiData,
            DistillMode::Progressive => Mode::Progressive,
        };
    }
    if let Some(v) = a.alpha {
        sc_cfg.distill.alpha = v;
    }
    if let Some(v) = a.temperature {
        sc_cfg.distill.temperature = v;
    }
    let base = sc_cfg.train.clone();
    let cfg = a.optim.apply(base, cli)?;
    let (scenario, dev) = sc_cfg.load()?;
    let (model, rep) = distill(&scenario, dev.as_ref(), &cfg)?;
    model.save(&a.out)?;
    report(&rep, &a.out);
    Ok(())
}

fn labeled_corpus(
    tag_set: &TagSet,
    sentences: Vec<crate::emissions::Sentence>,
    labels: Vec<Vec<usize>>,
) -> Result<AnnotatedCorpus> {
    let rows = sentences
        .into_iter()
        .zip(labels)
        .map(|(sentence, labels)| AnnotatedSentence { sentence, labels })
        .collect();
    AnnotatedCorpus::new(tag_set.clone(), rows)
}

fn cmd_merge(a: &MergeArgs) -> Result<()> {
    let h = Arc::new(TagHierarchy::from_file(&a.hierarchy)?);
    let teachers = a
        .teachers
        .iter()
        .map(|p| TeacherHandle::new(Model::load(p)?, &h))
        .collect::<Result<Vec<_>>>()?;
    let sentences = read_tokens(&a.input)?;
    let merged = merge_corpus(&teachers, &sentences)?;
    write_conll(&labeled_corpus(h.unified(), sentences, merged)?, &a.out)?;
    log::info!(
        "merged {} teachers into {}",
        teachers.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_tag(a: &TagArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let sentences = read_tokens(&a.input)?;
    let n = sentences.len();
    let labels = decode_all(&model, &sentences);
    write_conll(&labeled_corpus(model.tag_set(), sentences, labels)?, &a.out)?;
    log::info!("tagged {} sentences into {}", n, a.out.display());
    Ok(())
}

fn bio_rows(c: &AnnotatedCorpus, collapse: Option<(&TagSet, &[usize])>) -> Vec<Vec<BioLabel>> {
    match collapse {
        None => c.bio_labels(),
        Some((roots, map)) => c
            .label_indices()
            .iter()
            .map(|r| r.iter().map(|&y| roots.label(map[y])).collect())
            .collect(),
    }
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let result: EvalResult = match &a.coarse {
        None => {
            let gold = read_conll_inferred(&a.gold, "gold")?;
            let pred = read_conll_inferred(&a.pred, "pred")?;
            check_aligned(&gold, &pred)?;
            micro_prf(&gold.bio_labels(), &pred.bio_labels())?
        }
        Some(hpath) => {
            let h = TagHierarchy::from_file(hpath)?;
            let (roots, map) = h.root_tag_set()?;
            let gold = read_conll(&a.gold, h.unified())?;
            let pred = read_conll(&a.pred, h.unified())?;
            check_aligned(&gold, &pred)?;
            micro_prf(
                &bio_rows(&gold, Some((&roots, &map))),
                &bio_rows(&pred, Some((&roots, &map))),
            )?
        }
    };
    write!(out, "{}F1 = {:.3}\n", result.table(), result.f1).map_err(stdout_err)?;
    if let Some(p) = &a.json {
        fs::write(p, result.to_json() + "\n").map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn check_aligned(gold: &AnnotatedCorpus, pred: &AnnotatedCorpus) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::Dimension(format!(
            "gold has {} sentences, predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    for (n, (g, p)) in gold.sentences().iter().zip(pred.sentences()).enumerate() {
        if g.sentence.tokens() != p.sentence.tokens() {
            return Err(Error::Dimension(format!(
                "sentence {} has different tokens in gold and predictions",
                n + 1
            )));
        }
    }
    Ok(())
}

fn cmd_generate(a: &GenerateArgs, cli: &Cli) -> Result<()> {
    let text = fs::read_to_string(&a.spec).map_err(|e| Error::io(&a.spec, e))?;
    let mut spec = GeneratorSpec::from_toml(&text)?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let mut corpus = generate_synthetic(&spec, a.sentences)?;
    if !a.keep.is_empty() {
        let keep: Vec<&str> = a.keep.iter().map(String::as_str).collect();
        corpus = selective_retag(&corpus, &keep)?;
    }
    if a.tokens_only {
        crate::corpus::write_tokens(&corpus.tokens(), &a.out)?;
    } else {
        write_conll(&corpus, &a.out)?;
    }
    log::info!("wrote {} sentences to {}", corpus.len(), a.out.display());
    Ok(())
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_hierarchy_check(a: &HierarchyCheckArgs, out: &mut dyn Write) -> Result<()> {
    let h = TagHierarchy::from_file(&a.hierarchy)?;
    for k in h.tag_sets() {
        h.projection(k.id())
            .ok_or_else(|| Error::TagSet(format!("no projection for `{}`", k.id())))?;
    }
    let mut roots: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for leaf in h.leaves() {
        roots
            .entry(h.root_of(leaf)?.to_string())
            .or_default()
            .push(leaf.clone());
    }
    writeln!(out, "{} leaves", h.leaves().len()).map_err(stdout_err)?;
    for (root, leaves) in &roots {
        writeln!(out, "{root}: {}", leaves.join(", ")).map_err(stdout_err)?;
    }
    Ok(())
}
