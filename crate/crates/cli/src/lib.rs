//! Command-line front end. [`run`] parses arguments, executes one pipeline
//! stage and returns the process exit code: 0 on success, 2 for usage and
//! configuration errors, 1 for data errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use autoeng::corpus::{
    generate_synthetic_corpus, generate_synthetic_hwconfigs, l1_generator_network, load_corpus,
    SyntheticCorpusSpec,
};
use autoeng::embed::Doc2VecAlgorithm;
use autoeng::featex::extract_features;
use autoeng::hwrec::evaluate_p_at_k;
use autoeng::pipeline::{
    document_tokens, evaluate_hwrec, hwconfigs_from_corpus, ingest_corpus, read_hwconfigs, run_hwrec,
    train_classifier, train_embedding, train_hwrec, write_hwconfigs, ClassifierConfig, ClassifierKind,
    EmbedConfig, EmbedderKind, HwrecConfig, HwrecModel, HwrecModelKind, PipelineError, TrainedClassifier,
    TrainedEmbedding,
};
use autoeng::search::Query;
use autoeng::{CodeDocument, Corpus, Dialect, FeatureSetSpec, HardwareConfig, Level, Taxonomy};
use autoeng_service::models::{CLASSIFIER_DIR, EMBEDDING_DIR, HWREC_FILE};
use autoeng_service::{Models, Store};

/// Default model directory when `--model-dir` is not given.
pub const MODEL_DIR_ENV: &str = "AUTOENG_MODEL_DIR";

#[derive(Debug, Parser)]
#[command(name = "autoeng", version, about = "Classification, code search and hardware completion for automation code")]
pub struct Cli {
    /// Where trained models are written and read by default.
    #[arg(long, global = true, env = MODEL_DIR_ENV, default_value = "models")]
    pub model_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for every random choice of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the stage configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct CorpusArgs {
    /// Corpus JSONL file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "arduino")]
    pub dialect: Dialect,
    /// Taxonomy JSON replacing the builtin one.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, default_value = "L1")]
    pub level: Level,
}

#[derive(Debug, Args, Clone, Default)]
pub struct EmbedFlags {
    /// Feature channels, e.g. `code,comments` or `description,tags`.
    #[arg(long)]
    pub features: Option<FeatureSetSpec>,
    /// doc2vec, tfidf or random.
    #[arg(long)]
    pub embed: Option<EmbedderKind>,
    /// Paragraph vector size (also the random baseline's size).
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// pv-dbow or pv-dm.
    #[arg(long)]
    pub algorithm: Option<Doc2VecAlgorithm>,
    #[arg(long)]
    pub negative: Option<usize>,
}

impl EmbedFlags {
    fn apply(&self, c: &mut EmbedConfig) {
        if let Some(f) = &self.features {
            c.features = f.clone();
        }
        if let Some(e) = self.embed {
            c.embedder = e;
        }
        if let Some(d) = self.dim {
            c.doc2vec.dim = d;
            c.random_dim = d;
        }
        if let Some(e) = self.epochs {
            c.doc2vec.epochs = e;
        }
        if let Some(a) = self.algorithm {
            c.doc2vec.algorithm = a;
        }
        if let Some(n) = self.negative {
            c.doc2vec.negative = n;
        }
    }
}

/// Where hardware configurations come from. Without `--configs` or
/// `--corpus`, level-1 configurations are sampled from the builtin
/// generator network.
#[derive(Debug, Args, Clone)]
pub struct HwData {
    /// JSONL of `{"components": [...]}` records.
    #[arg(long, conflicts_with = "corpus")]
    pub configs: Option<PathBuf>,
    /// Arduino corpus whose component lists are mapped onto the taxonomy.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value = "L1")]
    pub level: Level,
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// Number of sampled configurations when no data is given.
    #[arg(long, default_value_t = 2000)]
    pub synthetic: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate a corpus, assign family labels, map components.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
    },
    /// Print the extracted feature bundle of every document as JSONL.
    Featdump {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Only print the selected channels' tokens.
        #[arg(long)]
        features: Option<FeatureSetSpec>,
        /// Only this document.
        #[arg(long)]
        id: Option<String>,
    },
    /// Fit an embedding on a corpus and index it for search.
    TrainEmbed {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        embed: EmbedFlags,
    },
    /// Train embedding plus classifier on a split and report held-out F1.
    TrainClassifier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        embed: EmbedFlags,
        /// logreg or forest.
        #[arg(long)]
        classifier: Option<ClassifierKind>,
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Score a saved classifier on the labeled documents of a corpus.
    EvalClassifier {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Classifier directory; defaults to <model-dir>/classifier.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Nearest neighbours from a saved embedding.
    Search {
        #[command(flatten)]
        common: Common,
        /// Embedding directory; defaults to <model-dir>/embedding.
        #[arg(long)]
        model: Option<PathBuf>,
        /// An indexed document.
        #[arg(long, conflicts_with_all = ["file", "tokens"])]
        id: Option<String>,
        /// A source file (.ino/.cpp/.h as Arduino, .scl as SCL).
        #[arg(long, conflicts_with = "tokens")]
        file: Option<PathBuf>,
        /// Whitespace-separated feature tokens.
        #[arg(long)]
        tokens: Option<String>,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
    },
    /// Train a hardware completion model on all given configurations.
    TrainHwrec {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: HwData,
        /// bn, ae or random.
        #[arg(long)]
        model: Option<HwrecModelKind>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Leave-one-out precision@k as CSV (k,p_at_k,n_trials).
    EvalHwrec {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: HwData,
        /// bn, ae or random; trained on a split of the data.
        #[arg(long, conflicts_with = "model_file")]
        model: Option<HwrecModelKind>,
        /// Evaluate a saved model on all the data instead.
        #[arg(long)]
        model_file: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,9")]
        k: Vec<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write a synthetic corpus and hardware configurations.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        docs_per_class: Option<usize>,
        #[arg(long)]
        class_token_rate: Option<f64>,
        #[arg(long)]
        hw_configs: Option<usize>,
    },
    /// Run the assistant HTTP service.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory of built UI assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
}

fn log_resolved(command: &str, value: serde_json::Value) {
    log::info!("{command} configuration: {value}");
}

fn write_json_file(path: &Path, value: &impl Serialize) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(data)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// `path`, or stdout without one.
fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn taxonomy(path: Option<&Path>, level: Level) -> CliResult<Taxonomy> {
    match path {
        Some(p) => {
            let tax = Taxonomy::load(p).map_err(data)?;
            if tax.level != level {
                return Err(CliError::Usage(format!(
                    "taxonomy {} is {} but --level is {level}",
                    p.display(),
                    tax.level
                )));
            }
            Ok(tax)
        }
        None => Ok(Taxonomy::builtin(level)),
    }
}

fn load_ingested(args: &CorpusArgs) -> CliResult<Corpus> {
    let tax = taxonomy(args.taxonomy.as_deref(), args.level)?;
    let corpus = load_corpus(&args.corpus, args.dialect).map_err(data)?;
    let (corpus, report) = ingest_corpus(corpus, &tax);
    log::info!(
        "{}: {} documents, {} labeled ({} from FAMILY lines)",
        args.corpus.display(),
        report.n_docs,
        report.labeled,
        report.family_labels_assigned
    );
    Ok(corpus)
}

fn execute(cli: Cli) -> CliResult {
    let model_dir = cli.model_dir;
    match cli.command {
        Command::Ingest { common, corpus } => ingest(&common, &corpus),
        Command::Featdump {
            common,
            corpus,
            features,
            id,
        } => featdump(&common, &corpus, features, id),
        Command::TrainEmbed { common, corpus, embed } => train_embed(&common, &corpus, &embed, &model_dir),
        Command::TrainClassifier {
            common,
            corpus,
            embed,
            classifier,
            train_fraction,
        } => train_classifier_cmd(&common, &corpus, &embed, classifier, train_fraction, &model_dir),
        Command::EvalClassifier { common, corpus, model } => {
            eval_classifier(&common, &corpus, model.unwrap_or_else(|| model_dir.join(CLASSIFIER_DIR)))
        }
        Command::Search {
            common,
            model,
            id,
            file,
            tokens,
            k,
        } => search(&common, model.unwrap_or_else(|| model_dir.join(EMBEDDING_DIR)), id, file, tokens, k),
        Command::TrainHwrec {
            common,
            data,
            model,
            epochs,
        } => train_hwrec_cmd(&common, &data, model, epochs, &model_dir),
        Command::EvalHwrec {
            common,
            data,
            model,
            model_file,
            k,
            epochs,
        } => eval_hwrec(&common, &data, model, model_file, &k, epochs),
        Command::Synth {
            common,
            classes,
            docs_per_class,
            class_token_rate,
            hw_configs,
        } => synth(&common, classes, docs_per_class, class_token_rate, hw_configs),
        Command::Serve {
            common,
            addr,
            static_dir,
        } => serve(&common, &model_dir, addr, static_dir),
    }
}

fn ingest(common: &Common, args: &CorpusArgs) -> CliResult {
    log_resolved(
        "ingest",
        json!({"corpus": args.corpus, "dialect": args.dialect, "level": args.level, "taxonomy": args.taxonomy, "out": common.out, "seed": common.seed}),
    );
    let tax = taxonomy(args.taxonomy.as_deref(), args.level)?;
    let corpus = load_corpus(&args.corpus, args.dialect).map_err(data)?;
    let (corpus, report) = ingest_corpus(corpus, &tax);
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            corpus.save(dir.join("corpus.jsonl")).map_err(data)?;
            write_json_file(&dir.join("ingest-report.json"), &report)?;
            if args.dialect == Dialect::Arduino {
                let (configs, _) = hwconfigs_from_corpus(&corpus, &tax);
                write_hwconfigs(&configs, &tax, BufWriter::new(File::create(dir.join("hardware.jsonl"))?))?;
            }
            log::info!("wrote {}", dir.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(data)?),
    }
    Ok(())
}

fn featdump(common: &Common, args: &CorpusArgs, features: Option<FeatureSetSpec>, id: Option<String>) -> CliResult {
    log_resolved(
        "featdump",
        json!({"corpus": args.corpus, "dialect": args.dialect, "features": features.as_ref().map(|f| f.to_string()), "id": id, "out": common.out}),
    );
    let corpus = load_ingested(args)?;
    let docs: Vec<&CodeDocument> = match &id {
        Some(id) => vec![corpus
            .get(id)
            .ok_or_else(|| CliError::Data(format!("no document {id:?} in the corpus")))?],
        None => corpus.iter().collect(),
    };
    let mut out = output(common.out.as_deref())?;
    for doc in docs {
        let line = match &features {
            Some(f) => json!({"id": doc.id, "tokens": document_tokens(doc, f)?}),
            None => serde_json::to_value(extract_features(doc)).map_err(data)?,
        };
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct EmbedRun {
    #[serde(flatten)]
    embed: EmbedConfig,
    seed: u64,
}

fn train_embed(common: &Common, args: &CorpusArgs, flags: &EmbedFlags, model_dir: &Path) -> CliResult {
    let mut run: EmbedRun = read_config(common.config.as_deref())?;
    flags.apply(&mut run.embed);
    if let Some(s) = common.seed {
        run.seed = s;
    }
    run.embed.validate()?;
    let out = common.out.clone().unwrap_or_else(|| model_dir.join(EMBEDDING_DIR));
    log_resolved(
        "train-embed",
        json!({"corpus": args.corpus, "dialect": args.dialect, "out": out, "config": run}),
    );
    let corpus = load_ingested(args)?;
    let trained = train_embedding(&corpus, &run.embed, run.seed)?;
    trained.save(&out)?;
    log::info!("indexed {} documents (dim {}) into {}", trained.index.len(), trained.embedder.dim(), out.display());
    Ok(())
}

fn train_classifier_cmd(
    common: &Common,
    args: &CorpusArgs,
    flags: &EmbedFlags,
    classifier: Option<ClassifierKind>,
    train_fraction: Option<f64>,
    model_dir: &Path,
) -> CliResult {
    let mut config: ClassifierConfig = read_config(common.config.as_deref())?;
    flags.apply(&mut config.embed);
    if let Some(c) = classifier {
        config.classifier = c;
    }
    if let Some(f) = train_fraction {
        config.train_fraction = f;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    config.embed.validate()?;
    let out = common.out.clone().unwrap_or_else(|| model_dir.join(CLASSIFIER_DIR));
    log_resolved(
        "train-classifier",
        json!({"corpus": args.corpus, "dialect": args.dialect, "out": out, "config": config}),
    );
    let corpus = load_ingested(args)?;
    let run = train_classifier(&corpus, &config)?;
    run.model.save(&out)?;
    write_json_file(&out.join("report.json"), &run.report)?;
    write_json_file(&out.join("split.json"), &json!({"train": run.train_ids, "test": run.test_ids}))?;
    std::fs::write(out.join("confusion.csv"), run.report.confusion_csv())?;
    println!(
        "weighted F1 {:.4}  micro F1 {:.4}  macro F1 {:.4}  ({} test documents)",
        run.report.f1_weighted, run.report.f1_micro, run.report.f1_macro, run.report.n_test
    );
    log::info!("model and report written to {}", out.display());
    Ok(())
}

fn eval_classifier(common: &Common, args: &CorpusArgs, model: PathBuf) -> CliResult {
    log_resolved(
        "eval-classifier",
        json!({"corpus": args.corpus, "dialect": args.dialect, "model": model, "out": common.out}),
    );
    let classifier = TrainedClassifier::load(&model)?;
    let corpus = load_ingested(args)?;
    let docs: Vec<&CodeDocument> = corpus.iter().filter(|d| d.label.is_some()).collect();
    let report = classifier.evaluate(&docs)?;
    let mut out = output(common.out.as_deref())?;
    writeln!(out, "{}", report.to_json())?;
    out.flush()?;
    Ok(())
}

fn dialect_of(path: &Path) -> Dialect {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("scl") => Dialect::Scl,
        _ => Dialect::Arduino,
    }
}

fn search(
    common: &Common,
    model: PathBuf,
    id: Option<String>,
    file: Option<PathBuf>,
    tokens: Option<String>,
    k: usize,
) -> CliResult {
    log_resolved(
        "search",
        json!({"model": model, "id": id, "file": file, "tokens": tokens, "k": k, "out": common.out}),
    );
    let emb = TrainedEmbedding::load(&model)?;
    let neighbors = match (id, file, tokens) {
        (Some(id), None, None) => emb.index.query_knn(Query::Id(&id), k).map_err(PipelineError::from)?,
        (None, Some(path), None) => {
            let text = std::fs::read_to_string(&path)?;
            let doc = CodeDocument {
                id: path.display().to_string(),
                dialect: dialect_of(&path),
                sources: vec![autoeng::corpus::SourceFile {
                    name: path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                    text,
                }],
                title: None,
                tags: vec![],
                description: None,
                label: None,
                raw_components: vec![],
            };
            emb.search_document(&doc, k)?
        }
        (None, None, Some(t)) => {
            let toks: Vec<&str> = t.split_whitespace().collect();
            emb.search_tokens(&toks, k)?
        }
        _ => return Err(CliError::Usage("give exactly one of --id, --file or --tokens".into())),
    };
    let mut out = output(common.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&neighbors).map_err(data)?)?;
    out.flush()?;
    Ok(())
}

fn hw_configs(d: &HwData, seed: u64) -> CliResult<Vec<HardwareConfig>> {
    let tax = taxonomy(d.taxonomy.as_deref(), d.level)?;
    let configs = if let Some(p) = &d.configs {
        read_hwconfigs(BufReader::new(File::open(p)?), &tax)?
    } else if let Some(p) = &d.corpus {
        let corpus = load_corpus(p, Dialect::Arduino).map_err(data)?;
        let (configs, unmapped) = hwconfigs_from_corpus(&corpus, &tax);
        if !unmapped.is_empty() {
            log::warn!("{} distinct component names had no taxonomy entry", unmapped.len());
        }
        configs
    } else {
        if d.level != Level::L1 {
            return Err(CliError::Usage("level-2 runs need --configs or --corpus".into()));
        }
        log::info!("sampling {} configurations from the builtin generator network", d.synthetic);
        generate_synthetic_hwconfigs(&l1_generator_network(), d.synthetic, seed).map_err(data)?
    };
    if configs.is_empty() {
        return Err(CliError::Data("no hardware configurations".into()));
    }
    Ok(configs)
}

fn hwrec_config(common: &Common, model: Option<HwrecModelKind>, epochs: Option<usize>) -> CliResult<HwrecConfig> {
    let mut config: HwrecConfig = read_config(common.config.as_deref())?;
    if let Some(m) = model {
        config.model = m;
    }
    if let Some(e) = epochs {
        config.autoencoder.epochs = e;
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    Ok(config)
}

fn train_hwrec_cmd(
    common: &Common,
    d: &HwData,
    model: Option<HwrecModelKind>,
    epochs: Option<usize>,
    model_dir: &Path,
) -> CliResult {
    let config = hwrec_config(common, model, epochs)?;
    let out = common.out.clone().unwrap_or_else(|| model_dir.join(HWREC_FILE));
    log_resolved(
        "train-hwrec",
        json!({"configs": d.configs, "corpus": d.corpus, "level": d.level, "out": out, "config": config}),
    );
    let configs = hw_configs(d, config.seed)?;
    let trained = train_hwrec(&configs, &config)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    trained.save(&out)?;
    log::info!("{} model trained on {} configurations, saved to {}", trained.kind(), configs.len(), out.display());
    Ok(())
}

fn eval_hwrec(
    common: &Common,
    d: &HwData,
    model: Option<HwrecModelKind>,
    model_file: Option<PathBuf>,
    k: &[usize],
    epochs: Option<usize>,
) -> CliResult {
    if k.is_empty() || k.contains(&0) {
        return Err(CliError::Usage("--k needs positive integers".into()));
    }
    let config = hwrec_config(common, model, epochs)?;
    log_resolved(
        "eval-hwrec",
        json!({"configs": d.configs, "corpus": d.corpus, "level": d.level, "model_file": model_file, "k": k, "out": common.out, "config": config}),
    );
    let configs = hw_configs(d, config.seed)?;
    let report = match &model_file {
        Some(path) => {
            let m = HwrecModel::load(path)?;
            match m {
                HwrecModel::Random(_) => evaluate_hwrec(&m, &configs, k, config.random_repeats)?,
                _ => {
                    let usable: Vec<HardwareConfig> = configs.iter().filter(|c| c.count() >= 2).copied().collect();
                    evaluate_p_at_k(&m, &usable, k).map_err(PipelineError::from)?
                }
            }
        }
        None => {
            let run = run_hwrec(&configs, &config, k)?;
            log::info!("{} train / {} test configurations", run.n_train, run.n_test);
            run.report
        }
    };
    let mut out = output(common.out.as_deref())?;
    write!(out, "{}", report.to_csv())?;
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct SynthConfig {
    n_classes: usize,
    docs_per_class: usize,
    vocab_per_class: usize,
    shared_vocab: usize,
    doc_len: usize,
    class_token_rate: f64,
    hw_configs: usize,
    seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let s = SyntheticCorpusSpec::standard(0);
        Self {
            n_classes: s.n_classes,
            docs_per_class: s.docs_per_class,
            vocab_per_class: s.vocab_per_class,
            shared_vocab: s.shared_vocab,
            doc_len: s.doc_len,
            class_token_rate: s.class_token_rate,
            hw_configs: 2000,
            seed: s.seed,
        }
    }
}

fn synth(
    common: &Common,
    classes: Option<usize>,
    docs_per_class: Option<usize>,
    class_token_rate: Option<f64>,
    hw_configs: Option<usize>,
) -> CliResult {
    let mut c: SynthConfig = read_config(common.config.as_deref())?;
    if let Some(v) = classes {
        c.n_classes = v;
    }
    if let Some(v) = docs_per_class {
        c.docs_per_class = v;
    }
    if let Some(v) = class_token_rate {
        c.class_token_rate = v;
    }
    if let Some(v) = hw_configs {
        c.hw_configs = v;
    }
    if let Some(s) = common.seed {
        c.seed = s;
    }
    if c.n_classes == 0 || c.docs_per_class == 0 || c.vocab_per_class == 0 || c.doc_len == 0 {
        return Err(CliError::Usage("class, document and vocabulary counts must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&c.class_token_rate) {
        return Err(CliError::Usage("class_token_rate must lie in [0, 1]".into()));
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("synth"));
    log_resolved("synth", json!({"out": out, "config": c}));
    std::fs::create_dir_all(&out)?;
    let corpus = generate_synthetic_corpus(&SyntheticCorpusSpec {
        n_classes: c.n_classes,
        docs_per_class: c.docs_per_class,
        vocab_per_class: c.vocab_per_class,
        shared_vocab: c.shared_vocab,
        doc_len: c.doc_len,
        class_token_rate: c.class_token_rate,
        seed: c.seed,
    });
    corpus.save(out.join("corpus.jsonl")).map_err(data)?;
    let configs = generate_synthetic_hwconfigs(&l1_generator_network(), c.hw_configs, c.seed).map_err(data)?;
    let tax = Taxonomy::builtin(Level::L1);
    write_hwconfigs(&configs, &tax, BufWriter::new(File::create(out.join("hardware.jsonl"))?))?;
    println!(
        "{} documents and {} hardware configurations written to {}",
        corpus.len(),
        configs.len(),
        out.display()
    );
    Ok(())
}

fn serve(common: &Common, model_dir: &Path, addr: SocketAddr, static_dir: Option<PathBuf>) -> CliResult {
    let journal = common.out.clone().unwrap_or_else(|| model_dir.join("journal")).join("journal.jsonl");
    log_resolved(
        "serve",
        json!({"models": model_dir, "addr": addr.to_string(), "static_dir": static_dir, "journal": journal}),
    );
    if common.config.is_some() {
        log::warn!("serve takes no configuration file; --config ignored");
    }
    let models = Models::load_dir(model_dir)?;
    let missing = models.missing();
    if !missing.is_empty() {
        log::warn!("analysis disabled until these are trained: {}", missing.join(", "));
    }
    let store = Store::open(Arc::new(models), &journal).map_err(data)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(autoeng_service::serve(Arc::new(store), addr, static_dir))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let cli = Cli::try_parse_from(["autoeng", "train-embed", "--corpus", "c.jsonl", "--dim", "12", "--embed", "tfidf"])
            .unwrap();
        let Command::TrainEmbed { embed, .. } = cli.command else {
            panic!("wrong subcommand")
        };
        let mut c = EmbedConfig::default();
        embed.apply(&mut c);
        assert_eq!(c.doc2vec.dim, 12);
        assert_eq!(c.random_dim, 12);
        assert_eq!(c.embedder, EmbedderKind::Tfidf);
    }

    #[test]
    fn k_list_is_comma_separated() {
        let cli = Cli::try_parse_from(["autoeng", "eval-hwrec", "--k", "2,4"]).unwrap();
        let Command::EvalHwrec { k, .. } = cli.command else {
            panic!("wrong subcommand")
        };
        assert_eq!(k, vec![2, 4]);
    }
}
