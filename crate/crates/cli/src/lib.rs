//! Pipeline commands behind the `compgen` binary: build-dataset, train,
//! generate, evaluate and sweep. Each command reads a [`PipelineConfig`]
//! and writes its artifacts into the configured output directory.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use compgen::aspects::{positive_aspects_by_item, write_aspects, read_aspects, Aspect, AspectError, SentimentLexicon};
use compgen::corpus::{dataset_stats, load_reviews, tokenize, CorpusError, Review, SplitDataset};
use compgen::decoding::{generate, read_run, write_run, DecodeConfig, GenerationRecord};
use compgen::extraction::{
    build_comparative_dataset, read_dataset, read_labeled_sentences, split_dataset, train_classifier, write_dataset, Classifier,
    ExtractionError, FeaturizerConfig,
};
use compgen::lm::{train_embeddings, EmbeddingTable, LmError, NGramLM, ReferenceModel, Vocabulary};
use compgen::metrics::{evaluate_all, BleuOptions, EvalReport, MetricsError};
use log::{info, warn};
use thiserror::Error;

pub use config::PipelineConfig;

pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const STATS_JSON_FILE: &str = "stats.json";
pub const STATS_TEXT_FILE: &str = "stats.txt";
pub const LM_FILE: &str = "lm.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const ASPECTS_FILE: &str = "aspects.jsonl";
pub const GENERATIONS_FILE: &str = "generations.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Exit code 1 for bad configuration or usage, 2 for I/O failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn extraction_err(path: &Path, e: ExtractionError) -> CliError {
    match e {
        ExtractionError::Io(e) => io_err(path, e),
        other => CliError::Config(format!("{}: {other}", path.display())),
    }
}

fn lm_err(path: &Path, e: LmError) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn aspect_err(path: &Path, e: AspectError) -> CliError {
    match e {
        AspectError::Io(e) => io_err(path, e),
        other => CliError::Config(format!("{}: {other}", path.display())),
    }
}

fn metrics_err(e: MetricsError) -> CliError {
    CliError::Config(format!("evaluation: {e}"))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn require(path: &Path, made_by: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{} not found; run `compgen {made_by}` first", path.display())))
    }
}

fn output_dir(cfg: &PipelineConfig) -> Result<&Path, CliError> {
    let dir = cfg.paths.output_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    Ok(dir)
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Vec<Review>, CliError> {
    let loaded = load_reviews(&cfg.paths.reviews).map_err(|e| match e {
        CorpusError::Io { path, source } => CliError::Io(format!("{}: {source}", path.display())),
    })?;
    if loaded.skipped > 0 {
        warn!("skipped {} malformed or duplicate review lines", loaded.skipped);
    }
    Ok(loaded.reviews)
}

fn lexicon(cfg: &PipelineConfig) -> Result<SentimentLexicon, CliError> {
    match &cfg.paths.lexicon {
        Some(p) => SentimentLexicon::load(p).map_err(|e| aspect_err(p, e)),
        None => Ok(SentimentLexicon::seed()),
    }
}

/// Loads the configured classifier, or trains one on the labeled sentences
/// and stores it in the output directory.
fn obtain_classifier(cfg: &PipelineConfig, out: &Path) -> Result<Classifier, CliError> {
    let target = out.join(CLASSIFIER_FILE);
    if let Some(p) = &cfg.paths.classifier {
        let c = Classifier::from_json(&read_file(p)?).map_err(|e| extraction_err(p, e))?;
        write_file(&target, &c.to_json().map_err(|e| extraction_err(&target, e))?)?;
        return Ok(c);
    }
    let Some(labeled) = &cfg.paths.labeled else {
        return Err(CliError::Config("set paths.labeled (training sentences) or paths.classifier".into()));
    };
    let data = read_labeled_sentences(labeled).map_err(|e| extraction_err(labeled, e))?;
    let featurizer = FeaturizerConfig {
        marker_words: cfg.extraction.markers.clone(),
        ..FeaturizerConfig::default()
    };
    let c = train_classifier(&data, featurizer, &cfg.train_params()).map_err(|e| extraction_err(labeled, e))?;
    info!("trained classifier on {} sentences", data.len());
    write_file(&target, &c.to_json().map_err(|e| extraction_err(&target, e))?)?;
    Ok(c)
}

/// Extracts, labels and splits comparative sentences; writes the dataset,
/// its statistics and the classifier used.
pub fn cmd_build_dataset(cfg: &PipelineConfig) -> Result<SplitDataset, CliError> {
    cfg.validate()?;
    let out = output_dir(cfg)?;
    let reviews = load_corpus(cfg)?;
    let classifier = obtain_classifier(cfg, out)?;
    let records = build_comparative_dataset(&reviews, &classifier, &cfg.patterns()?, cfg.extraction.threshold)
        .map_err(|e| CliError::Config(e.to_string()))?;
    info!("kept {} comparative sentences from {} reviews", records.len(), reviews.len());
    let dataset = split_dataset(&cfg.dataset_name, records, cfg.extraction.split, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    let path = out.join(DATASET_FILE);
    write_dataset(&path, &dataset).map_err(|e| extraction_err(&path, e))?;
    let stats = dataset_stats(&dataset);
    let json = serde_json::to_string_pretty(&stats).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&out.join(STATS_JSON_FILE), &(json + "\n"))?;
    write_file(&out.join(STATS_TEXT_FILE), &stats.to_string())?;
    Ok(dataset)
}

fn load_dataset(cfg: &PipelineConfig) -> Result<SplitDataset, CliError> {
    let path = cfg.paths.output_dir.join(DATASET_FILE);
    require(&path, "build-dataset")?;
    read_dataset(&path, &cfg.dataset_name).map_err(|e| extraction_err(&path, e))
}

/// Trains the n-gram model and embeddings on the training split and mines
/// each item's positive aspects from its reviews.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<(), CliError> {
    cfg.validate()?;
    let out = output_dir(cfg)?;
    let dataset = load_dataset(cfg)?;
    let corpus: Vec<Vec<String>> = dataset.train.iter().map(|r| r.tokens.clone()).collect();
    if corpus.is_empty() {
        return Err(CliError::Config("training split is empty; lower extraction.threshold or add reviews".into()));
    }
    if !out.join(CLASSIFIER_FILE).is_file() {
        obtain_classifier(cfg, out)?;
    }

    let vocab = Vocabulary::from_corpus(&corpus);
    let lm_path = out.join(LM_FILE);
    let lm = NGramLM::train_with_vocab(&corpus, vocab.clone(), cfg.lm.order, cfg.lm.discount).map_err(|e| lm_err(&lm_path, e))?;
    write_file(&lm_path, &lm.to_json().map_err(|e| lm_err(&lm_path, e))?)?;

    let dim = cfg.lm.embedding_dim.min(vocab.len());
    if dim < cfg.lm.embedding_dim {
        warn!("embedding dimension capped at vocabulary size {dim}");
    }
    let emb_path = out.join(EMBEDDINGS_FILE);
    let emb = train_embeddings(&corpus, &vocab, dim, cfg.lm.window).map_err(|e| lm_err(&emb_path, e))?;
    write_file(&emb_path, &emb.to_text(&vocab))?;

    let reviews = load_corpus(cfg)?;
    let aspects = positive_aspects_by_item(&reviews, &lexicon(cfg)?, &cfg.aspects);
    let asp_path = out.join(ASPECTS_FILE);
    write_aspects(&asp_path, aspects.values().flatten()).map_err(|e| aspect_err(&asp_path, e))?;
    info!("vocabulary {}, {} items with aspects", vocab.len(), aspects.len());
    Ok(())
}

/// Trained model and per-item aspects, as written by [`cmd_train`].
pub struct Artifacts {
    pub model: ReferenceModel,
    pub aspects: BTreeMap<String, Vec<Aspect>>,
}

impl Artifacts {
    pub fn load(out: &Path) -> Result<Self, CliError> {
        let lm_path = out.join(LM_FILE);
        let emb_path = out.join(EMBEDDINGS_FILE);
        let asp_path = out.join(ASPECTS_FILE);
        for p in [&lm_path, &emb_path, &asp_path] {
            require(p, "train")?;
        }
        let lm = NGramLM::from_json(&read_file(&lm_path)?).map_err(|e| lm_err(&lm_path, e))?;
        let emb = EmbeddingTable::from_text(&read_file(&emb_path)?, lm.vocabulary()).map_err(|e| lm_err(&emb_path, e))?;
        let model = ReferenceModel::new(lm, emb).map_err(|e| lm_err(&emb_path, e))?;
        let aspects = read_aspects(&asp_path).map_err(|e| aspect_err(&asp_path, e))?;
        Ok(Artifacts { model, aspects })
    }

    pub fn aspect_terms(&self, item: &str) -> Vec<String> {
        self.aspects.get(item).map(|v| v.iter().map(|a| a.term.clone()).collect()).unwrap_or_default()
    }
}

/// What to generate: which items, the source review and the decoder prefix.
#[derive(Debug, Clone, Default)]
pub struct GenerateRequest {
    /// Empty means every item in the review corpus.
    pub items: Vec<String>,
    /// Source review text; defaults to the item's review with the lowest id.
    pub prompt: Option<String>,
    /// Tokens the decoder continues from.
    pub prefix: Option<String>,
    pub trace: bool,
}

fn reviews_by_item(reviews: Vec<Review>) -> BTreeMap<String, Vec<Review>> {
    let mut by_item: BTreeMap<String, Vec<Review>> = BTreeMap::new();
    for r in reviews {
        by_item.entry(r.item_id.clone()).or_default().push(r);
    }
    by_item
}

/// Decodes one generation per requested item under `decode`.
pub fn generate_run(
    cfg: &PipelineConfig,
    artifacts: &Artifacts,
    req: &GenerateRequest,
    decode: &DecodeConfig,
) -> Result<Vec<GenerationRecord>, CliError> {
    decode.validate().map_err(|e| CliError::Config(format!("decode: {e}")))?;
    let by_item = reviews_by_item(load_corpus(cfg)?);
    let items: Vec<String> = if req.items.is_empty() {
        by_item.keys().cloned().collect()
    } else {
        req.items.clone()
    };
    let prefix = req.prefix.as_deref().map(tokenize).unwrap_or_default();
    let mut run = Vec::with_capacity(items.len());
    for item in items {
        let Some(reviews) = by_item.get(&item) else {
            return Err(CliError::Config(format!("unknown item {item}")));
        };
        let prompt = match &req.prompt {
            Some(p) => p.clone(),
            None => reviews.iter().min_by(|a, b| a.review_id.cmp(&b.review_id)).map(|r| r.text.clone()).unwrap_or_default(),
        };
        let aspects = artifacts.aspect_terms(&item);
        let result = generate(&artifacts.model, &prefix, &aspects, decode).map_err(|e| CliError::Config(e.to_string()))?;
        run.push(GenerationRecord {
            item_id: item,
            prompt,
            aspects,
            config: *decode,
            text: result.tokens.join(" "),
            tokens: result.tokens,
            trace: req.trace.then_some(result.steps),
        });
    }
    Ok(run)
}

pub fn cmd_generate(cfg: &PipelineConfig, req: &GenerateRequest, out_path: Option<&Path>) -> Result<Vec<GenerationRecord>, CliError> {
    cfg.validate()?;
    let out = output_dir(cfg)?;
    let artifacts = Artifacts::load(out)?;
    let run = generate_run(cfg, &artifacts, req, &cfg.decode)?;
    let path = out_path.map(Path::to_path_buf).unwrap_or_else(|| out.join(GENERATIONS_FILE));
    write_run(&path, &run).map_err(|e| io_err(&path, e))?;
    info!("wrote {} generations to {}", run.len(), path.display());
    Ok(run)
}

fn load_classifier(out: &Path) -> Result<Classifier, CliError> {
    let path = out.join(CLASSIFIER_FILE);
    require(&path, "build-dataset")?;
    Classifier::from_json(&read_file(&path)?).map_err(|e| extraction_err(&path, e))
}

pub fn bleu_options(cfg: &PipelineConfig) -> BleuOptions {
    BleuOptions {
        smoothing: cfg.metrics.bleu_smoothing,
    }
}

/// Scores a run file against the dataset; writes report.json and report.txt.
pub fn cmd_evaluate(cfg: &PipelineConfig, run_path: Option<&Path>) -> Result<EvalReport, CliError> {
    let out = output_dir(cfg)?;
    let run_path: PathBuf = run_path.map(Path::to_path_buf).unwrap_or_else(|| out.join(GENERATIONS_FILE));
    require(&run_path, "generate")?;
    let run = read_run(&run_path).map_err(|e| io_err(&run_path, e))?;
    let dataset = load_dataset(cfg)?;
    let classifier = load_classifier(out)?;
    let report = evaluate_all(&run, &dataset, &classifier, None, bleu_options(cfg)).map_err(metrics_err)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Config(e.to_string()))?;
    write_file(&out.join(REPORT_JSON_FILE), &(json + "\n"))?;
    write_file(&out.join(REPORT_TEXT_FILE), &report.to_string())?;
    Ok(report)
}

/// Runs generation and evaluation for every (α, β, k) cell of the sweep
/// grid and writes one CSV row per valid cell.
pub fn cmd_sweep(cfg: &PipelineConfig) -> Result<Vec<(DecodeConfig, EvalReport)>, CliError> {
    cfg.validate()?;
    let out = output_dir(cfg)?;
    let artifacts = Artifacts::load(out)?;
    let dataset = load_dataset(cfg)?;
    let classifier = load_classifier(out)?;
    let path = out.join(SWEEP_FILE);
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let header = ["alpha", "beta", "k"].into_iter().chain(EvalReport::COLUMNS).chain(["n"]);
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    let mut rows = Vec::new();
    for &alpha in &cfg.sweep.alpha {
        for &beta in &cfg.sweep.beta {
            for &k in &cfg.sweep.k {
                let decode = DecodeConfig { alpha, beta, k, ..cfg.decode };
                if let Err(e) = decode.validate() {
                    warn!("skipping sweep cell alpha={alpha} beta={beta} k={k}: {e}");
                    continue;
                }
                let run = generate_run(cfg, &artifacts, &GenerateRequest::default(), &decode)?;
                let report = evaluate_all(&run, &dataset, &classifier, None, bleu_options(cfg)).map_err(metrics_err)?;
                let mut record = vec![alpha.to_string(), beta.to_string(), k.to_string()];
                record.extend(report.values().iter().map(|v| format!("{v:.6}")));
                record.push(report.n_samples.to_string());
                w.write_record(&record).map_err(|e| io_err(&path, e))?;
                rows.push((decode, report));
            }
        }
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    Ok(rows)
}

/// build-dataset, train, generate and evaluate in sequence.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<EvalReport, CliError> {
    cmd_build_dataset(cfg)?;
    cmd_train(cfg)?;
    cmd_generate(cfg, &GenerateRequest::default(), None)?;
    cmd_evaluate(cfg, None)
}
