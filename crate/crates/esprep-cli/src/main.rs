//! `esprep`: corpus preparation pipeline for Spanish seq2seq pretraining.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use esprep::clean::{CleanConfig, LangModel};
use esprep::corpus::{read_corpus, read_corpus_vec, write_corpus, Document};
use esprep::dedup::{DedupConfig, DedupMode};
use esprep::error::{Error, Result};
use esprep::metrics::{self, MetricReport};
use esprep::noise::{NoiseConfig, Objective};
use esprep::pipeline::{report, run_pipeline, PipelineConfig};
use esprep::taskprep::{self, TaskExample};
use esprep::tok::{SpecialProfile, Tokenizer, TokenizerKind};

#[derive(Parser)]
#[command(name = "esprep", version, about = "Spanish pretraining data toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read one or more JSON-lines corpora and assign final document ids.
    Ingest(IngestArgs),
    /// Quality-filter and normalize a corpus.
    Clean(CleanArgs),
    /// Remove exact and near duplicates.
    Dedup(DedupArgs),
    /// Subword tokenizer operations.
    Tokenizer {
        #[command(subcommand)]
        command: TokenizerCommand,
    },
    /// Produce denoising pretraining pairs from a tokenized corpus.
    Noise(NoiseArgs),
    /// Convert downstream datasets into (source, target) pairs.
    Taskprep(TaskprepArgs),
    /// Score predictions against references.
    Evaluate(EvaluateArgs),
    /// Run the full configured pipeline.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Bpe,
    Unigram,
}

impl From<KindArg> for TokenizerKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Bpe => TokenizerKind::Bpe,
            KindArg::Unigram => TokenizerKind::Unigram,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Bart,
    T5,
}

impl From<ProfileArg> for SpecialProfile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Bart => SpecialProfile::Bart,
            ProfileArg::T5 => SpecialProfile::T5,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Bart,
    T5,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Bart => Objective::Bart,
            ObjectiveArg::T5 => Objective::T5,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Near,
    Both,
}

impl From<ModeArg> for DedupMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => DedupMode::Exact,
            ModeArg::Near => DedupMode::Near,
            ModeArg::Both => DedupMode::Both,
        }
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Input JSON-lines files, read in order.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    /// Override the `source` field on every ingested document.
    #[arg(long)]
    source: Option<String>,
}

#[derive(Args)]
struct CleanArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = CleanConfig::default().min_chars)]
    min_chars: usize,
    #[arg(long, default_value_t = CleanConfig::default().min_sentences)]
    min_sentences: usize,
    #[arg(long, default_value_t = CleanConfig::default().max_char_run)]
    max_char_run: usize,
    #[arg(long, default_value_t = CleanConfig::default().max_symbol_ratio)]
    max_symbol_ratio: f64,
    #[arg(long, default_value_t = CleanConfig::default().max_top_char_ratio)]
    max_top_char_ratio: f64,
    #[arg(long, default_value_t = CleanConfig::default().code_keyword_threshold)]
    code_keyword_threshold: usize,
    /// Plain-text blocklist file, one phrase per line.
    #[arg(long)]
    blocklist: Option<PathBuf>,
    #[arg(long, default_value_t = CleanConfig::default().lang_threshold)]
    lang_threshold: f64,
    #[arg(long, default_value = "es")]
    target_lang: String,
    /// Trained language-ID model; without it the language gate relies on
    /// `lang`/`lang_score` metadata only.
    #[arg(long)]
    lang_model: Option<PathBuf>,
    /// Write stage stats as JSON here.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Args)]
struct DedupArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
    #[arg(long, default_value_t = DedupConfig::default().shingle_words)]
    shingle_words: usize,
    #[arg(long, default_value_t = DedupConfig::default().num_perms)]
    num_perms: usize,
    #[arg(long, default_value_t = DedupConfig::default().bands)]
    bands: usize,
    #[arg(long, default_value_t = DedupConfig::default().rows)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the dedup report as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TokenizerCommand {
    /// Train a tokenizer on a JSON-lines corpus.
    Train {
        input: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = KindArg::Bpe)]
        kind: KindArg,
        #[arg(long)]
        vocab_size: usize,
        #[arg(long, value_enum, default_value_t = ProfileArg::Bart)]
        profile: ProfileArg,
    },
    /// Encode a corpus to id sequences (JSON-lines {doc_id, ids}).
    Encode {
        input: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Decode id sequences back to text (JSON-lines {doc_id, text}).
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        model: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct NoiseArgs {
    input: PathBuf,
    #[arg(short, long)]
    model: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Bart)]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = NoiseConfig::default().mask_rate)]
    mask_rate: f64,
    #[arg(long, default_value_t = NoiseConfig::default().span_lambda)]
    span_lambda: f64,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    permute_sentences: bool,
    #[arg(long, default_value_t = NoiseConfig::default().corruption_rate)]
    corruption_rate: f64,
    #[arg(long, default_value_t = NoiseConfig::default().mean_span)]
    mean_span: f64,
    #[arg(long, default_value_t = NoiseConfig::default().max_len)]
    max_len: usize,
    #[arg(long, default_value_t = NoiseConfig::default().min_chunk)]
    min_chunk: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Summarization,
    Qa,
    SplitRephrase,
    Dialogue,
    Translation,
    Classification,
}

#[derive(Args)]
struct TaskprepArgs {
    /// JSON-lines task examples.
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    task: TaskArg,
    /// QA prompt template with {q} and {c} placeholders.
    #[arg(long, default_value = taskprep::DEFAULT_QA_TEMPLATE)]
    template: String,
    /// Separator token for split-and-rephrase targets.
    #[arg(long, default_value = taskprep::DEFAULT_SPLIT_SEP)]
    sep: String,
    /// Dialogue history window (0 = unlimited).
    #[arg(long, default_value_t = 0)]
    history_max: usize,
    /// Task prefix for classification prompts.
    #[arg(long, default_value = "tarea")]
    task_name: String,
    /// JSON object file mapping raw labels to target words.
    #[arg(long)]
    label_map: Option<PathBuf>,
    /// Translation direction.
    #[arg(long, value_enum, default_value_t = DirectionArg::Forward)]
    direction: DirectionArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Forward,
    Reverse,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Comma-separated metrics: rouge, bleu, sari, meteor, f1.
    #[arg(long, value_delimiter = ',')]
    metric: Vec<String>,
    /// Predictions, one per line.
    #[arg(long)]
    pred: PathBuf,
    /// References, one per line, aligned with predictions. Repeat for
    /// multiple reference sets.
    #[arg(long, required = true)]
    r#ref: Vec<PathBuf>,
    /// Sources, one per line (required for SARI).
    #[arg(long)]
    src: Option<PathBuf>,
    /// Add-one smoothing for BLEU.
    #[arg(long)]
    smooth: bool,
    /// Write the JSON report list here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Pipeline TOML config.
    config: PathBuf,
    /// Override worker count (also via ESPREP_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the global seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn read_lines(path: &PathBuf) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let mut docs: Vec<Document> = Vec::new();
    for path in &args.inputs {
        for doc in read_corpus(path)? {
            let mut doc = doc?;
            doc.id = docs.len() as u64;
            if let Some(source) = &args.source {
                doc.source = source.clone();
            }
            docs.push(doc);
        }
    }
    let stats = write_corpus(docs.into_iter(), &args.output)?;
    eprintln!("ingested {} documents", stats.docs_out);
    Ok(())
}

fn cmd_clean(args: CleanArgs) -> Result<()> {
    let blocklist = match &args.blocklist {
        Some(path) => read_lines(path)?
            .into_iter()
            .filter(|l| !l.trim().is_empty())
            .collect(),
        None => Vec::new(),
    };
    let cfg = CleanConfig {
        min_chars: args.min_chars,
        min_sentences: args.min_sentences,
        max_char_run: args.max_char_run,
        max_symbol_ratio: args.max_symbol_ratio,
        max_top_char_ratio: args.max_top_char_ratio,
        code_keyword_threshold: args.code_keyword_threshold,
        blocklist,
        lang_threshold: args.lang_threshold,
        target_lang: args.target_lang.clone(),
    };
    cfg.validate()?;
    let model = match &args.lang_model {
        Some(path) => Some(LangModel::load(path)?),
        None => None,
    };
    let docs = read_corpus_vec(&args.input)?;
    let (survivors, stats) = esprep::clean::clean_documents(docs, &cfg, model.as_ref())?;
    write_corpus(survivors.into_iter(), &args.output)?;
    if let Some(path) = &args.stats {
        let json = serde_json::to_string_pretty(&stats).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    eprintln!(
        "clean: {} in, {} out, {} rejected",
        stats.docs_in,
        stats.docs_out,
        stats.rejects_total()
    );
    for (rule, n) in &stats.rejects_by_rule {
        eprintln!("  {rule}: {n}");
    }
    Ok(())
}

fn cmd_dedup(args: DedupArgs) -> Result<()> {
    let cfg = DedupConfig {
        shingle_words: args.shingle_words,
        num_perms: args.num_perms,
        bands: args.bands,
        rows: args.rows,
        seed: args.seed,
        mode: args.mode.into(),
    };
    let docs = read_corpus_vec(&args.input)?;
    let (survivors, dedup_report) = esprep::dedup::dedup(docs, &cfg)?;
    write_corpus(survivors.into_iter(), &args.output)?;
    eprintln!(
        "dedup: {} removed, {} clusters",
        dedup_report.removed_count,
        dedup_report.clusters.len()
    );
    if let Some(path) = &args.report {
        let json =
            serde_json::to_string_pretty(&dedup_report).map_err(|e| Error::Data(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[derive(serde::Serialize, serde::Deserialize)]
struct EncodedRecord {
    doc_id: u64,
    ids: Vec<u32>,
}

fn write_jsonl<T: serde::Serialize>(records: &[T], path: &PathBuf) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| Error::Data(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn cmd_tokenizer(command: TokenizerCommand) -> Result<()> {
    match command {
        TokenizerCommand::Train {
            input,
            model,
            kind,
            vocab_size,
            profile,
        } => {
            let docs = read_corpus_vec(&input)?;
            let tok = match TokenizerKind::from(kind) {
                TokenizerKind::Bpe => {
                    esprep::tok::bpe::train_bpe(docs.into_iter(), vocab_size, profile.into())?
                }
                TokenizerKind::Unigram => {
                    esprep::tok::unigram::train_unigram(docs.into_iter(), vocab_size, profile.into())?
                }
            };
            tok.save(&model)?;
            eprintln!("trained vocab of {} pieces", tok.vocab_size());
        }
        TokenizerCommand::Encode {
            input,
            model,
            output,
        } => {
            let tok = Tokenizer::load(&model)?;
            let docs = read_corpus_vec(&input)?;
            let records: Vec<EncodedRecord> = docs
                .iter()
                .map(|d| {
                    let seq = tok.encode(&d.text, d.id);
                    EncodedRecord {
                        doc_id: d.id,
                        ids: seq.ids,
                    }
                })
                .collect();
            write_jsonl(&records, &output)?;
        }
        TokenizerCommand::Decode {
            input,
            model,
            output,
        } => {
            #[derive(serde::Serialize)]
            struct DecodedRecord {
                doc_id: u64,
                text: String,
            }
            let tok = Tokenizer::load(&model)?;
            let mut records = Vec::new();
            for (i, line) in read_lines(&input)?.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: EncodedRecord = serde_json::from_str(line).map_err(|e| {
                    Error::MalformedRecord {
                        line: i + 1,
                        detail: e.to_string(),
                    }
                })?;
                records.push(DecodedRecord {
                    doc_id: rec.doc_id,
                    text: tok.decode(&rec.ids)?,
                });
            }
            write_jsonl(&records, &output)?;
        }
    }
    Ok(())
}

fn cmd_noise(args: NoiseArgs) -> Result<()> {
    let cfg = NoiseConfig {
        objective: args.objective.into(),
        mask_rate: args.mask_rate,
        span_lambda: args.span_lambda,
        permute_sentences: args.permute_sentences,
        corruption_rate: args.corruption_rate,
        mean_span: args.mean_span,
        max_len: args.max_len,
        min_chunk: args.min_chunk,
        seed: args.seed,
    };
    cfg.validate()?;
    let tok = Tokenizer::load(&args.model)?;
    let docs = read_corpus_vec(&args.input)?;
    let stats = esprep::pipeline::noise_corpus(&docs, &tok, &cfg, &args.output)?;
    eprintln!("noise: {} docs -> {} pairs", stats.docs_in, stats.docs_out);
    Ok(())
}

fn cmd_taskprep(args: TaskprepArgs) -> Result<()> {
    let label_map: BTreeMap<String, String> = match &args.label_map {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("label map: {e}")))?
        }
        None => BTreeMap::new(),
    };
    let direction = match args.direction {
        DirectionArg::Forward => taskprep::Direction::Forward,
        DirectionArg::Reverse => taskprep::Direction::Reverse,
    };
    let mut pairs = Vec::new();
    for (i, line) in read_lines(&args.input)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ex: TaskExample =
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                detail: e.to_string(),
            })?;
        let id = pairs.len() as u64;
        match args.task {
            TaskArg::Summarization => pairs.push(taskprep::format_summarization(&ex, id)?),
            TaskArg::Qa => pairs.push(taskprep::format_qa(&ex, &args.template, id)?),
            TaskArg::SplitRephrase => {
                pairs.push(taskprep::format_split_rephrase(&ex, &args.sep, id)?)
            }
            TaskArg::Dialogue => {
                pairs.extend(taskprep::format_dialogue(&ex.utterances, args.history_max, id))
            }
            TaskArg::Translation => pairs.push(taskprep::format_translation(&ex, direction, id)?),
            TaskArg::Classification => pairs.push(taskprep::format_classification_t2t(
                &ex,
                &args.task_name,
                &label_map,
                id,
            )?),
        }
    }
    write_jsonl(&pairs, &args.output)?;
    eprintln!("taskprep: {} pairs", pairs.len());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let preds = read_lines(&args.pred)?;
    let mut ref_files = Vec::new();
    for path in &args.r#ref {
        let lines = read_lines(path)?;
        if lines.len() != preds.len() {
            return Err(Error::Data(format!(
                "{} has {} lines, predictions have {}",
                path.display(),
                lines.len(),
                preds.len()
            )));
        }
        ref_files.push(lines);
    }
    // Per-example reference sets across files.
    let ref_sets: Vec<Vec<&str>> = (0..preds.len())
        .map(|i| ref_files.iter().map(|f| f[i].as_str()).collect())
        .collect();
    let pred_refs: Vec<&str> = preds.iter().map(String::as_str).collect();

    let metrics_requested = if args.metric.is_empty() {
        vec!["rouge".into(), "bleu".into()]
    } else {
        args.metric.clone()
    };

    let mut reports: Vec<MetricReport> = Vec::new();
    for metric in &metrics_requested {
        match metric.as_str() {
            "rouge" => {
                for (name, n) in [("rouge1", 1usize), ("rouge2", 2)] {
                    let scores: Result<Vec<f64>> = pred_refs
                        .iter()
                        .zip(&ref_sets)
                        .map(|(p, rs)| metrics::rouge_n(p, rs, n).map(|s| s.f1))
                        .collect();
                    reports.push(MetricReport::from_examples(name, scores?, 100.0));
                }
                let scores: Result<Vec<f64>> = pred_refs
                    .iter()
                    .zip(&ref_sets)
                    .map(|(p, rs)| metrics::rouge_l(p, rs).map(|s| s.f1))
                    .collect();
                reports.push(MetricReport::from_examples("rougeL", scores?, 100.0));
            }
            "bleu" => {
                let score = metrics::corpus_bleu(&pred_refs, &ref_sets, args.smooth)?;
                let mut support = BTreeMap::new();
                support.insert("n".into(), preds.len() as f64);
                reports.push(MetricReport {
                    metric: "bleu".into(),
                    score,
                    per_example: None,
                    support_counts: support,
                });
            }
            "sari" => {
                let src_path = args.src.as_ref().ok_or_else(|| {
                    Error::Config("sari requires --src".into())
                })?;
                let sources = read_lines(src_path)?;
                if sources.len() != preds.len() {
                    return Err(Error::Data(format!(
                        "{} has {} lines, predictions have {}",
                        src_path.display(),
                        sources.len(),
                        preds.len()
                    )));
                }
                let src_refs: Vec<&str> = sources.iter().map(String::as_str).collect();
                let score = metrics::sari(&src_refs, &pred_refs, &ref_sets)?;
                let mut support = BTreeMap::new();
                support.insert("n".into(), preds.len() as f64);
                reports.push(MetricReport {
                    metric: "sari".into(),
                    score,
                    per_example: None,
                    support_counts: support,
                });
            }
            "meteor" => {
                let scores: Vec<f64> = pred_refs
                    .iter()
                    .zip(&ref_sets)
                    .map(|(p, rs)| {
                        rs.iter()
                            .map(|r| metrics::meteor_lite(p, r))
                            .fold(0.0, f64::max)
                    })
                    .collect();
                reports.push(MetricReport::from_examples("meteor", scores, 100.0));
            }
            "f1" => {
                let scores: Vec<f64> = pred_refs
                    .iter()
                    .zip(&ref_sets)
                    .map(|(p, rs)| {
                        rs.iter()
                            .map(|r| metrics::token_f1(p, r))
                            .fold(0.0, f64::max)
                    })
                    .collect();
                reports.push(MetricReport::from_examples("f1", scores, 100.0));
            }
            other => return Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }

    let json = serde_json::to_string_pretty(&reports).map_err(|e| Error::Data(e.to_string()))?;
    match &args.json {
        Some(path) => std::fs::write(path, json).map_err(|e| Error::io(path, e))?,
        None => println!("{json}"),
    }
    println!("{:<10} {:>10}", "metric", "score");
    for report in &reports {
        println!("{:<10} {:>10.4}", report.metric, report.score);
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Ok(value) = std::env::var("ESPREP_WORKERS") {
        cfg.workers = value
            .parse()
            .map_err(|_| Error::Config(format!("ESPREP_WORKERS={value} is not a number")))?;
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.noise.seed = seed;
        cfg.dedup.seed = seed;
    }
    let manifest = run_pipeline(&cfg)?;
    print!("{}", report(&manifest));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version exit cleanly; bad flags are config errors.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Clean(args) => cmd_clean(args),
        Command::Dedup(args) => cmd_dedup(args),
        Command::Tokenizer { command } => cmd_tokenizer(command),
        Command::Noise(args) => cmd_noise(args),
        Command::Taskprep(args) => cmd_taskprep(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => cmd_run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
