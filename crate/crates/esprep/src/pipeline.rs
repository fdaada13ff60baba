//! Declarative pipeline: ingest -> clean -> dedup -> tokenize -> noise,
//! driven by one TOML config, with per-stage accounting and strict
//! determinism regardless of worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clean::{CleanConfig, LangModel};
use crate::corpus::{read_corpus_vec, write_corpus, CorpusStats, Document};
use crate::dedup::DedupConfig;
use crate::error::{Error, Result};
use crate::noise::{NoiseConfig, Objective};
use crate::tok::{SpecialProfile, Tokenizer, TokenizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Clean,
    Dedup,
    Tokenize,
    Noise,
}

impl Stage {
    fn order(self) -> usize {
        match self {
            Stage::Clean => 0,
            Stage::Dedup => 1,
            Stage::Tokenize => 2,
            Stage::Noise => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Clean => "clean",
            Stage::Dedup => "dedup",
            Stage::Tokenize => "tokenize",
            Stage::Noise => "noise",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerStageConfig {
    pub kind: TokenizerKind,
    pub vocab_size: usize,
    /// Pre-trained model to load when the tokenize stage is not run.
    pub model_path: Option<PathBuf>,
}

impl Default for TokenizerStageConfig {
    fn default() -> Self {
        TokenizerStageConfig {
            kind: TokenizerKind::Bpe,
            vocab_size: 8000,
            model_path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// 0 = use all available cores.
    pub workers: usize,
    pub input: PathBuf,
    pub workdir: PathBuf,
    pub stages: Vec<Stage>,
    pub clean: CleanConfig,
    /// Language model file for the clean stage's language gate.
    pub langid_model: Option<PathBuf>,
    pub dedup: DedupConfig,
    pub tokenizer: TokenizerStageConfig,
    pub noise: NoiseConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 1,
            input: PathBuf::new(),
            workdir: PathBuf::new(),
            stages: vec![Stage::Clean, Stage::Dedup],
            clean: CleanConfig::default(),
            langid_model: None,
            dedup: DedupConfig::default(),
            tokenizer: TokenizerStageConfig::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("bad pipeline config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PipelineConfig> {
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("no stages configured".into()));
        }
        for w in self.stages.windows(2) {
            if w[0].order() >= w[1].order() {
                return Err(Error::Config(format!(
                    "invalid stage order: {} cannot follow {}",
                    w[1].name(),
                    w[0].name()
                )));
            }
        }
        self.clean.validate()?;
        self.dedup.validate()?;
        self.noise.validate()?;
        if self.stages.contains(&Stage::Noise)
            && !self.stages.contains(&Stage::Tokenize)
            && self.tokenizer.model_path.is_none()
        {
            return Err(Error::Config(
                "noise stage needs either a tokenize stage or tokenizer.model_path".into(),
            ));
        }
        Ok(())
    }

    /// Hash of the exact serialized configuration driving a run.
    pub fn config_hash(&self) -> String {
        let serialized = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(serialized.as_bytes());
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub stats: CorpusStats,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub stages: Vec<StageRecord>,
    /// Set when a stage failed; holds the completed prefix only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
}

/// Noised example as written to the output file.
#[derive(Debug, Serialize, Deserialize)]
pub struct NoisedRecord {
    pub input_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub doc_id: u64,
    pub chunk_index: u32,
    pub objective: Objective,
}

fn profile_for(objective: Objective) -> SpecialProfile {
    match objective {
        Objective::Bart => SpecialProfile::Bart,
        Objective::T5 => SpecialProfile::T5,
    }
}

/// Noises every document with `tok` and writes NoisedRecord JSON-lines.
pub fn noise_corpus(
    docs: &[Document],
    tok: &Tokenizer,
    cfg: &NoiseConfig,
    out_path: &Path,
) -> Result<CorpusStats> {
    use rayon::prelude::*;

    let mask_id = tok.mask_id();
    let sentinel_ids: Vec<u32> = (0..crate::tok::NUM_SENTINELS)
        .map_while(|i| tok.sentinel_id(i))
        .collect();

    let per_doc: Vec<Result<Vec<NoisedRecord>>> = docs
        .par_iter()
        .map(|doc| {
            let mut records = Vec::new();
            for chunk in crate::noise::pack_document(doc, tok, cfg) {
                let pair = match cfg.objective {
                    Objective::Bart => {
                        let mask = mask_id.ok_or_else(|| {
                            Error::Config("tokenizer has no <mask> token for BART noising".into())
                        })?;
                        crate::noise::bart_noise_with_mask(
                            &chunk.tokens,
                            &chunk.sentence_spans,
                            cfg,
                            chunk.chunk_index,
                            mask,
                        )?
                    }
                    Objective::T5 => {
                        if sentinel_ids.is_empty() {
                            return Err(Error::Config(
                                "tokenizer has no sentinel tokens for T5 noising".into(),
                            ));
                        }
                        crate::noise::t5_span_corrupt(
                            &chunk.tokens,
                            cfg,
                            chunk.chunk_index,
                            &sentinel_ids,
                        )?
                    }
                };
                records.push(NoisedRecord {
                    input_ids: pair.input_ids,
                    target_ids: pair.target_ids,
                    doc_id: pair.doc_id,
                    chunk_index: pair.chunk_index,
                    objective: cfg.objective,
                });
            }
            Ok(records)
        })
        .collect();

    let mut stats = CorpusStats {
        docs_in: docs.len() as u64,
        ..Default::default()
    };
    let file = std::fs::File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let mut out = std::io::BufWriter::new(file);
    use std::io::Write;
    for records in per_doc {
        for record in records? {
            let line = serde_json::to_string(&record)
                .map_err(|e| Error::Data(format!("noise record: {e}")))?;
            out.write_all(line.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .map_err(|e| Error::io(out_path, e))?;
            stats.docs_out += 1;
            stats.bytes_out += line.len() as u64 + 1;
        }
    }
    out.flush().map_err(|e| Error::io(out_path, e))?;
    Ok(stats)
}

fn execute(cfg: &PipelineConfig) -> Result<RunManifest> {
    let mut manifest = RunManifest {
        config_hash: cfg.config_hash(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        stages: Vec::new(),
        failed_stage: None,
    };
    std::fs::create_dir_all(&cfg.workdir).map_err(|e| Error::io(&cfg.workdir, e))?;

    let lang_model = match &cfg.langid_model {
        Some(path) => Some(LangModel::load(path)?),
        None => None,
    };

    let mut docs = read_corpus_vec(&cfg.input)?;
    let mut tokenizer: Option<Tokenizer> = match &cfg.tokenizer.model_path {
        Some(path) => Some(Tokenizer::load(path)?),
        None => None,
    };

    for &stage in &cfg.stages {
        let start = Instant::now();
        let stats = match stage {
            Stage::Clean => {
                let (survivors, stats) =
                    crate::clean::clean_documents(std::mem::take(&mut docs), &cfg.clean, lang_model.as_ref())?;
                docs = survivors;
                write_corpus(docs.iter().cloned(), cfg.workdir.join("clean.jsonl"))?;
                stats
            }
            Stage::Dedup => {
                let docs_in = docs.len() as u64;
                let (survivors, report) = crate::dedup::dedup(std::mem::take(&mut docs), &cfg.dedup)?;
                docs = survivors;
                write_corpus(docs.iter().cloned(), cfg.workdir.join("dedup.jsonl"))?;
                let report_json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Data(e.to_string()))?;
                let report_path = cfg.workdir.join("dedup_report.json");
                std::fs::write(&report_path, report_json).map_err(|e| Error::io(&report_path, e))?;
                let mut stats = CorpusStats {
                    docs_in,
                    docs_out: docs.len() as u64,
                    ..Default::default()
                };
                if report.removed_count > 0 {
                    stats
                        .rejects_by_rule
                        .insert("duplicate".into(), report.removed_count);
                }
                stats
            }
            Stage::Tokenize => {
                let profile = profile_for(cfg.noise.objective);
                if docs.is_empty() {
                    CorpusStats::default()
                } else {
                    let trained = match cfg.tokenizer.kind {
                        TokenizerKind::Bpe => crate::tok::bpe::train_bpe(
                            docs.iter().cloned(),
                            cfg.tokenizer.vocab_size,
                            profile,
                        )?,
                        TokenizerKind::Unigram => crate::tok::unigram::train_unigram(
                            docs.iter().cloned(),
                            cfg.tokenizer.vocab_size,
                            profile,
                        )?,
                    };
                    trained.save(cfg.workdir.join("tokenizer.model"))?;
                    tokenizer = Some(trained);
                    CorpusStats {
                        docs_in: docs.len() as u64,
                        docs_out: docs.len() as u64,
                        ..Default::default()
                    }
                }
            }
            Stage::Noise => {
                let out_path = cfg.workdir.join("noised.jsonl");
                if docs.is_empty() {
                    std::fs::write(&out_path, "").map_err(|e| Error::io(&out_path, e))?;
                    CorpusStats::default()
                } else {
                    let tok = tokenizer.as_ref().ok_or_else(|| {
                        Error::Config("noise stage reached without a tokenizer".into())
                    })?;
                    noise_corpus(&docs, tok, &cfg.noise, &out_path)?
                }
            }
        };
        manifest.stages.push(StageRecord {
            stage: stage.name().to_string(),
            stats,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(manifest)
}

/// Runs every configured stage in order inside a worker pool of
/// `cfg.workers` threads. Outputs are byte-identical for identical
/// (inputs, config, seed) regardless of worker count.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let manifest = pool.install(|| execute(cfg))?;
    let manifest_json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    let path = cfg.workdir.join("manifest.json");
    std::fs::write(&path, manifest_json).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Renders a stable, human-readable per-stage summary.
pub fn report(manifest: &RunManifest) -> String {
    let mut out = String::new();
    writeln!(out, "config {}", manifest.config_hash).unwrap();
    writeln!(
        out,
        "{:<10} {:>10} {:>10} {:>12} {:>8}  rejects",
        "stage", "docs_in", "docs_out", "bytes_out", "secs"
    )
    .unwrap();
    for record in &manifest.stages {
        let rejects: Vec<String> = record
            .stats
            .rejects_by_rule
            .iter()
            .map(|(rule, n)| format!("{rule}={n}"))
            .collect();
        writeln!(
            out,
            "{:<10} {:>10} {:>10} {:>12} {:>8.2}  {}",
            record.stage,
            record.stats.docs_in,
            record.stats.docs_out,
            record.stats.bytes_out,
            record.seconds,
            rejects.join(" ")
        )
        .unwrap();
    }
    out
}
