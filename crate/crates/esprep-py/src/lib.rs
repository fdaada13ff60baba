//! Python bindings: tokenizers, cleaning, dedup, noising, metrics and the
//! full pipeline, exposed as the `esprep_py` extension module.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use esprep::clean::{CleanConfig, LangModel};
use esprep::corpus::Document;
use esprep::dedup::DedupConfig;
use esprep::error::Error;
use esprep::noise::{NoiseConfig, Objective};
use esprep::tok::{SpecialProfile, Tokenizer, TokenizerKind};

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_kind(kind: &str) -> PyResult<TokenizerKind> {
    match kind {
        "bpe" => Ok(TokenizerKind::Bpe),
        "unigram" => Ok(TokenizerKind::Unigram),
        other => Err(PyValueError::new_err(format!("unknown kind '{other}'"))),
    }
}

fn parse_profile(profile: &str) -> PyResult<SpecialProfile> {
    match profile {
        "bart" => Ok(SpecialProfile::Bart),
        "t5" => Ok(SpecialProfile::T5),
        other => Err(PyValueError::new_err(format!("unknown profile '{other}'"))),
    }
}

#[pyfunction]
fn fix_encoding(text: &str) -> String {
    esprep::clean::fix_encoding(text)
}

#[pyfunction]
fn segment_sentences(text: &str) -> Vec<String> {
    esprep::clean::segment_sentences(text)
}

/// First failing filter rule name, or "pass".
#[pyfunction]
#[pyo3(signature = (text, min_chars=100, min_sentences=2))]
fn filter_verdict(text: &str, min_chars: usize, min_sentences: usize) -> String {
    let cfg = CleanConfig {
        min_chars,
        min_sentences,
        ..CleanConfig::default()
    };
    let doc = Document::new(0, text);
    esprep::clean::filter_document(&doc, &cfg).rule
}

#[pyclass(name = "LangModel")]
struct PyLangModel {
    inner: LangModel,
}

#[pymethods]
impl PyLangModel {
    /// Train from {language: [seed documents]}.
    #[staticmethod]
    fn train(seed_corpora: BTreeMap<String, Vec<String>>) -> PyResult<Self> {
        let corpora: BTreeMap<String, Vec<Document>> = seed_corpora
            .into_iter()
            .map(|(lang, docs)| {
                let docs = docs
                    .into_iter()
                    .enumerate()
                    .map(|(i, text)| Document::new(i as u64, text))
                    .collect();
                (lang, docs)
            })
            .collect();
        Ok(PyLangModel {
            inner: LangModel::train(corpora).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyLangModel {
            inner: LangModel::load(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py_err)
    }

    fn languages(&self) -> Vec<String> {
        self.inner.languages().iter().map(|s| s.to_string()).collect()
    }

    /// (language, posterior probability) for the best language.
    fn detect(&self, text: &str) -> PyResult<(String, f64)> {
        self.inner.detect(text).map_err(to_py_err)
    }

    fn posteriors(&self, text: &str) -> PyResult<Vec<(String, f64)>> {
        self.inner.posteriors(text).map_err(to_py_err)
    }
}

#[pyclass(name = "Tokenizer")]
struct PyTokenizer {
    inner: Tokenizer,
}

#[pymethods]
impl PyTokenizer {
    /// Train on in-memory texts.
    #[staticmethod]
    #[pyo3(signature = (texts, vocab_size, kind="bpe", profile="bart"))]
    fn train(texts: Vec<String>, vocab_size: usize, kind: &str, profile: &str) -> PyResult<Self> {
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(i, text)| Document::new(i as u64, text));
        let inner = match parse_kind(kind)? {
            TokenizerKind::Bpe => {
                esprep::tok::bpe::train_bpe(docs, vocab_size, parse_profile(profile)?)
            }
            TokenizerKind::Unigram => {
                esprep::tok::unigram::train_unigram(docs, vocab_size, parse_profile(profile)?)
            }
        }
        .map_err(to_py_err)?;
        Ok(PyTokenizer { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTokenizer {
            inner: Tokenizer::load(path).map_err(to_py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py_err)
    }

    fn encode(&self, text: &str) -> Vec<u32> {
        self.inner.encode(text, 0).ids
    }

    fn decode(&self, ids: Vec<u32>) -> PyResult<String> {
        self.inner.decode(&ids).map_err(to_py_err)
    }

    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn piece_id(&self, piece: &str) -> Option<u32> {
        self.inner.piece_id(piece)
    }

    fn mask_id(&self) -> Option<u32> {
        self.inner.mask_id()
    }

    fn sentinel_id(&self, i: usize) -> Option<u32> {
        self.inner.sentinel_id(i)
    }
}

/// Indices of documents kept after exact + near dedup over raw texts.
#[pyfunction]
#[pyo3(signature = (texts, seed=0))]
fn dedup_texts(texts: Vec<String>, seed: u64) -> PyResult<Vec<usize>> {
    let docs: Vec<Document> = texts
        .into_iter()
        .enumerate()
        .map(|(i, t)| Document::new(i as u64, t))
        .collect();
    let cfg = DedupConfig {
        seed,
        ..DedupConfig::default()
    };
    let (kept, _) = esprep::dedup::dedup(docs, &cfg).map_err(to_py_err)?;
    Ok(kept.into_iter().map(|d| d.id as usize).collect())
}

fn noise_cfg(objective: Objective, seed: u64) -> NoiseConfig {
    NoiseConfig {
        objective,
        seed,
        ..NoiseConfig::default()
    }
}

/// BART-style infilling over one token sequence; mask spans are collapsed
/// to `mask_id`. Returns (input_ids, target_ids).
#[pyfunction]
#[pyo3(signature = (ids, mask_id, seed=0, mask_rate=0.30))]
fn bart_noise(
    ids: Vec<u32>,
    mask_id: u32,
    seed: u64,
    mask_rate: f64,
) -> PyResult<(Vec<u32>, Vec<u32>)> {
    let cfg = NoiseConfig {
        mask_rate,
        ..noise_cfg(Objective::Bart, seed)
    };
    let seq = esprep::tok::TokenSeq::new(ids, 0);
    let spans = vec![0..seq.len()];
    let pair =
        esprep::noise::bart_noise_with_mask(&seq, &spans, &cfg, 0, mask_id).map_err(to_py_err)?;
    Ok((pair.input_ids, pair.target_ids))
}

/// T5-style span corruption. Returns (input_ids, target_ids).
#[pyfunction]
#[pyo3(signature = (ids, sentinel_ids, seed=0, corruption_rate=0.15))]
fn t5_noise(
    ids: Vec<u32>,
    sentinel_ids: Vec<u32>,
    seed: u64,
    corruption_rate: f64,
) -> PyResult<(Vec<u32>, Vec<u32>)> {
    let cfg = NoiseConfig {
        corruption_rate,
        ..noise_cfg(Objective::T5, seed)
    };
    let seq = esprep::tok::TokenSeq::new(ids, 0);
    let pair = esprep::noise::t5_span_corrupt(&seq, &cfg, 0, &sentinel_ids).map_err(to_py_err)?;
    Ok((pair.input_ids, pair.target_ids))
}

#[pyfunction]
fn rouge_n(candidate: &str, references: Vec<String>, n: usize) -> PyResult<(f64, f64, f64)> {
    let refs: Vec<&str> = references.iter().map(String::as_str).collect();
    let s = esprep::metrics::rouge_n(candidate, &refs, n).map_err(to_py_err)?;
    Ok((s.precision, s.recall, s.f1))
}

#[pyfunction]
fn rouge_l(candidate: &str, references: Vec<String>) -> PyResult<(f64, f64, f64)> {
    let refs: Vec<&str> = references.iter().map(String::as_str).collect();
    let s = esprep::metrics::rouge_l(candidate, &refs).map_err(to_py_err)?;
    Ok((s.precision, s.recall, s.f1))
}

#[pyfunction]
#[pyo3(signature = (candidates, reference_sets, smooth=false))]
fn corpus_bleu(
    candidates: Vec<String>,
    reference_sets: Vec<Vec<String>>,
    smooth: bool,
) -> PyResult<f64> {
    let cands: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let refs: Vec<Vec<&str>> = reference_sets
        .iter()
        .map(|set| set.iter().map(String::as_str).collect())
        .collect();
    esprep::metrics::corpus_bleu(&cands, &refs, smooth).map_err(to_py_err)
}

#[pyfunction]
fn sari(
    sources: Vec<String>,
    candidates: Vec<String>,
    reference_sets: Vec<Vec<String>>,
) -> PyResult<f64> {
    let srcs: Vec<&str> = sources.iter().map(String::as_str).collect();
    let cands: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let refs: Vec<Vec<&str>> = reference_sets
        .iter()
        .map(|set| set.iter().map(String::as_str).collect())
        .collect();
    esprep::metrics::sari(&srcs, &cands, &refs).map_err(to_py_err)
}

#[pyfunction]
fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    esprep::metrics::meteor_lite(candidate, reference)
}

#[pyfunction]
fn token_f1(candidate: &str, reference: &str) -> f64 {
    esprep::metrics::token_f1(candidate, reference)
}

/// Run the full pipeline from a TOML config; returns the manifest as a
/// JSON string.
#[pyfunction]
fn run_pipeline(config_path: PathBuf) -> PyResult<String> {
    let cfg = esprep::pipeline::PipelineConfig::load(config_path).map_err(to_py_err)?;
    let manifest = esprep::pipeline::run_pipeline(&cfg).map_err(to_py_err)?;
    serde_json::to_string_pretty(&manifest).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn esprep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTokenizer>()?;
    m.add_class::<PyLangModel>()?;
    m.add_function(wrap_pyfunction!(fix_encoding, m)?)?;
    m.add_function(wrap_pyfunction!(segment_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(filter_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(dedup_texts, m)?)?;
    m.add_function(wrap_pyfunction!(bart_noise, m)?)?;
    m.add_function(wrap_pyfunction!(t5_noise, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_n, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(sari, m)?)?;
    m.add_function(wrap_pyfunction!(meteor_lite, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
