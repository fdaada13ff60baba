//! Quality filtering, language identification and encoding repair.

pub mod encoding;
pub mod langid;
pub mod sentences;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusStats, Document};

pub use encoding::fix_encoding;
pub use langid::LangModel;
pub use sentences::{segment_sentences, SentenceSegmenter};

/// Punctuation considered ordinary in Spanish text for the symbol-ratio rule.
const ALLOWED_PUNCT: &str = ".,;:¿?¡!\"'()[]-–—%€$«»/&@+*=";

const CODE_KEYWORDS: &[&str] = &["#include", "def ", "function", "var ", ";}", "</", "{", "}"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanConfig {
    pub min_chars: usize,
    pub min_sentences: usize,
    pub max_char_run: usize,
    pub max_symbol_ratio: f64,
    pub max_top_char_ratio: f64,
    pub code_keyword_threshold: usize,
    pub blocklist: Vec<String>,
    pub lang_threshold: f64,
    pub target_lang: String,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            min_chars: 100,
            min_sentences: 2,
            max_char_run: 10,
            max_symbol_ratio: 0.05,
            max_top_char_ratio: 0.30,
            code_keyword_threshold: 3,
            blocklist: Vec::new(),
            lang_threshold: 0.98,
            target_lang: "es".into(),
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        for (name, v) in [
            ("max_symbol_ratio", self.max_symbol_ratio),
            ("max_top_char_ratio", self.max_top_char_ratio),
            ("lang_threshold", self.lang_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(crate::error::Error::Config(format!(
                    "{name} must be in [0,1], got {v}"
                )));
            }
        }
        for (name, v) in [
            ("min_chars", self.min_chars),
            ("min_sentences", self.min_sentences),
            ("max_char_run", self.max_char_run),
        ] {
            if v < 1 {
                return Err(crate::error::Error::Config(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Verdict of the filter chain: `rule` names the first failing rule, or
/// `"pass"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub accepted: bool,
    pub rule: String,
    pub detail: String,
}

impl FilterDecision {
    fn pass() -> Self {
        FilterDecision {
            accepted: true,
            rule: "pass".into(),
            detail: String::new(),
        }
    }

    fn reject(rule: &str, detail: String) -> Self {
        FilterDecision {
            accepted: false,
            rule: rule.into(),
            detail,
        }
    }
}

fn longest_char_run(text: &str) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev: Option<char> = None;
    for c in text.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            run = 1;
            prev = Some(c);
        }
        best = best.max(run);
    }
    best
}

fn is_allowed_char(c: char) -> bool {
    c.is_alphabetic() || c.is_numeric() || c.is_whitespace() || ALLOWED_PUNCT.contains(c)
}

/// Applies the filter chain in fixed order: min_chars, min_sentences,
/// char_run, top_char_ratio, symbol_ratio, code, blocklist.
/// Pure function of (doc.text, cfg).
pub fn filter_document(doc: &Document, cfg: &CleanConfig) -> FilterDecision {
    let text = &doc.text;
    let n_chars = text.chars().count();
    if n_chars < cfg.min_chars {
        return FilterDecision::reject(
            "min_chars",
            format!("{n_chars} chars < {}", cfg.min_chars),
        );
    }

    let n_sents = segment_sentences(text).len();
    if n_sents < cfg.min_sentences {
        return FilterDecision::reject(
            "min_sentences",
            format!("{n_sents} sentences < {}", cfg.min_sentences),
        );
    }

    let run = longest_char_run(text);
    if run > cfg.max_char_run {
        return FilterDecision::reject(
            "char_run",
            format!("character run of {run} > {}", cfg.max_char_run),
        );
    }

    // Single pass over non-whitespace chars: frequency of the most common
    // char and the disallowed-symbol count.
    let mut ascii_freq = [0usize; 128];
    let mut other_freq: BTreeMap<char, usize> = BTreeMap::new();
    let mut non_ws = 0usize;
    let mut symbols = 0usize;
    for c in text.chars() {
        if c.is_whitespace() {
            continue;
        }
        non_ws += 1;
        if (c as u32) < 128 {
            ascii_freq[c as usize] += 1;
        } else {
            *other_freq.entry(c).or_insert(0) += 1;
        }
        if !is_allowed_char(c) {
            symbols += 1;
        }
    }
    if non_ws > 0 {
        let top = ascii_freq
            .iter()
            .copied()
            .chain(other_freq.values().copied())
            .max()
            .unwrap_or(0);
        let top_ratio = top as f64 / non_ws as f64;
        if top_ratio > cfg.max_top_char_ratio {
            return FilterDecision::reject(
                "top_char_ratio",
                format!("top char ratio {top_ratio:.3} > {}", cfg.max_top_char_ratio),
            );
        }

        let sym_ratio = symbols as f64 / non_ws as f64;
        if sym_ratio > cfg.max_symbol_ratio {
            return FilterDecision::reject(
                "symbol_ratio",
                format!("symbol ratio {sym_ratio:.3} > {}", cfg.max_symbol_ratio),
            );
        }
    }

    let keyword_hits: HashSet<&str> = CODE_KEYWORDS
        .iter()
        .copied()
        .filter(|k| text.contains(k))
        .collect();
    if keyword_hits.len() >= cfg.code_keyword_threshold {
        let punct = text.chars().filter(|c| matches!(c, '{' | '}' | ';')).count();
        let density = punct as f64 * 100.0 / n_chars.max(1) as f64;
        if density > 1.0 {
            return FilterDecision::reject(
                "code",
                format!("{} code keywords, density {density:.2}/100", keyword_hits.len()),
            );
        }
    }

    if !cfg.blocklist.is_empty() {
        let lower = text.to_lowercase();
        let words: HashSet<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        for blocked in &cfg.blocklist {
            if words.contains(blocked.to_lowercase().as_str()) {
                return FilterDecision::reject("blocklist", format!("contains '{blocked}'"));
            }
        }
    }

    FilterDecision::pass()
}

/// Language gate: rejects when the detected language differs from the target
/// or the confidence falls under the threshold. Externally supplied
/// annotations in `meta` ("lang", "lang_score") take precedence over the
/// model.
pub fn language_decision(
    doc: &Document,
    model: Option<&LangModel>,
    cfg: &CleanConfig,
) -> crate::error::Result<FilterDecision> {
    let (lang, score) = match (doc.meta.get("lang"), doc.meta.get("lang_score")) {
        (Some(lang), Some(score)) => {
            let score: f64 = score
                .parse()
                .map_err(|_| crate::error::Error::Data(format!("bad lang_score on doc {}", doc.id)))?;
            (lang.clone(), score)
        }
        _ => match model {
            Some(m) => m.detect(&doc.text)?,
            None => return Ok(FilterDecision::pass()),
        },
    };
    if lang != cfg.target_lang || score < cfg.lang_threshold {
        Ok(FilterDecision::reject(
            "language",
            format!("{lang}@{score:.4} (need {}@{})", cfg.target_lang, cfg.lang_threshold),
        ))
    } else {
        Ok(FilterDecision::pass())
    }
}

/// Full clean stage over a document batch: encoding repair, then filters,
/// then the language gate. Annotates survivors and accounts for rejects.
pub fn clean_documents(
    docs: Vec<Document>,
    cfg: &CleanConfig,
    model: Option<&LangModel>,
) -> crate::error::Result<(Vec<Document>, CorpusStats)> {
    use rayon::prelude::*;

    let mut stats = CorpusStats {
        docs_in: docs.len() as u64,
        ..Default::default()
    };
    stats.bytes_in = docs.iter().map(|d| d.text.len() as u64).sum();

    let results: Vec<crate::error::Result<(Document, FilterDecision)>> = docs
        .into_par_iter()
        .map(|mut doc| {
            doc.text = fix_encoding(&doc.text);
            let mut decision = filter_document(&doc, cfg);
            if decision.accepted {
                decision = language_decision(&doc, model, cfg)?;
            }
            Ok((doc, decision))
        })
        .collect();

    let mut out = Vec::new();
    for res in results {
        let (doc, decision) = res?;
        if decision.accepted {
            stats.docs_out += 1;
            stats.bytes_out += doc.text.len() as u64;
            out.push(doc);
        } else {
            *stats.rejects_by_rule.entry(decision.rule).or_insert(0) += 1;
        }
    }
    Ok((out, stats))
}
