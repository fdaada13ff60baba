//! Corpus-level text generation metrics: ROUGE-1/2/L, BLEU, SARI,
//! exact-match METEOR and token-overlap F1.
//!
//! Tokenization is Spanish-safe and shared by every metric: NFKC, lowercase,
//! alphanumeric runs as words, punctuation as separate tokens. No stemming
//! and no synonym resources, so METEOR scores here are not comparable to
//! published METEOR numbers.

mod bleu;
mod meteor;
mod rouge;
mod sari;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

pub use bleu::corpus_bleu;
pub use meteor::meteor_lite;
pub use rouge::{rouge_l, rouge_n, PrecisionRecallF1};
pub use sari::sari;

/// Lowercase + NFKC, alphanumeric runs as tokens, punctuation split out.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfkc().collect::<String>().to_lowercase();
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in normalized.chars() {
        if c.is_alphanumeric() {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub(crate) fn ngrams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    tokens.windows(n).map(|w| w.to_vec()).collect()
}

pub(crate) fn count_ngrams(tokens: &[String], n: usize) -> BTreeMap<Vec<String>, u64> {
    let mut counts = BTreeMap::new();
    for g in ngrams(tokens, n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Corpus-level score plus the counts sufficient to recompute it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_example: Option<Vec<f64>>,
    pub support_counts: BTreeMap<String, f64>,
}

impl MetricReport {
    /// Mean-of-examples report; support carries the sum and count.
    pub fn from_examples(metric: &str, per_example: Vec<f64>, scale: f64) -> MetricReport {
        let sum: f64 = per_example.iter().sum();
        let n = per_example.len() as f64;
        let mut support = BTreeMap::new();
        support.insert("sum".into(), sum);
        support.insert("n".into(), n);
        support.insert("scale".into(), scale);
        MetricReport {
            metric: metric.to_string(),
            score: if n > 0.0 { sum / n * scale } else { 0.0 },
            per_example: Some(per_example),
            support_counts: support,
        }
    }

    /// Recomputes the score from the support counts; equals `score` to 1e-9.
    pub fn recompute(&self) -> f64 {
        let get = |k: &str| self.support_counts.get(k).copied();
        match (get("sum"), get("n"), get("scale")) {
            (Some(sum), Some(n), Some(scale)) if n > 0.0 => sum / n * scale,
            _ => self.score,
        }
    }
}

/// Multiset token overlap F1. Both empty -> 1; exactly one empty -> 0.
pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() && refr.is_empty() {
        return 1.0;
    }
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let cand_counts = count_ngrams(&cand, 1);
    let ref_counts = count_ngrams(&refr, 1);
    let overlap: u64 = cand_counts
        .iter()
        .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand.len() as f64;
    let r = overlap as f64 / refr.len() as f64;
    2.0 * p * r / (p + r)
}
