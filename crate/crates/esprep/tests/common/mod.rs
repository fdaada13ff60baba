//! Shared generators for the integration suite: a synthetic Spanish-like
//! word stock and corpus builders with controllable size and structure.

#![allow(dead_code)]

use esprep::corpus::Document;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "cl", "dr", "fr", "gr",
    "pl", "tr",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ia", "ue", "ei"];
const CODAS: &[&str] = &["", "", "", "n", "s", "r", "l"];

/// Deterministic stock of pronounceable word types.
pub fn word_stock(n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1234_5678);
    let mut words = Vec::with_capacity(n);
    let mut seen = std::collections::HashSet::new();
    while words.len() < n {
        let syllables = rng.gen_range(2..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.gen_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
        }
        w.push_str(CODAS[rng.gen_range(0..CODAS.len())]);
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

/// One sentence of `len` words drawn from `stock`, capitalized, period-closed.
pub fn gen_sentence(rng: &mut ChaCha8Rng, stock: &[String], len: usize) -> String {
    let mut parts = Vec::with_capacity(len);
    for _ in 0..len {
        parts.push(stock[rng.gen_range(0..stock.len())].clone());
    }
    let mut s = parts.join(" ");
    let first = s.remove(0).to_uppercase().to_string();
    format!("{first}{s}.")
}

/// Document of `n_sentences` sentences of 8..=15 words each.
pub fn gen_doc_text(rng: &mut ChaCha8Rng, stock: &[String], n_sentences: usize) -> String {
    let mut sentences = Vec::with_capacity(n_sentences);
    for _ in 0..n_sentences {
        let len = rng.gen_range(8..=15);
        sentences.push(gen_sentence(rng, stock, len));
    }
    sentences.join(" ")
}

/// Corpus of at least `target_bytes` bytes of text.
pub fn gen_corpus(seed: u64, stock: &[String], target_bytes: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut bytes = 0usize;
    while bytes < target_bytes {
        let n_sentences = rng.gen_range(3..=9);
        let text = gen_doc_text(&mut rng, stock, n_sentences);
        bytes += text.len();
        docs.push(Document::new(docs.len() as u64, text));
    }
    docs
}

/// Language fixture: (training sentences, held-out sentences).
pub fn lang_fixture(lang: &str) -> (Vec<String>, Vec<String>) {
    let path = format!("{}/tests/data/lang/{lang}.txt", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let lines: Vec<String> = text.lines().map(str::to_string).collect();
    assert!(lines.len() >= 48, "{lang} fixture too small");
    let (train, held) = lines.split_at(32);
    (train.to_vec(), held.to_vec())
}

/// Training corpus for one language: held-out lines excluded, cycled until
/// at least `min_chars` characters.
pub fn lang_training_docs(lang: &str, min_chars: usize) -> Vec<String> {
    let (train, _) = lang_fixture(lang);
    let mut docs = Vec::new();
    let mut chars = 0usize;
    let mut i = 0;
    while chars < min_chars {
        let doc = format!("{} {}", train[i % train.len()], train[(i + 7) % train.len()]);
        chars += doc.chars().count();
        docs.push(doc);
        i += 1;
    }
    docs
}
