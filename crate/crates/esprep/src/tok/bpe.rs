//! BPE training and greedy merge application.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;

use crate::corpus::Document;
use crate::error::{Error, Result};

use super::{min_vocab_size, SpecialProfile, Tokenizer, TokenizerKind};

/// Counts whitespace-separated words with the marker prefixed.
pub(crate) fn word_counts<I>(corpus: I) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = Document>,
{
    let mut counts = BTreeMap::new();
    for doc in corpus {
        for word in doc.text.split_whitespace() {
            *counts
                .entry(format!("{}{word}", super::WORD_MARKER))
                .or_insert(0) += 1;
        }
    }
    counts
}

/// Trains a BPE model: repeatedly merge the most frequent adjacent symbol
/// pair (ties go to the lexicographically smaller pair) until `vocab_size`
/// is reached.
pub fn train_bpe<I>(corpus: I, vocab_size: usize, profile: SpecialProfile) -> Result<Tokenizer>
where
    I: IntoIterator<Item = Document>,
{
    let counts = word_counts(corpus);
    if counts.is_empty() {
        return Err(Error::Config("BPE training corpus is empty".into()));
    }

    let alphabet: BTreeSet<char> = counts.keys().flat_map(|w| w.chars()).collect();
    let min_size = min_vocab_size(profile, alphabet.len());
    if vocab_size < min_size {
        return Err(Error::Config(format!(
            "vocab_size {vocab_size} below minimum {min_size} \
             (specials + byte pieces + alphabet of {})",
            alphabet.len()
        )));
    }
    let n_merges = vocab_size - min_size;

    let mut words: Vec<(Vec<String>, u64)> = counts
        .into_iter()
        .map(|(w, c)| (w.chars().map(String::from).collect(), c))
        .collect();

    type Pair = (String, String);
    let mut pair_counts: HashMap<Pair, i64> = HashMap::new();
    let mut pair_words: HashMap<Pair, BTreeSet<usize>> = HashMap::new();
    for (wi, (syms, freq)) in words.iter().enumerate() {
        for pair in syms.windows(2) {
            let key = (pair[0].clone(), pair[1].clone());
            *pair_counts.entry(key.clone()).or_insert(0) += *freq as i64;
            pair_words.entry(key).or_default().insert(wi);
        }
    }

    // Max-heap with lazy invalidation; ties resolved toward the
    // lexicographically smaller pair.
    let mut heap: BinaryHeap<(i64, Reverse<Pair>)> = pair_counts
        .iter()
        .map(|(p, &c)| (c, Reverse(p.clone())))
        .collect();

    let mut merges: Vec<Pair> = Vec::with_capacity(n_merges);
    while merges.len() < n_merges {
        let best = loop {
            match heap.pop() {
                Some((count, Reverse(pair))) => {
                    if count > 0 && pair_counts.get(&pair) == Some(&count) {
                        break Some(pair);
                    }
                }
                None => break None,
            }
        };
        let Some(best) = best else { break };

        let merged: String = format!("{}{}", best.0, best.1);
        let affected: Vec<usize> = pair_words
            .remove(&best)
            .map(|s| s.into_iter().collect())
            .unwrap_or_default();
        pair_counts.remove(&best);

        let mut touched: BTreeSet<Pair> = BTreeSet::new();
        for wi in affected {
            let (syms, freq) = &words[wi];
            let freq = *freq as i64;
            // Remove this word's old pair contributions.
            for pair in syms.windows(2) {
                let key = (pair[0].clone(), pair[1].clone());
                if let Some(c) = pair_counts.get_mut(&key) {
                    *c -= freq;
                }
                if let Some(set) = pair_words.get_mut(&key) {
                    set.remove(&wi);
                }
            }
            // Apply the merge left to right.
            let mut new_syms: Vec<String> = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == best.0 && syms[i + 1] == best.1 {
                    new_syms.push(merged.clone());
                    i += 2;
                } else {
                    new_syms.push(syms[i].clone());
                    i += 1;
                }
            }
            // Add the new contributions back.
            for pair in new_syms.windows(2) {
                let key = (pair[0].clone(), pair[1].clone());
                *pair_counts.entry(key.clone()).or_insert(0) += freq;
                pair_words.entry(key.clone()).or_default().insert(wi);
                touched.insert(key);
            }
            words[wi].0 = new_syms;
        }
        for key in touched {
            if let Some(&c) = pair_counts.get(&key) {
                if c > 0 {
                    heap.push((c, Reverse(key)));
                }
            }
        }
        merges.push(best);
    }

    if merges.len() < n_merges {
        return Err(Error::Config(format!(
            "corpus exhausted after {} merges, cannot reach vocab_size {vocab_size}",
            merges.len()
        )));
    }

    let mut learned: Vec<(String, f64)> =
        alphabet.iter().map(|&c| (c.to_string(), 0.0)).collect();
    for (rank, (a, b)) in merges.iter().enumerate() {
        learned.push((format!("{a}{b}"), -((rank + 1) as f64)));
    }
    Ok(Tokenizer::assemble(
        TokenizerKind::Bpe,
        profile,
        learned,
        merges,
    ))
}

/// Applies merges greedily in training order, then maps symbols to ids with
/// byte fallback for anything outside the vocabulary.
pub(crate) fn encode_word(tok: &Tokenizer, word: &str, out: &mut Vec<u32>) {
    let mut syms: Vec<String> = word.chars().map(String::from).collect();
    loop {
        let mut best: Option<(u32, usize)> = None;
        for i in 0..syms.len().saturating_sub(1) {
            let key = (syms[i].clone(), syms[i + 1].clone());
            if let Some(&rank) = tok.merge_rank.get(&key) {
                if best.map_or(true, |(r, _)| rank < r) {
                    best = Some((rank, i));
                }
            }
        }
        match best {
            Some((_, i)) => {
                let merged = format!("{}{}", syms[i], syms[i + 1]);
                syms.splice(i..=i + 1, [merged]);
            }
            None => break,
        }
    }
    for sym in syms {
        match tok.piece_id(&sym) {
            Some(id) => out.push(id),
            None => tok.byte_fallback(&sym, out),
        }
    }
}

/// Test helper: char-level BPE model (zero merges) over `text`.
#[cfg(test)]
pub(crate) fn train_bpe_min(text: &str) -> Tokenizer {
    let doc = Document::new(0, text);
    let alphabet: BTreeSet<char> = word_counts([doc.clone()]).keys().flat_map(|w| w.chars()).collect();
    let size = min_vocab_size(SpecialProfile::Bart, alphabet.len());
    train_bpe([doc], size, SpecialProfile::Bart).unwrap()
}
