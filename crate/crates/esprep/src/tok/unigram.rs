//! Unigram LM tokenizer: EM training with likelihood-based pruning and
//! Viterbi segmentation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::Document;
use crate::error::{Error, Result};

use super::{bpe::word_counts, min_vocab_size, SpecialProfile, Tokenizer, TokenizerKind};

const MAX_SEED_LEN: usize = 8;
const EM_ROUNDS_PER_PRUNE: usize = 2;
const PRUNE_RATIO: f64 = 0.20;
/// Per-byte score of the fallback path; far below any real piece.
const BYTE_FALLBACK_SCORE: f64 = -30.0;

fn logsumexp(acc: f64, x: f64) -> f64 {
    if acc == f64::NEG_INFINITY {
        return x;
    }
    if x == f64::NEG_INFINITY {
        return acc;
    }
    let (hi, lo) = if acc > x { (acc, x) } else { (x, acc) };
    hi + (lo - hi).exp().ln_1p()
}

struct PieceTable {
    scores: BTreeMap<String, f64>,
    max_len: usize,
}

impl PieceTable {
    fn new(scores: BTreeMap<String, f64>) -> Self {
        let max_len = scores.keys().map(|p| p.chars().count()).max().unwrap_or(1);
        PieceTable { scores, max_len }
    }
}

/// Lattice edges of a word under a piece table: (start, end, piece, score).
fn edges<'a>(
    chars: &[char],
    table: &'a PieceTable,
    banned: Option<&str>,
) -> Vec<(usize, usize, &'a str, f64)> {
    let n = chars.len();
    let mut out = Vec::new();
    let mut buf = String::new();
    for i in 0..n {
        buf.clear();
        for j in i + 1..=n.min(i + table.max_len) {
            buf.push(chars[j - 1]);
            if Some(buf.as_str()) == banned {
                continue;
            }
            if let Some((piece, &score)) = table.scores.get_key_value(buf.as_str()) {
                out.push((i, j, piece.as_str(), score));
            }
        }
    }
    out
}

/// Viterbi log-probability and path. Ties: fewer pieces, then longest piece
/// at the leftmost position. Returns None if the word is unsegmentable.
fn viterbi<'a>(
    chars: &[char],
    table: &'a PieceTable,
    banned: Option<&str>,
) -> Option<(f64, Vec<&'a str>)> {
    let n = chars.len();
    // best[i]: (logp, pieces, chosen len) for the suffix starting at i.
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n + 1];
    best[n] = Some((0.0, 0, 0));
    let mut piece_at: Vec<Option<&str>> = vec![None; n];

    let mut by_start: Vec<Vec<(usize, &str, f64)>> = vec![Vec::new(); n];
    for (i, j, piece, score) in edges(chars, table, banned) {
        by_start[i].push((j, piece, score));
    }

    for i in (0..n).rev() {
        let mut chosen: Option<(f64, usize, usize, &str)> = None;
        for &(j, piece, score) in &by_start[i] {
            if let Some((suffix_lp, suffix_count, _)) = best[j] {
                let cand = (score + suffix_lp, suffix_count + 1, j - i);
                let better = match chosen {
                    None => true,
                    Some((lp, count, len, _)) => {
                        cand.0 > lp
                            || (cand.0 == lp && cand.1 < count)
                            || (cand.0 == lp && cand.1 == count && cand.2 > len)
                    }
                };
                if better {
                    chosen = Some((cand.0, cand.1, cand.2, piece));
                }
            }
        }
        if let Some((lp, count, len, piece)) = chosen {
            best[i] = Some((lp, count, len));
            piece_at[i] = Some(piece);
        }
    }

    let (logp, _, _) = best[0]?;
    let mut path = Vec::new();
    let mut i = 0;
    while i < n {
        let (_, _, len) = best[i].unwrap();
        path.push(piece_at[i].unwrap());
        i += len;
    }
    Some((logp, path))
}

/// One E-step: expected piece counts over the weighted word lattice via
/// forward-backward in log space.
fn expected_counts(
    words: &[(Vec<char>, u64)],
    table: &PieceTable,
) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    for (chars, freq) in words {
        let n = chars.len();
        let word_edges = edges(chars, table, None);
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for &(i, j, _, score) in &word_edges {
            alpha[j] = logsumexp(alpha[j], alpha[i] + score);
        }
        beta[n] = 0.0;
        for &(i, j, _, score) in word_edges.iter().rev() {
            beta[i] = logsumexp(beta[i], score + beta[j]);
        }
        let z = alpha[n];
        if z == f64::NEG_INFINITY {
            continue;
        }
        for &(i, j, piece, score) in &word_edges {
            let post = (alpha[i] + score + beta[j] - z).exp() * *freq as f64;
            if post > 0.0 {
                *counts.entry(piece.to_string()).or_insert(0.0) += post;
            }
        }
    }
    counts
}

fn renormalize(table: &mut PieceTable, counts: &BTreeMap<String, f64>) {
    const EPS: f64 = 1e-6;
    let total: f64 = counts.values().sum();
    let n = table.scores.len() as f64;
    let denom = total + EPS * n;
    for (piece, score) in table.scores.iter_mut() {
        let c = counts.get(piece).copied().unwrap_or(0.0);
        *score = ((c + EPS) / denom).ln();
    }
}

/// Trains a unigram LM tokenizer with the classic seed/EM/prune loop.
/// Single-character pieces are never pruned.
pub fn train_unigram<I>(
    corpus: I,
    vocab_size: usize,
    profile: SpecialProfile,
) -> Result<Tokenizer>
where
    I: IntoIterator<Item = Document>,
{
    let counts = word_counts(corpus);
    if counts.is_empty() {
        return Err(Error::Config("unigram training corpus is empty".into()));
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
    let target = vocab_size - profile.count() - super::NUM_BYTE_PIECES;

    let words: Vec<(Vec<char>, u64)> = counts
        .iter()
        .map(|(w, &c)| (w.chars().collect(), c))
        .collect();

    // Seed: every substring up to MAX_SEED_LEN, most frequent first, plus all
    // single characters.
    let mut substring_freq: HashMap<String, u64> = HashMap::new();
    for (chars, freq) in &words {
        for i in 0..chars.len() {
            for j in i + 1..=chars.len().min(i + MAX_SEED_LEN) {
                let sub: String = chars[i..j].iter().collect();
                *substring_freq.entry(sub).or_insert(0) += freq;
            }
        }
    }
    let seed_budget = target.max(target.saturating_mul(8));
    let mut ranked: Vec<(String, u64)> = substring_freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let total_freq: u64 = ranked.iter().map(|(_, c)| c).sum();

    let mut scores: BTreeMap<String, f64> = BTreeMap::new();
    for (sub, freq) in ranked.into_iter().take(seed_budget) {
        scores.insert(sub, ((freq as f64) / total_freq as f64).ln());
    }
    for &c in &alphabet {
        let s = c.to_string();
        scores.entry(s).or_insert((1.0 / total_freq as f64).ln());
    }
    if scores.len() < target {
        return Err(Error::Config(format!(
            "corpus yields only {} candidate pieces, cannot reach vocab_size {vocab_size}",
            scores.len()
        )));
    }
    let mut table = PieceTable::new(scores);

    loop {
        for _ in 0..EM_ROUNDS_PER_PRUNE {
            let counts = expected_counts(&words, &table);
            renormalize(&mut table, &counts);
        }
        if table.scores.len() <= target {
            break;
        }

        // Likelihood degradation per prunable piece: re-segmentation cost of
        // the words whose Viterbi path uses it.
        let mut loss: BTreeMap<String, f64> = table
            .scores
            .keys()
            .filter(|p| p.chars().count() > 1)
            .map(|p| (p.clone(), 0.0))
            .collect();
        for (chars, freq) in &words {
            let Some((logp, path)) = viterbi(chars, &table, None) else {
                continue;
            };
            let used: BTreeSet<&str> = path.into_iter().collect();
            for piece in used {
                if piece.chars().count() <= 1 {
                    continue;
                }
                let alt = viterbi(chars, &table, Some(piece))
                    .map(|(lp, _)| lp)
                    .unwrap_or(f64::NEG_INFINITY);
                *loss.get_mut(piece).unwrap() += *freq as f64 * (logp - alt);
            }
        }

        let prunable = loss.len();
        let excess = table.scores.len() - target;
        let n_remove = excess.min(((prunable as f64 * PRUNE_RATIO).ceil() as usize).max(1));
        let mut ordered: Vec<(f64, String)> =
            loss.into_iter().map(|(p, l)| (l, p)).collect();
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (_, piece) in ordered.into_iter().take(n_remove) {
            table.scores.remove(&piece);
        }
        table = PieceTable::new(table.scores);
    }

    // Scores are log-probabilities, strictly negative.
    let learned: Vec<(String, f64)> = table
        .scores
        .into_iter()
        .map(|(p, s)| (p, s.min(-f64::MIN_POSITIVE)))
        .collect();
    debug_assert_eq!(learned.len(), target);
    Ok(Tokenizer::assemble(
        TokenizerKind::Unigram,
        profile,
        learned,
        Vec::new(),
    ))
}

/// Viterbi segmentation of one marked word, with byte fallback for
/// characters outside the vocabulary.
pub(crate) fn encode_word(tok: &Tokenizer, word: &str, out: &mut Vec<u32>) {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    let max_len = tok.max_piece_chars();

    // best[i]: (logp, count, len) for suffix i; len 0 marks byte fallback.
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; n + 1];
    best[n] = Some((0.0, 0, 0));
    for i in (0..n).rev() {
        let mut chosen: Option<(f64, usize, usize)> = None;
        let mut buf = String::new();
        for j in i + 1..=n.min(i + max_len) {
            buf.push(chars[j - 1]);
            let score = match tok.piece_id(&buf) {
                Some(id) if !tok.is_special(id) && !tok.is_byte_piece(id) => {
                    tok.vocab[id as usize].1
                }
                _ => continue,
            };
            if let Some((suffix_lp, suffix_count, _)) = best[j] {
                let cand = (score + suffix_lp, suffix_count + 1, j - i);
                let better = match chosen {
                    None => true,
                    Some((lp, count, len)) => {
                        cand.0 > lp
                            || (cand.0 == lp && cand.1 < count)
                            || (cand.0 == lp && cand.1 == count && cand.2 > len)
                    }
                };
                if better {
                    chosen = Some(cand);
                }
            }
        }
        if chosen.is_none() {
            // Byte-fallback edge for the single character at i.
            if let Some((suffix_lp, suffix_count, _)) = best[i + 1] {
                let nbytes = chars[i].len_utf8() as f64;
                chosen = Some((BYTE_FALLBACK_SCORE * nbytes + suffix_lp, suffix_count + 1, 0));
            }
        }
        best[i] = chosen;
    }

    let mut i = 0;
    while i < n {
        let (_, _, len) = best[i].expect("fallback edges make every word segmentable");
        if len == 0 {
            let s = chars[i].to_string();
            tok.byte_fallback(&s, out);
            i += 1;
        } else {
            let piece: String = chars[i..i + len].iter().collect();
            out.push(tok.piece_id(&piece).unwrap());
            i += len;
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Brute-force best segmentation over a tokenizer's learned pieces.
    /// Enumerates every segmentation of `word`, scoring with right-to-left
    /// summation to match the DP, applying the same tie rules.
    pub fn brute_force_segment(tok: &Tokenizer, word: &str) -> Option<Vec<String>> {
        fn rec(chars: &[char], i: usize, tok: &Tokenizer, current: &mut Vec<String>, all: &mut Vec<Vec<String>>) {
            if i == chars.len() {
                all.push(current.clone());
                return;
            }
            for j in i + 1..=chars.len() {
                let piece: String = chars[i..j].iter().collect();
                if let Some(id) = tok.piece_id(&piece) {
                    if !tok.is_special(id) && !tok.is_byte_piece(id) {
                        current.push(piece);
                        rec(chars, j, tok, current, all);
                        current.pop();
                    }
                }
            }
        }
        let chars: Vec<char> = word.chars().collect();
        let mut all = Vec::new();
        rec(&chars, 0, tok, &mut Vec::new(), &mut all);

        let score = |seg: &Vec<String>| -> f64 {
            let mut lp = 0.0;
            for piece in seg.iter().rev() {
                lp += tok.vocab[tok.piece_id(piece).unwrap() as usize].1;
            }
            lp
        };
        all.into_iter().max_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then_with(|| b.len().cmp(&a.len()))
                .then_with(|| {
                    // Prefer the longer piece at the leftmost differing slot.
                    for (pa, pb) in a.iter().zip(b.iter()) {
                        match pa.chars().count().cmp(&pb.chars().count()) {
                            std::cmp::Ordering::Equal => continue,
                            ord => return ord,
                        }
                    }
                    std::cmp::Ordering::Equal
                })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tok::WORD_MARKER;

    fn doc(text: &str) -> Document {
        Document::new(0, text)
    }

    fn alphabet_of(text: &str) -> usize {
        word_counts([doc(text)])
            .keys()
            .flat_map(|w| w.chars())
            .collect::<BTreeSet<char>>()
            .len()
    }

    #[test]
    fn repeated_word_kept_as_single_piece() {
        let text = "casa casa casa casa casa";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 6;
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        let full = format!("{WORD_MARKER}casa");
        assert!(tok.piece_id(&full).is_some(), "▁casa should be retained");
        let seq = tok.encode("casa", 0);
        assert_eq!(seq.ids, vec![tok.piece_id(&full).unwrap()]);
        // Brute-force over all segmentations agrees.
        let seg = test_support::brute_force_segment(&tok, &full).unwrap();
        assert_eq!(seg, vec![full]);
    }

    #[test]
    fn degenerate_budget_gives_character_model() {
        let text = "aba aba bab";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text));
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        // Only single-character learned pieces remain.
        let learned = &tok.vocab[SpecialProfile::T5.count() + super::super::NUM_BYTE_PIECES..];
        assert!(learned.iter().all(|(p, _)| p.chars().count() == 1));
        // Scores approximate character unigram log-frequencies.
        // "aba aba bab" marked: chars ▁=3, a=5, b=4, total 12.
        let score_of = |c: &str| learned.iter().find(|(p, _)| p == c).unwrap().1;
        assert!((score_of("a") - (5f64 / 12.0).ln()).abs() < 1e-3);
        assert!((score_of("b") - (4f64 / 12.0).ln()).abs() < 1e-3);
    }

    #[test]
    fn character_pieces_survive_tiny_budgets() {
        let text = "casa masa pasa tasa casa masa";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 2;
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        for c in "casmpt▁".chars() {
            assert!(
                tok.piece_id(&c.to_string()).is_some(),
                "char {c:?} must never be pruned"
            );
        }
    }

    #[test]
    fn vocab_size_exact() {
        let text = "el perro come pan y la niña bebe agua fría cada mañana temprano";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 15;
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        assert_eq!(tok.vocab_size(), size);
    }

    #[test]
    fn scores_are_negative_log_probs() {
        let text = "uno dos tres cuatro cinco uno dos";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 5;
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        let learned = &tok.vocab[SpecialProfile::T5.count() + super::super::NUM_BYTE_PIECES..];
        assert!(learned.iter().all(|(_, s)| *s < 0.0));
    }

    #[test]
    fn viterbi_prefers_higher_logprob_path() {
        // Toy table: "▁ab" at -1.0 beats "▁a"+"b" at -4.0.
        let learned = vec![
            ("▁".to_string(), -3.0),
            ("▁a".to_string(), -2.0),
            ("▁ab".to_string(), -1.0),
            ("a".to_string(), -3.0),
            ("b".to_string(), -2.0),
        ];
        let tok = Tokenizer::assemble(TokenizerKind::Unigram, SpecialProfile::T5, learned, vec![]);
        let seq = tok.encode("ab", 0);
        assert_eq!(seq.ids, vec![tok.piece_id("▁ab").unwrap()]);
    }

    #[test]
    fn viterbi_matches_brute_force_on_trained_vocab() {
        let text = "la casa blanca la masa la casa la tasa blanca casa masa";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 12;
        let tok = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        for word in ["la", "casa", "masa", "tasa", "blanca", "casab", "lacasa"] {
            let marked = format!("{WORD_MARKER}{word}");
            let mut ids = Vec::new();
            encode_word(&tok, &marked, &mut ids);
            let via_dp: Vec<String> = ids
                .iter()
                .map(|&id| tok.vocab[id as usize].0.clone())
                .collect();
            let brute = test_support::brute_force_segment(&tok, &marked).unwrap();
            assert_eq!(via_dp, brute, "word {word:?}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let text = "mar tierra cielo mar cielo fuego agua tierra mar";
        let size = min_vocab_size(SpecialProfile::T5, alphabet_of(text)) + 10;
        let a = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        let b = train_unigram([doc(text)], size, SpecialProfile::T5).unwrap();
        assert_eq!(a.vocab, b.vocab);
    }
}
