//! Self-supervised noising: single-document packing, BART-style text
//! infilling with sentence permutation, and T5-style span corruption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::tok::{TokenSeq, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Bart,
    T5,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub objective: Objective,
    /// BART: fraction of tokens covered by masked spans.
    pub mask_rate: f64,
    /// BART: Poisson mean of span lengths.
    pub span_lambda: f64,
    pub permute_sentences: bool,
    /// T5: fraction of tokens dropped into sentinel spans.
    pub corruption_rate: f64,
    /// T5: average span length.
    pub mean_span: f64,
    pub max_len: usize,
    pub min_chunk: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            objective: Objective::Bart,
            mask_rate: 0.30,
            span_lambda: 3.0,
            permute_sentences: true,
            corruption_rate: 0.15,
            mean_span: 3.0,
            max_len: 1024,
            min_chunk: 32,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.mask_rate) || !(0.0..1.0).contains(&self.corruption_rate) {
            return Err(Error::Config("noise rates must be in [0,1)".into()));
        }
        if self.mean_span < 1.0 {
            return Err(Error::Config("mean_span must be >= 1".into()));
        }
        if self.max_len < self.min_chunk {
            return Err(Error::Config("max_len must be >= min_chunk".into()));
        }
        Ok(())
    }
}

/// One pretraining example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoisedPair {
    pub input_ids: Vec<u32>,
    pub target_ids: Vec<u32>,
    pub doc_id: u64,
    pub chunk_index: u32,
    pub seed_used: u64,
}

/// Splitmix64-based seed mixing: the per-example stream depends only on
/// (global seed, doc id, chunk index), never on worker scheduling.
pub fn mix_seed(global: u64, doc_id: u64, chunk_index: u32) -> u64 {
    let mut x = global
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(doc_id)
        .wrapping_mul(0xBF58476D1CE4E5B9)
        .wrapping_add(chunk_index as u64);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58476D1CE4E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D049BB133111EB);
    x ^= x >> 31;
    x
}

/// A chunk of one document plus the sentence spans that partition it
/// (token index ranges).
#[derive(Debug, Clone)]
pub struct Chunk {
    pub tokens: TokenSeq,
    pub chunk_index: u32,
    pub sentence_spans: Vec<std::ops::Range<usize>>,
}

/// Encodes the document sentence by sentence and splits into consecutive
/// chunks of at most `max_len` tokens; a trailing chunk shorter than
/// `min_chunk` is dropped. Tokens never cross document boundaries.
pub fn pack_document(doc: &Document, tok: &Tokenizer, cfg: &NoiseConfig) -> Vec<Chunk> {
    let sentences = crate::clean::segment_sentences(&doc.text);
    let mut all_ids: Vec<u32> = Vec::new();
    let mut boundaries: Vec<usize> = vec![0];
    for sentence in &sentences {
        let seq = tok.encode(sentence, doc.id);
        all_ids.extend(seq.ids);
        boundaries.push(all_ids.len());
    }

    let mut chunks = Vec::new();
    let mut start = 0;
    let mut chunk_index = 0u32;
    while start < all_ids.len() {
        let end = (start + cfg.max_len).min(all_ids.len());
        if end - start < cfg.min_chunk && end == all_ids.len() {
            break;
        }
        // Sentence spans clipped to this chunk.
        let mut spans = Vec::new();
        for w in boundaries.windows(2) {
            let (s, e) = (w[0].max(start), w[1].min(end));
            if s < e {
                spans.push(s - start..e - start);
            }
        }
        chunks.push(Chunk {
            tokens: TokenSeq::new(all_ids[start..end].to_vec(), doc.id),
            chunk_index,
            sentence_spans: spans,
        });
        chunk_index += 1;
        start = end;
    }
    chunks
}

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    // Knuth's method; fine for small lambda.
    let l = (-lambda).exp();
    let mut k = 0usize;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= l {
            return k;
        }
        k += 1;
    }
}

fn check_partition(len: usize, spans: &[std::ops::Range<usize>]) -> Result<()> {
    let mut expected = 0;
    for span in spans {
        if span.start != expected || span.end < span.start {
            return Err(Error::Data(format!(
                "sentence spans do not partition the chunk at {expected}"
            )));
        }
        expected = span.end;
    }
    if expected != len {
        return Err(Error::Data(format!(
            "sentence spans cover {expected} of {len} tokens"
        )));
    }
    Ok(())
}

/// Uniform random permutation of sentence blocks; token multiset preserved.
pub fn permute_sentences(
    chunk: &[u32],
    sentence_spans: &[std::ops::Range<usize>],
    rng_seed: u64,
) -> Result<Vec<u32>> {
    check_partition(chunk.len(), sentence_spans)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut order: Vec<usize> = (0..sentence_spans.len()).collect();
    // Fisher-Yates.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut out = Vec::with_capacity(chunk.len());
    for &si in &order {
        out.extend_from_slice(&chunk[sentence_spans[si].clone()]);
    }
    Ok(out)
}

/// Non-overlapping masked spans covering exactly `budget` tokens. Span
/// lengths are Poisson(lambda); lengths above the remaining budget are
/// resampled and zero lengths insert a mask without deleting anything.
/// Returns (covered spans, zero-length insertion positions).
fn sample_mask_spans(
    n: usize,
    budget: usize,
    lambda: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<std::ops::Range<usize>>, Vec<usize>) {
    let mut covered = vec![false; n];
    let mut spans: Vec<std::ops::Range<usize>> = Vec::new();
    let mut insertions: Vec<usize> = Vec::new();
    let mut total = 0usize;
    while total < budget {
        let len = poisson(rng, lambda);
        if len > budget - total {
            continue;
        }
        if len == 0 {
            insertions.push(rng.gen_range(0..=n));
            continue;
        }
        // Uniform over valid non-overlapping starts; rejection first, then
        // exhaustive fallback.
        let mut placed = None;
        for _ in 0..64 {
            let start = rng.gen_range(0..=n - len);
            if covered[start..start + len].iter().all(|&c| !c) {
                placed = Some(start);
                break;
            }
        }
        if placed.is_none() {
            let valid: Vec<usize> = (0..=n - len)
                .filter(|&s| covered[s..s + len].iter().all(|&c| !c))
                .collect();
            if valid.is_empty() {
                continue;
            }
            placed = Some(valid[rng.gen_range(0..valid.len())]);
        }
        let start = placed.unwrap();
        covered[start..start + len].iter_mut().for_each(|c| *c = true);
        spans.push(start..start + len);
        total += len;
    }
    spans.sort_by_key(|s| s.start);
    (spans, insertions)
}

/// BART noising: sentence permutation then text infilling. The target is the
/// permuted, uncorrupted chunk; masked spans cover exactly
/// `floor(mask_rate * len)` tokens.
pub fn bart_noise(
    chunk: &TokenSeq,
    sentence_spans: &[std::ops::Range<usize>],
    cfg: &NoiseConfig,
    chunk_index: u32,
) -> Result<NoisedPair> {
    if chunk.len() < 2 {
        return Err(Error::Data("chunk too short".into()));
    }
    let seed = mix_seed(cfg.seed, chunk.doc_id, chunk_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let permuted = if cfg.permute_sentences {
        permute_sentences(&chunk.ids, sentence_spans, rng.gen())?
    } else {
        chunk.ids.clone()
    };

    let n = permuted.len();
    let budget = (cfg.mask_rate * n as f64).floor() as usize;
    let (spans, insertions) = sample_mask_spans(n, budget, cfg.span_lambda, &mut rng);

    Ok(build_bart_pair(chunk, chunk_index, seed, permuted, spans, insertions))
}

/// Same as [`bart_noise`] but with the mask id supplied by the tokenizer.
pub fn bart_noise_with_mask(
    chunk: &TokenSeq,
    sentence_spans: &[std::ops::Range<usize>],
    cfg: &NoiseConfig,
    chunk_index: u32,
    mask_id: u32,
) -> Result<NoisedPair> {
    let mut pair = bart_noise(chunk, sentence_spans, cfg, chunk_index)?;
    for id in pair.input_ids.iter_mut() {
        if *id == MASK_PLACEHOLDER {
            *id = mask_id;
        }
    }
    Ok(pair)
}

/// Mask slot filled in by the caller with the tokenizer's `<mask>` id.
pub const MASK_PLACEHOLDER: u32 = u32::MAX;

fn build_bart_pair(
    chunk: &TokenSeq,
    chunk_index: u32,
    seed: u64,
    permuted: Vec<u32>,
    spans: Vec<std::ops::Range<usize>>,
    mut insertions: Vec<usize>,
) -> NoisedPair {
    let mut input: Vec<u32> = Vec::with_capacity(permuted.len());
    let mut span_iter = spans.iter().peekable();
    let mut i = 0;
    insertions.sort_unstable();
    let mut ins_iter = insertions.iter().peekable();
    while i <= permuted.len() {
        while ins_iter.peek() == Some(&&i) {
            input.push(MASK_PLACEHOLDER);
            ins_iter.next();
        }
        if i == permuted.len() {
            break;
        }
        if let Some(span) = span_iter.peek() {
            if span.start == i {
                input.push(MASK_PLACEHOLDER);
                i = span.end;
                span_iter.next();
                continue;
            }
        }
        input.push(permuted[i]);
        i += 1;
    }
    NoisedPair {
        input_ids: input,
        target_ids: permuted,
        doc_id: chunk.doc_id,
        chunk_index,
        seed_used: seed,
    }
}

/// T5 span corruption: replaces `n_spans` non-adjacent spans with ascending
/// sentinels; the target lists the dropped spans between sentinels.
pub fn t5_span_corrupt(
    chunk: &TokenSeq,
    cfg: &NoiseConfig,
    chunk_index: u32,
    sentinel_ids: &[u32],
) -> Result<NoisedPair> {
    let n = chunk.len();
    if n < 2 {
        return Err(Error::Data("chunk too short".into()));
    }
    let seed = mix_seed(cfg.seed, chunk.doc_id, chunk_index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_noise = ((cfg.corruption_rate * n as f64).round() as usize).clamp(1, n - 1);
    let mut n_spans = ((n_noise as f64 / cfg.mean_span).round() as usize).max(1);
    // Non-adjacency requires a gap between consecutive spans.
    n_spans = n_spans.min(n_noise).min(n - n_noise + 1);
    if n_spans + 1 > sentinel_ids.len() {
        return Err(Error::Config(format!(
            "{n_spans} spans exceed the sentinel budget of {}; increase mean_span or shorten chunks",
            sentinel_ids.len() - 1
        )));
    }

    // Random composition of n_noise into n_spans positive lengths.
    let mut cuts: Vec<usize> = Vec::with_capacity(n_spans + 1);
    cuts.push(0);
    while cuts.len() < n_spans {
        let c = rng.gen_range(1..n_noise);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.push(n_noise);
    cuts.sort_unstable();
    let lengths: Vec<usize> = cuts.windows(2).map(|w| w[1] - w[0]).collect();

    // Gaps: first and last may be empty, interior gaps at least 1.
    let free = n - n_noise - (n_spans - 1);
    let mut gap_extra = vec![0usize; n_spans + 1];
    {
        // Stars and bars: distribute `free` among n_spans+1 gaps uniformly.
        let mut picks: Vec<usize> = (0..free).map(|_| rng.gen_range(0..gap_extra.len())).collect();
        picks.sort_unstable();
        for p in picks {
            gap_extra[p] += 1;
        }
    }

    let mut input = Vec::with_capacity(n);
    let mut target = Vec::new();
    let mut pos = 0usize;
    for (i, &len) in lengths.iter().enumerate() {
        let gap = gap_extra[i] + if i == 0 { 0 } else { 1 };
        input.extend_from_slice(&chunk.ids[pos..pos + gap]);
        pos += gap;
        input.push(sentinel_ids[i]);
        target.push(sentinel_ids[i]);
        target.extend_from_slice(&chunk.ids[pos..pos + len]);
        pos += len;
    }
    input.extend_from_slice(&chunk.ids[pos..]);
    target.push(sentinel_ids[lengths.len()]);

    Ok(NoisedPair {
        input_ids: input,
        target_ids: target,
        doc_id: chunk.doc_id,
        chunk_index,
        seed_used: seed,
    })
}

/// Splices target spans back into the input at sentinel positions; inverse
/// of [`t5_span_corrupt`].
pub fn t5_reconstruct(pair: &NoisedPair, sentinel_ids: &[u32]) -> Vec<u32> {
    let is_sentinel = |id: u32| sentinel_ids.contains(&id);
    // Split target into spans keyed by their leading sentinel.
    let mut spans: std::collections::HashMap<u32, Vec<u32>> = Default::default();
    let mut current: Option<u32> = None;
    for &id in &pair.target_ids {
        if is_sentinel(id) {
            current = Some(id);
            spans.entry(id).or_default();
        } else if let Some(s) = current {
            spans.get_mut(&s).unwrap().push(id);
        }
    }
    let mut out = Vec::new();
    for &id in &pair.input_ids {
        if is_sentinel(id) {
            out.extend_from_slice(&spans[&id]);
        } else {
            out.push(id);
        }
    }
    out
}
