//! Corpus BLEU: clipped n-gram precisions (n=1..4), geometric mean, brevity
//! penalty. No smoothing by default; add-one smoothing behind a flag.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{count_ngrams, tokenize};

const MAX_N: usize = 4;

/// Corpus-aggregated BLEU in [0,100].
pub fn corpus_bleu(
    candidates: &[&str],
    reference_sets: &[Vec<&str>],
    smooth: bool,
) -> Result<f64> {
    if candidates.len() != reference_sets.len() || candidates.is_empty() {
        return Err(Error::Data(format!(
            "need equal nonzero candidate/reference counts, got {}/{}",
            candidates.len(),
            reference_sets.len()
        )));
    }

    let mut matched = [0u64; MAX_N];
    let mut total = [0u64; MAX_N];
    let mut cand_len = 0u64;
    let mut ref_len = 0u64;

    for (cand_text, refs) in candidates.iter().zip(reference_sets) {
        if refs.is_empty() {
            return Err(Error::Data("empty reference set".into()));
        }
        let cand = tokenize(cand_text);
        let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        cand_len += cand.len() as u64;
        // Closest reference length; ties toward the shorter.
        ref_len += ref_tokens
            .iter()
            .map(|r| r.len() as u64)
            .min_by_key(|&l| {
                let diff = (l as i64 - cand.len() as i64).abs();
                (diff, l)
            })
            .unwrap();

        for n in 1..=MAX_N {
            let cand_counts = count_ngrams(&cand, n);
            // Per-gram max over references (clipping bound).
            let mut max_ref: BTreeMap<&Vec<String>, u64> = BTreeMap::new();
            for r in &ref_tokens {
                for (g, c) in count_ngrams(r, n) {
                    let key = cand_counts.get_key_value(&g).map(|(k, _)| k);
                    if let Some(k) = key {
                        let entry = max_ref.entry(k).or_insert(0);
                        *entry = (*entry).max(c);
                    }
                }
            }
            for (g, c) in &cand_counts {
                total[n - 1] += c;
                matched[n - 1] += (*c).min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
    }

    let mut log_sum = 0.0;
    for n in 0..MAX_N {
        let (m, t) = if smooth {
            (matched[n] + 1, total[n] + 1)
        } else {
            (matched[n], total[n])
        };
        if m == 0 || t == 0 {
            return Ok(0.0);
        }
        log_sum += (m as f64 / t as f64).ln();
    }
    let precision_mean = (log_sum / MAX_N as f64).exp();
    let bp = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len.max(1) as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * bp * precision_mean)
}
