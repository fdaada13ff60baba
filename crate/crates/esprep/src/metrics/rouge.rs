//! ROUGE-N and ROUGE-L with multi-reference max-F1 reduction.

use crate::error::{Error, Result};

use super::{count_ngrams, tokenize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecallF1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

use serde::{Deserialize, Serialize};

impl PrecisionRecallF1 {
    fn zero() -> Self {
        PrecisionRecallF1 {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        }
    }

    fn from_counts(overlap: u64, cand_total: u64, ref_total: u64) -> Self {
        if overlap == 0 || cand_total == 0 || ref_total == 0 {
            return PrecisionRecallF1::zero();
        }
        let precision = overlap as f64 / cand_total as f64;
        let recall = overlap as f64 / ref_total as f64;
        PrecisionRecallF1 {
            precision,
            recall,
            f1: 2.0 * precision * recall / (precision + recall),
        }
    }
}

fn rouge_n_single(cand: &[String], refr: &[String], n: usize) -> PrecisionRecallF1 {
    let cand_counts = count_ngrams(cand, n);
    let ref_counts = count_ngrams(refr, n);
    let overlap: u64 = cand_counts
        .iter()
        .map(|(g, c)| (*c).min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    let cand_total: u64 = cand_counts.values().sum();
    let ref_total: u64 = ref_counts.values().sum();
    PrecisionRecallF1::from_counts(overlap, cand_total, ref_total)
}

fn best_by_f1(scores: impl Iterator<Item = PrecisionRecallF1>) -> PrecisionRecallF1 {
    scores
        .max_by(|a, b| a.f1.total_cmp(&b.f1))
        .unwrap_or_else(PrecisionRecallF1::zero)
}

/// Clipped n-gram overlap; multi-reference reduction takes the best F1.
pub fn rouge_n(candidate: &str, references: &[&str], n: usize) -> Result<PrecisionRecallF1> {
    if references.is_empty() {
        return Err(Error::Data("rouge needs at least one reference".into()));
    }
    let cand = tokenize(candidate);
    Ok(best_by_f1(
        references
            .iter()
            .map(|r| rouge_n_single(&cand, &tokenize(r), n)),
    ))
}

pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            cur[j + 1] = if a[i] == b[j] {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence ROUGE.
pub fn rouge_l(candidate: &str, references: &[&str]) -> Result<PrecisionRecallF1> {
    if references.is_empty() {
        return Err(Error::Data("rouge needs at least one reference".into()));
    }
    let cand = tokenize(candidate);
    Ok(best_by_f1(references.iter().map(|r| {
        let refr = tokenize(r);
        let lcs = lcs_len(&cand, &refr) as u64;
        PrecisionRecallF1::from_counts(lcs, cand.len() as u64, refr.len() as u64)
    })))
}
