//! SARI simplification metric: add/keep/delete n-gram components against
//! source and references, averaged over n=1..4. Component conventions follow
//! the original reference implementation (keep/delete default precision 1 on
//! empty sets; the delete component contributes precision only).

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

use super::{count_ngrams, tokenize};

const MAX_N: usize = 4;

type Counter = BTreeMap<Vec<String>, f64>;

fn scaled(counts: &BTreeMap<Vec<String>, u64>, factor: f64) -> Counter {
    counts
        .iter()
        .map(|(g, &c)| (g.clone(), c as f64 * factor))
        .collect()
}

fn intersect(a: &Counter, b: &Counter) -> Counter {
    a.iter()
        .filter_map(|(g, &ca)| {
            let cb = b.get(g).copied().unwrap_or(0.0);
            let m = ca.min(cb);
            (m > 0.0).then(|| (g.clone(), m))
        })
        .collect()
}

fn subtract(a: &Counter, b: &Counter) -> Counter {
    a.iter()
        .filter_map(|(g, &ca)| {
            let d = ca - b.get(g).copied().unwrap_or(0.0);
            (d > 0.0).then(|| (g.clone(), d))
        })
        .collect()
}

fn f1(p: f64, r: f64) -> f64 {
    if p > 0.0 || r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

fn sari_ngram(
    src: &BTreeMap<Vec<String>, u64>,
    cand: &BTreeMap<Vec<String>, u64>,
    refs: &[BTreeMap<Vec<String>, u64>],
) -> f64 {
    let num_refs = refs.len() as f64;
    let src_rep = scaled(src, num_refs);
    let cand_rep = scaled(cand, num_refs);
    let mut ref_all: Counter = Counter::new();
    for r in refs {
        for (g, &c) in r {
            *ref_all.entry(g.clone()).or_insert(0.0) += c as f64;
        }
    }

    // KEEP
    let keep = intersect(&src_rep, &cand_rep);
    let keep_good = intersect(&keep, &ref_all);
    let keep_all = intersect(&src_rep, &ref_all);
    let keep_p = if keep.is_empty() {
        1.0
    } else {
        keep.iter()
            .map(|(g, &c)| keep_good.get(g).copied().unwrap_or(0.0) / c)
            .sum::<f64>()
            / keep.len() as f64
    };
    let keep_r = if keep_all.is_empty() {
        1.0
    } else {
        keep_good.values().sum::<f64>() / keep_all.values().sum::<f64>()
    };
    let keep_score = f1(keep_p, keep_r);

    // DELETE (precision only)
    let del = subtract(&src_rep, &cand_rep);
    let del_good = subtract(&del, &ref_all);
    let del_p = if del.is_empty() {
        1.0
    } else {
        del.iter()
            .map(|(g, &c)| del_good.get(g).copied().unwrap_or(0.0) / c)
            .sum::<f64>()
            / del.len() as f64
    };

    // ADD (set semantics)
    let cand_set: BTreeSet<&Vec<String>> = cand.keys().collect();
    let src_set: BTreeSet<&Vec<String>> = src.keys().collect();
    let ref_set: BTreeSet<&Vec<String>> = ref_all.keys().collect();
    let added: BTreeSet<&Vec<String>> = cand_set.difference(&src_set).copied().collect();
    let add_good = added.iter().filter(|g| ref_set.contains(**g)).count() as f64;
    let add_all: BTreeSet<&Vec<String>> = ref_set.difference(&src_set).copied().collect();
    let add_p = if added.is_empty() {
        1.0
    } else {
        add_good / added.len() as f64
    };
    let add_r = if add_all.is_empty() {
        1.0
    } else {
        add_good / add_all.len() as f64
    };
    let add_score = f1(add_p, add_r);

    (keep_score + del_p + add_score) / 3.0
}

fn sari_sentence(source: &str, candidate: &str, references: &[&str]) -> f64 {
    let src = tokenize(source);
    let cand = tokenize(candidate);
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let mut total = 0.0;
    for n in 1..=MAX_N {
        let src_counts = count_ngrams(&src, n);
        let cand_counts = count_ngrams(&cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| count_ngrams(r, n)).collect();
        total += sari_ngram(&src_counts, &cand_counts, &ref_counts);
    }
    total / MAX_N as f64
}

/// Corpus SARI in [0,100]: mean of per-example SARI over aligned
/// (source, candidate, references) triples.
pub fn sari(
    sources: &[&str],
    candidates: &[&str],
    reference_sets: &[Vec<&str>],
) -> Result<f64> {
    if sources.len() != candidates.len() || sources.len() != reference_sets.len() {
        return Err(Error::Data(format!(
            "misaligned SARI inputs: {} sources, {} candidates, {} reference sets",
            sources.len(),
            candidates.len(),
            reference_sets.len()
        )));
    }
    if sources.is_empty() {
        return Err(Error::Data("SARI needs at least one triple".into()));
    }
    let mut total = 0.0;
    for ((src, cand), refs) in sources.iter().zip(candidates).zip(reference_sets) {
        if refs.is_empty() {
            return Err(Error::Data("empty reference set".into()));
        }
        total += sari_sentence(src, cand, refs);
    }
    Ok(100.0 * total / sources.len() as f64)
}
