//! Exact-match METEOR: unigram alignment maximizing matches then minimizing
//! chunks, fragmentation penalty 0.5*(chunks/m)^3, Fmean = 10PR/(R+9P).

use std::collections::BTreeMap;

use super::tokenize;

/// Number of matched unigrams under multiset semantics.
fn match_count(cand: &[String], refr: &[String]) -> usize {
    let mut counts: BTreeMap<&String, i64> = BTreeMap::new();
    for t in refr {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut m = 0;
    for t in cand {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                m += 1;
            }
        }
    }
    m
}

/// Minimum chunk count over all maximum alignments. Branch and bound over
/// candidate positions; each matched token consumes one reference occurrence.
pub(crate) fn min_chunks(cand: &[String], refr: &[String], m: usize) -> usize {
    if m == 0 {
        return 0;
    }
    // Occurrence positions per reference token.
    let mut positions: BTreeMap<&String, Vec<usize>> = BTreeMap::new();
    for (i, t) in refr.iter().enumerate() {
        positions.entry(t).or_default().push(i);
    }
    // Remaining match capacity from each candidate suffix, for pruning.
    let mut best = m; // chunks never exceed matches

    struct Search<'a> {
        cand: &'a [String],
        positions: BTreeMap<&'a String, Vec<usize>>,
        used: Vec<bool>,
        m: usize,
    }

    impl<'a> Search<'a> {
        fn capacity(&self, from: usize) -> usize {
            // Upper bound on matches from cand[from..].
            let mut avail: BTreeMap<&String, usize> = BTreeMap::new();
            for (t, v) in &self.positions {
                let free = v.iter().filter(|&&p| !self.used[p]).count();
                avail.insert(t, free);
            }
            let mut cap = 0;
            for t in &self.cand[from..] {
                if let Some(c) = avail.get_mut(t) {
                    if *c > 0 {
                        *c -= 1;
                        cap += 1;
                    }
                }
            }
            cap
        }

        fn rec(
            &mut self,
            ci: usize,
            matched: usize,
            chunks: usize,
            prev_ref: Option<usize>,
            best: &mut usize,
        ) {
            if chunks >= *best {
                return; // cannot improve
            }
            if matched == self.m {
                *best = (*best).min(chunks);
                return;
            }
            if ci >= self.cand.len() || matched + self.capacity(ci) < self.m {
                return;
            }
            let token = &self.cand[ci];
            if let Some(options) = self.positions.get(token).cloned() {
                for p in options {
                    if self.used[p] {
                        continue;
                    }
                    let extends = p > 0 && prev_ref == Some(p - 1);
                    let new_chunks = if extends { chunks } else { chunks + 1 };
                    self.used[p] = true;
                    self.rec(ci + 1, matched + 1, new_chunks, Some(p), best);
                    self.used[p] = false;
                }
            }
            // Skipping cand[ci] is only legal if a maximum matching remains.
            self.rec(ci + 1, matched, chunks, prev_ref, best);
        }
    }

    let used = vec![false; refr.len()];
    let mut search = Search {
        cand,
        positions,
        used,
        m,
    };
    search.rec(0, 0, 0, None, &mut best);
    best
}

/// METEOR-lite score in [0,1]; single reference, exact matches only.
pub fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let m = match_count(&cand, &refr);
    if m == 0 {
        return 0.0;
    }
    let chunks = min_chunks(&cand, &refr, m);
    let p = m as f64 / cand.len() as f64;
    let r = m as f64 / refr.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_common_unigram_is_zero() {
        assert_eq!(meteor_lite("uno dos", "tres cuatro"), 0.0);
    }

    #[test]
    fn identity_closed_form() {
        // cand = ref with m tokens: one chunk, score = 1 - 0.5/m^3.
        for text in ["el gato come", "a b c d e"] {
            let m = tokenize(text).len() as f64;
            let expected = 1.0 - 0.5 / (m * m * m);
            assert!((meteor_lite(text, text) - expected).abs() < 1e-12, "{text}");
        }
    }

    #[test]
    fn swapped_bigram_scores_half() {
        // cand "b a" vs ref "a b": m=2, chunks=2, P=R=1.
        // Fmean = 1, penalty = 0.5 * 1 = 0.5.
        assert!((meteor_lite("b a", "a b") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chunk_minimization_prefers_contiguous_alignment() {
        // "a b" aligns contiguously into "x a b" -> 1 chunk.
        let cand = tokenize("a b");
        let refr = tokenize("x a b");
        assert_eq!(min_chunks(&cand, &refr, 2), 1);
    }

    #[test]
    fn repeated_tokens_pick_best_occurrences() {
        // cand "a b a", ref "a a b": best alignment matches all 3.
        let cand = tokenize("a b a");
        let refr = tokenize("a a b");
        assert_eq!(match_count(&cand, &refr), 3);
        let chunks = min_chunks(&cand, &refr, 3);
        assert!(chunks >= 2);
    }
}
