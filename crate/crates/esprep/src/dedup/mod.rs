//! Exact and near-duplicate removal over a corpus.
//!
//! Exact mode hashes the normalized text with SHA-256; near mode uses MinHash
//! signatures with LSH banding and union-find merging. The survivor of every
//! cluster is the document with the lowest id.

pub mod minhash;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use minhash::{MinHashSignature, PermutationFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DedupMode {
    Exact,
    Near,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DedupConfig {
    pub shingle_words: usize,
    pub num_perms: usize,
    pub bands: usize,
    pub rows: usize,
    pub seed: u64,
    pub mode: DedupMode,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            shingle_words: 5,
            num_perms: 128,
            bands: 16,
            rows: 8,
            seed: 0,
            mode: DedupMode::Both,
        }
    }
}

impl DedupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bands * self.rows != self.num_perms {
            return Err(Error::Config(format!(
                "bands ({}) x rows ({}) must equal num_perms ({})",
                self.bands, self.rows, self.num_perms
            )));
        }
        Ok(())
    }

    /// LSH similarity threshold (1/bands)^(1/rows).
    pub fn threshold(&self) -> f64 {
        (1.0 / self.bands as f64).powf(1.0 / self.rows as f64)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DedupReport {
    pub clusters: Vec<BTreeSet<u64>>,
    pub kept: Vec<u64>,
    pub removed_count: u64,
    pub estimated_pairs_checked: u64,
}

/// NFKC, lowercase, whitespace collapsed to single spaces, trimmed.
pub fn normalize_for_hash(text: &str) -> String {
    text.nfkc()
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Deterministic: smaller index becomes the root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn report_from_clusters(cluster_map: BTreeMap<u64, BTreeSet<u64>>, pairs_checked: u64) -> DedupReport {
    let mut report = DedupReport {
        estimated_pairs_checked: pairs_checked,
        ..Default::default()
    };
    for (kept, members) in cluster_map {
        if members.len() > 1 {
            report.removed_count += members.len() as u64 - 1;
            report.kept.push(kept);
            report.clusters.push(members);
        }
    }
    report
}

/// Removes exact duplicates of the normalized text. Among equal documents the
/// lowest id survives; survivor order follows the input.
pub fn exact_dedup(docs: Vec<Document>) -> (Vec<Document>, DedupReport) {
    let hashes: Vec<[u8; 32]> = docs
        .par_iter()
        .map(|d| {
            let mut h = Sha256::new();
            h.update(normalize_for_hash(&d.text).as_bytes());
            h.finalize().into()
        })
        .collect();

    let mut min_id: HashMap<[u8; 32], u64> = HashMap::new();
    let mut members: HashMap<[u8; 32], BTreeSet<u64>> = HashMap::new();
    for (doc, hash) in docs.iter().zip(&hashes) {
        let entry = min_id.entry(*hash).or_insert(doc.id);
        *entry = (*entry).min(doc.id);
        members.entry(*hash).or_default().insert(doc.id);
    }

    let survivors: Vec<Document> = docs
        .into_iter()
        .zip(&hashes)
        .filter(|(doc, hash)| min_id[*hash] == doc.id)
        .map(|(doc, _)| doc)
        .collect();

    let cluster_map: BTreeMap<u64, BTreeSet<u64>> = members
        .into_values()
        .map(|set| (*set.iter().next().unwrap(), set))
        .collect();
    (survivors, report_from_clusters(cluster_map, 0))
}

/// MinHash signature of one document, or None when it has fewer than
/// `shingle_words` words after normalization (such documents bypass
/// near-dedup).
pub fn minhash_signature(
    doc: &Document,
    family: &PermutationFamily,
    cfg: &DedupConfig,
) -> Option<MinHashSignature> {
    let normalized = normalize_for_hash(&doc.text);
    let hashes = minhash::shingle_hashes(&normalized, cfg.shingle_words);
    if hashes.is_empty() {
        return None;
    }
    Some(family.signature(doc.id, &hashes))
}

/// LSH-based near-duplicate removal. Candidate pairs that agree on all rows
/// of some band are verified against the signature-equality threshold and
/// merged transitively.
pub fn near_dedup(docs: Vec<Document>, cfg: &DedupConfig) -> Result<(Vec<Document>, DedupReport)> {
    cfg.validate()?;
    let family = PermutationFamily::new(cfg.num_perms, cfg.seed);

    let sigs: Vec<Option<MinHashSignature>> = docs
        .par_iter()
        .map(|d| minhash_signature(d, &family, cfg))
        .collect();

    // Index of signature-bearing docs, in input order.
    let with_sig: Vec<usize> = (0..docs.len()).filter(|&i| sigs[i].is_some()).collect();

    let mut buckets: HashMap<(usize, u64), Vec<usize>> = HashMap::new();
    for &i in &with_sig {
        let sig = sigs[i].as_ref().unwrap();
        for band in 0..cfg.bands {
            let chunk = &sig.values[band * cfg.rows..(band + 1) * cfg.rows];
            let mut bytes = Vec::with_capacity(8 * cfg.rows);
            for v in chunk {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let key = (band, minhash::fnv1a(&bytes));
            buckets.entry(key).or_default().push(i);
        }
    }

    let threshold = cfg.threshold();
    let mut uf = UnionFind::new(docs.len());
    let mut seen_pairs: std::collections::HashSet<(usize, usize)> = Default::default();
    let mut pairs_checked = 0u64;
    for bucket in buckets.values() {
        for a in 0..bucket.len() {
            for b in a + 1..bucket.len() {
                let pair = (bucket[a].min(bucket[b]), bucket[a].max(bucket[b]));
                if !seen_pairs.insert(pair) {
                    continue;
                }
                pairs_checked += 1;
                let sa = sigs[pair.0].as_ref().unwrap();
                let sb = sigs[pair.1].as_ref().unwrap();
                if sa.equality_fraction(sb) >= threshold {
                    uf.union(pair.0, pair.1);
                }
            }
        }
    }

    let mut components: HashMap<usize, BTreeSet<u64>> = HashMap::new();
    for &i in &with_sig {
        components.entry(uf.find(i)).or_default().insert(docs[i].id);
    }
    let keep_ids: std::collections::HashSet<u64> = components
        .values()
        .map(|set| *set.iter().next().unwrap())
        .collect();

    let survivors: Vec<Document> = docs
        .into_iter()
        .enumerate()
        .filter(|(i, doc)| {
            let mut keep = sigs[*i].is_none() || keep_ids.contains(&doc.id);
            if sigs[*i].is_none() {
                keep = true;
            }
            keep
        })
        .map(|(i, mut doc)| {
            if sigs[i].is_none() {
                doc.meta.insert("dedup_bypass".into(), "short".into());
            }
            doc
        })
        .collect();

    let cluster_map: BTreeMap<u64, BTreeSet<u64>> = components
        .into_values()
        .map(|set| (*set.iter().next().unwrap(), set))
        .collect();
    Ok((survivors, report_from_clusters(cluster_map, pairs_checked)))
}

/// Runs the configured mode: exact, near, or exact followed by near.
pub fn dedup(docs: Vec<Document>, cfg: &DedupConfig) -> Result<(Vec<Document>, DedupReport)> {
    match cfg.mode {
        DedupMode::Exact => Ok(exact_dedup(docs)),
        DedupMode::Near => near_dedup(docs, cfg),
        DedupMode::Both => {
            let (docs, exact_report) = exact_dedup(docs);
            let (docs, mut near_report) = near_dedup(docs, cfg)?;
            near_report.removed_count += exact_report.removed_count;
            near_report.clusters.extend(exact_report.clusters);
            near_report.kept.extend(exact_report.kept);
            Ok((docs, near_report))
        }
    }
}
