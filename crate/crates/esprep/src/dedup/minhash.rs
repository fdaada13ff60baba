//! MinHash signatures over word shingles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// FNV-1a 64-bit. Stable across platforms and runs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub doc_id: u64,
    pub values: Vec<u64>,
}

impl MinHashSignature {
    /// Fraction of components equal between two signatures; unbiased
    /// estimator of shingle-set Jaccard similarity.
    pub fn equality_fraction(&self, other: &MinHashSignature) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        let eq = self
            .values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a == b)
            .count();
        eq as f64 / self.values.len() as f64
    }
}

/// Family of `num_perms` hash functions derived from a seed.
#[derive(Debug, Clone)]
pub struct PermutationFamily {
    mults: Vec<u64>,
    adds: Vec<u64>,
}

impl PermutationFamily {
    pub fn new(num_perms: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mults = (0..num_perms).map(|_| rng.gen::<u64>() | 1).collect();
        let adds = (0..num_perms).map(|_| rng.gen::<u64>()).collect();
        PermutationFamily { mults, adds }
    }

    pub fn len(&self) -> usize {
        self.mults.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mults.is_empty()
    }

    #[inline]
    fn apply(&self, i: usize, base: u64) -> u64 {
        // Multiply-add over 2^64; bijective since the multiplier is odd.
        self.mults[i].wrapping_mul(base).wrapping_add(self.adds[i])
    }

    /// Signature over the given shingle base hashes.
    pub fn signature(&self, doc_id: u64, shingle_hashes: &[u64]) -> MinHashSignature {
        let mut values = vec![u64::MAX; self.len()];
        for &h in shingle_hashes {
            for i in 0..self.len() {
                let v = self.apply(i, h);
                if v < values[i] {
                    values[i] = v;
                }
            }
        }
        MinHashSignature { doc_id, values }
    }
}

/// Word shingles of the normalized text, hashed with FNV-1a.
pub fn shingle_hashes(normalized: &str, shingle_words: usize) -> Vec<u64> {
    let words: Vec<&str> = normalized.split(' ').filter(|w| !w.is_empty()).collect();
    if words.len() < shingle_words {
        return Vec::new();
    }
    (0..=words.len() - shingle_words)
        .map(|i| fnv1a(words[i..i + shingle_words].join(" ").as_bytes()))
        .collect()
}

/// Exact shingle sets, for Jaccard oracle computations.
pub fn shingle_set(normalized: &str, shingle_words: usize) -> std::collections::HashSet<u64> {
    shingle_hashes(normalized, shingle_words).into_iter().collect()
}

/// Binary signature file: magic "MHSIG1", then little-endian u64 doc count,
/// u32 num_perms, then per doc a u64 id followed by num_perms u64 values.
pub fn write_signatures(
    sigs: &[MinHashSignature],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let num_perms = sigs.first().map(|s| s.values.len()).unwrap_or(0) as u32;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let write = |out: &mut std::io::BufWriter<std::fs::File>, bytes: &[u8]| {
        out.write_all(bytes).map_err(|e| Error::io(path, e))
    };
    write(&mut out, b"MHSIG1")?;
    write(&mut out, &(sigs.len() as u64).to_le_bytes())?;
    write(&mut out, &num_perms.to_le_bytes())?;
    for sig in sigs {
        write(&mut out, &sig.doc_id.to_le_bytes())?;
        for &v in &sig.values {
            write(&mut out, &v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_signatures(path: impl AsRef<std::path::Path>) -> Result<Vec<MinHashSignature>> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Data(format!("{}: {msg}", path.display()));
    if data.len() < 18 || &data[..6] != b"MHSIG1" {
        return Err(bad("not a signature file"));
    }
    let count = u64::from_le_bytes(data[6..14].try_into().unwrap()) as usize;
    let num_perms = u32::from_le_bytes(data[14..18].try_into().unwrap()) as usize;
    let mut off = 18;
    let mut sigs = Vec::with_capacity(count);
    for _ in 0..count {
        if data.len() < off + 8 * (1 + num_perms) {
            return Err(bad("truncated signature file"));
        }
        let doc_id = u64::from_le_bytes(data[off..off + 8].try_into().unwrap());
        off += 8;
        let values = (0..num_perms)
            .map(|i| u64::from_le_bytes(data[off + 8 * i..off + 8 * (i + 1)].try_into().unwrap()))
            .collect();
        off += 8 * num_perms;
        sigs.push(MinHashSignature { doc_id, values });
    }
    Ok(sigs)
}
