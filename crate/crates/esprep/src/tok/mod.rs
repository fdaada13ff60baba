//! Subword tokenizers: BPE and unigram LM, sentencepiece-style.
//!
//! Both models pre-segment on whitespace and prefix each word with the
//! `▁` marker. 256 byte-fallback pieces guarantee every string is encodable.

pub mod bpe;
pub mod unigram;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WORD_MARKER: char = '▁';
pub const NUM_BYTE_PIECES: usize = 256;
pub const NUM_SENTINELS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Bpe,
    Unigram,
}

/// Special-token profile: BART-style models carry `<mask>`, T5-style models
/// carry the 100 `<extra_id_*>` sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecialProfile {
    Bart,
    T5,
}

impl SpecialProfile {
    /// Special piece strings in id order: pad=0, unk=1, bos=2, eos=3, then
    /// mask or sentinels.
    pub fn pieces(self) -> Vec<String> {
        let mut pieces: Vec<String> = ["<pad>", "<unk>", "<s>", "</s>"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        match self {
            SpecialProfile::Bart => pieces.push("<mask>".into()),
            SpecialProfile::T5 => {
                for i in 0..NUM_SENTINELS {
                    pieces.push(format!("<extra_id_{i}>"));
                }
            }
        }
        pieces
    }

    pub fn count(self) -> usize {
        self.pieces().len()
    }
}

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;

/// Token sequence with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
    pub doc_id: u64,
}

impl TokenSeq {
    pub fn new(ids: Vec<u32>, doc_id: u64) -> Self {
        TokenSeq { ids, doc_id }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A trained subword model.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub kind: TokenizerKind,
    pub profile: SpecialProfile,
    /// Full vocabulary in id order: specials, byte pieces, learned pieces.
    /// Scores are log-probabilities for unigram, negated merge-order ranks
    /// (0 for non-merged pieces) for BPE.
    pub vocab: Vec<(String, f64)>,
    /// Merge list in training order (BPE only).
    pub merges: Vec<(String, String)>,
    piece_to_id: HashMap<String, u32>,
    merge_rank: HashMap<(String, String), u32>,
    byte_base: u32,
    max_piece_chars: usize,
}

impl Tokenizer {
    pub(crate) fn assemble(
        kind: TokenizerKind,
        profile: SpecialProfile,
        learned: Vec<(String, f64)>,
        merges: Vec<(String, String)>,
    ) -> Tokenizer {
        let mut vocab: Vec<(String, f64)> =
            profile.pieces().into_iter().map(|p| (p, 0.0)).collect();
        let byte_base = vocab.len() as u32;
        for b in 0..NUM_BYTE_PIECES {
            vocab.push((format!("<0x{b:02X}>"), 0.0));
        }
        vocab.extend(learned);

        let piece_to_id = vocab
            .iter()
            .enumerate()
            .map(|(i, (p, _))| (p.clone(), i as u32))
            .collect();
        let merge_rank = merges
            .iter()
            .enumerate()
            .map(|(i, pair)| (pair.clone(), i as u32))
            .collect();
        let max_piece_chars = vocab
            .iter()
            .skip(byte_base as usize + NUM_BYTE_PIECES)
            .map(|(p, _)| p.chars().count())
            .max()
            .unwrap_or(1);
        Tokenizer {
            kind,
            profile,
            vocab,
            merges,
            piece_to_id,
            merge_rank,
            byte_base,
            max_piece_chars,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// (piece, score) table in id order.
    pub fn pieces(&self) -> &[(String, f64)] {
        &self.vocab
    }

    pub fn piece_id(&self, piece: &str) -> Option<u32> {
        self.piece_to_id.get(piece).copied()
    }

    pub fn mask_id(&self) -> Option<u32> {
        self.piece_id("<mask>")
    }

    pub fn sentinel_id(&self, i: usize) -> Option<u32> {
        self.piece_id(&format!("<extra_id_{i}>"))
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < self.byte_base
    }

    fn is_byte_piece(&self, id: u32) -> bool {
        (self.byte_base..self.byte_base + NUM_BYTE_PIECES as u32).contains(&id)
    }

    fn byte_fallback(&self, s: &str, out: &mut Vec<u32>) {
        for b in s.bytes() {
            out.push(self.byte_base + b as u32);
        }
    }

    /// Encodes one pre-marked word (marker already prefixed).
    fn encode_word(&self, word: &str, out: &mut Vec<u32>) {
        match self.kind {
            TokenizerKind::Bpe => bpe::encode_word(self, word, out),
            TokenizerKind::Unigram => unigram::encode_word(self, word, out),
        }
    }

    /// Whitespace pre-segmentation, marker prefixing, then per-word subword
    /// encoding. Never fails: unknown characters use byte fallback.
    pub fn encode(&self, text: &str, doc_id: u64) -> TokenSeq {
        let mut ids = Vec::new();
        for word in text.split_whitespace() {
            let marked = format!("{WORD_MARKER}{word}");
            self.encode_word(&marked, &mut ids);
        }
        TokenSeq::new(ids, doc_id)
    }

    /// Inverse of encode: concatenates pieces, resolves byte pieces, maps the
    /// word marker back to spaces and drops specials.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut text = String::new();
        let mut pending_bytes: Vec<u8> = Vec::new();
        let flush =
            |pending: &mut Vec<u8>, text: &mut String| {
                if !pending.is_empty() {
                    text.push_str(&String::from_utf8_lossy(pending));
                    pending.clear();
                }
            };
        for &id in ids {
            if id as usize >= self.vocab.len() {
                return Err(Error::Data(format!(
                    "token id {id} out of range (vocab size {})",
                    self.vocab.len()
                )));
            }
            if self.is_byte_piece(id) {
                pending_bytes.push((id - self.byte_base) as u8);
                continue;
            }
            flush(&mut pending_bytes, &mut text);
            if self.is_special(id) {
                continue;
            }
            text.push_str(&self.vocab[id as usize].0);
        }
        flush(&mut pending_bytes, &mut text);
        let text: String = text
            .chars()
            .map(|c| if c == WORD_MARKER { ' ' } else { c })
            .collect();
        Ok(text.trim_start_matches(' ').to_string())
    }

    /// Maximum piece length in chars; Viterbi search bound.
    pub(crate) fn max_piece_chars(&self) -> usize {
        self.max_piece_chars
    }

    /// Serializes as a JSON header line followed by a `piece<TAB>score` body.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            kind: TokenizerKind,
            profile: SpecialProfile,
            word_marker: char,
            merges: &'a [(String, String)],
        }
        let header = serde_json::to_string(&Header {
            kind: self.kind,
            profile: self.profile,
            word_marker: WORD_MARKER,
            merges: &self.merges,
        })
        .expect("header serializes");
        let mut body = String::new();
        for (piece, score) in &self.vocab {
            // 17 significant digits: f64 roundtrips exactly.
            writeln!(body, "{piece}\t{score:.17e}").unwrap();
        }
        std::fs::write(path.as_ref(), format!("{header}\n{body}"))
            .map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tokenizer> {
        #[derive(Deserialize)]
        struct Header {
            kind: TokenizerKind,
            profile: SpecialProfile,
            merges: Vec<(String, String)>,
        }
        let data =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        let mut lines = data.lines();
        let header: Header = serde_json::from_str(lines.next().unwrap_or_default())
            .map_err(|e| Error::Data(format!("bad tokenizer header: {e}")))?;
        let mut vocab = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let (piece, score) = line.split_once('\t').ok_or_else(|| {
                Error::Data(format!("tokenizer body line {}: missing tab", i + 2))
            })?;
            let score: f64 = score
                .parse()
                .map_err(|e| Error::Data(format!("tokenizer body line {}: {e}", i + 2)))?;
            vocab.push((piece.to_string(), score));
        }
        let specials = header.profile.count();
        let learned = vocab.split_off(specials + NUM_BYTE_PIECES);
        Ok(Tokenizer::assemble(
            header.kind,
            header.profile,
            learned,
            header.merges,
        ))
    }
}

/// Smallest legal vocab size for a given special profile and alphabet.
pub fn min_vocab_size(profile: SpecialProfile, alphabet_size: usize) -> usize {
    profile.count() + NUM_BYTE_PIECES + alphabet_size
}

#[cfg(test)]
mod tests {
    use super::*;

    fn char_tokenizer(text: &str) -> Tokenizer {
        bpe::train_bpe_min(text)
    }

    #[test]
    fn empty_text_encodes_to_empty() {
        let tok = char_tokenizer("abc abc");
        assert!(tok.encode("", 0).is_empty());
        assert_eq!(tok.decode(&[]).unwrap(), "");
    }

    #[test]
    fn out_of_range_id_is_error() {
        let tok = char_tokenizer("abc");
        assert!(tok.decode(&[u32::MAX]).is_err());
    }

    #[test]
    fn unknown_chars_use_byte_fallback_not_unk() {
        let tok = char_tokenizer("abc abc");
        let seq = tok.encode("日本語 xyz", 0);
        assert!(!seq.ids.contains(&UNK_ID));
        assert_eq!(tok.decode(&seq.ids).unwrap(), "日本語 xyz");
    }

    #[test]
    fn specials_have_fixed_low_ids() {
        let tok = char_tokenizer("abc");
        assert_eq!(tok.piece_id("<pad>"), Some(0));
        assert_eq!(tok.piece_id("<unk>"), Some(1));
        assert_eq!(tok.piece_id("<s>"), Some(2));
        assert_eq!(tok.piece_id("</s>"), Some(3));
        assert_eq!(tok.mask_id(), Some(4));
    }

    #[test]
    fn save_load_roundtrip_is_byte_identical() {
        let tok = char_tokenizer("hola mundo adiós");
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.model");
        let p2 = dir.path().join("b.model");
        tok.save(&p1).unwrap();
        let back = Tokenizer::load(&p1).unwrap();
        back.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(tok.encode("hola día", 0), back.encode("hola día", 0));
    }
}
