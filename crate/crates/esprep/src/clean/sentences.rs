//! Sentence segmentation with an abbreviation guard.
//!
//! Boundaries occur after sentence-final punctuation (`. ! ? …`) followed by
//! whitespace, unless the word before a period is a known abbreviation.

use std::collections::HashSet;

/// Default Spanish abbreviation list, matched case-insensitively without the
/// trailing period.
pub const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "sr", "sra", "srta", "dr", "dra", "d", "dña", "ud", "uds", "vd", "vds", "etc", "núm", "no",
    "art", "pág", "págs", "tel", "av", "avda", "gral", "cap", "dept", "depto", "fig", "p",
    "pp", "ej", "máx", "mín", "aprox", "vol", "ed", "st", "mr", "mrs", "ms", "prof",
];

#[derive(Debug, Clone)]
pub struct SentenceSegmenter {
    abbreviations: HashSet<String>,
}

impl Default for SentenceSegmenter {
    fn default() -> Self {
        SentenceSegmenter {
            abbreviations: DEFAULT_ABBREVIATIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '…')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '»' | '”' | '’')
}

impl SentenceSegmenter {
    pub fn new(abbreviations: impl IntoIterator<Item = String>) -> Self {
        SentenceSegmenter {
            abbreviations: abbreviations
                .into_iter()
                .map(|s| s.trim_end_matches('.').to_lowercase())
                .collect(),
        }
    }

    fn is_abbreviation(&self, word: &str) -> bool {
        self.abbreviations.contains(&word.to_lowercase())
    }

    /// Splits `text` into sentences. Text without terminal punctuation comes
    /// back as a single sentence; empty input yields no sentences.
    pub fn segment(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut sentences = Vec::new();
        let mut current = String::new();
        let mut i = 0;

        while i < chars.len() {
            let c = chars[i];
            current.push(c);
            if is_terminal(c) {
                // Swallow a run of terminals and any closing quotes/brackets.
                let mut j = i + 1;
                while j < chars.len() && (is_terminal(chars[j]) || is_closer(chars[j])) {
                    current.push(chars[j]);
                    j += 1;
                }
                let followed_by_space = j >= chars.len() || chars[j].is_whitespace();
                let guard = c == '.' && self.is_abbreviation(&last_word(&chars[..i]));
                if followed_by_space && !guard {
                    let s = normalize_ws(&current);
                    if !s.is_empty() {
                        sentences.push(s);
                    }
                    current.clear();
                }
                i = j;
            } else {
                i += 1;
            }
        }
        let tail = normalize_ws(&current);
        if !tail.is_empty() {
            sentences.push(tail);
        }
        sentences
    }
}

/// Last run of letters before position `end` (the word preceding a period).
fn last_word(chars: &[char]) -> String {
    chars
        .iter()
        .rev()
        .take_while(|c| c.is_alphabetic())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect()
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Segments with the default Spanish abbreviation list.
pub fn segment_sentences(text: &str) -> Vec<String> {
    static DEFAULT: std::sync::OnceLock<SentenceSegmenter> = std::sync::OnceLock::new();
    DEFAULT.get_or_init(SentenceSegmenter::default).segment(text)
}
