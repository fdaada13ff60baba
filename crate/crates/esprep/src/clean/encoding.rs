//! Encoding repair: single-pass mojibake reversal, NFKC normalization and
//! control-character stripping.

use unicode_normalization::UnicodeNormalization;

/// Windows-1252 mappings for the 0x80..0x9F block (None = undefined byte).
const CP1252_HIGH: [Option<char>; 32] = [
    Some('\u{20AC}'), // 0x80 €
    None,
    Some('\u{201A}'),
    Some('\u{0192}'),
    Some('\u{201E}'),
    Some('\u{2026}'),
    Some('\u{2020}'),
    Some('\u{2021}'),
    Some('\u{02C6}'),
    Some('\u{2030}'),
    Some('\u{0160}'),
    Some('\u{2039}'),
    Some('\u{0152}'),
    None,
    Some('\u{017D}'),
    None,
    None,
    Some('\u{2018}'),
    Some('\u{2019}'),
    Some('\u{201C}'),
    Some('\u{201D}'),
    Some('\u{2022}'),
    Some('\u{2013}'),
    Some('\u{2014}'),
    Some('\u{02DC}'),
    Some('\u{2122}'),
    Some('\u{0161}'),
    Some('\u{203A}'),
    Some('\u{0153}'),
    None,
    Some('\u{017E}'),
    Some('\u{0178}'),
];

/// Maps a char back to the byte it came from under a Latin-1/Windows-1252
/// mis-decoding, if any.
fn char_to_byte(c: char) -> Option<u8> {
    let cp = c as u32;
    if cp <= 0xFF {
        return Some(cp as u8);
    }
    CP1252_HIGH
        .iter()
        .position(|&m| m == Some(c))
        .map(|i| (0x80 + i) as u8)
}

fn count_continuation_range(s: &str) -> usize {
    s.chars()
        .filter(|&c| ('\u{80}'..='\u{BF}').contains(&c))
        .count()
}

/// Attempts to undo a single UTF-8-read-as-Latin-1/Windows-1252 mis-decoding.
/// The repair is kept only if it decodes cleanly and strictly reduces the
/// number of characters in U+0080..U+00BF.
fn repair_mojibake(text: &str) -> Option<String> {
    let bytes: Vec<u8> = text.chars().map(char_to_byte).collect::<Option<_>>()?;
    let repaired = String::from_utf8(bytes).ok()?;
    if repaired.contains('\u{FFFD}') {
        return None;
    }
    if count_continuation_range(&repaired) < count_continuation_range(text) {
        Some(repaired)
    } else {
        None
    }
}

fn is_stripped_control(c: char) -> bool {
    let cp = c as u32;
    let c0 = cp < 0x20 && c != '\n' && c != '\t';
    let c1 = (0x7F..=0x9F).contains(&cp);
    c0 || c1
}

/// Repairs mojibake, applies NFKC, strips C0/C1 controls (keeping `\n`, `\t`).
/// Idempotent.
pub fn fix_encoding(text: &str) -> String {
    // ASCII fast path: NFKC- and mojibake-stable, at most controls to strip.
    if text.is_ascii() {
        if text.bytes().any(|b| (b < 0x20 && b != b'\n' && b != b'\t') || b == 0x7F) {
            return text.chars().filter(|&c| !is_stripped_control(c)).collect();
        }
        return text.to_string();
    }
    let repaired = repair_mojibake(text);
    let base = repaired.as_deref().unwrap_or(text);
    base.nfkc().filter(|&c| !is_stripped_control(c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repairs_utf8_as_latin1() {
        assert_eq!(fix_encoding("CafÃ©"), "Café");
    }

    #[test]
    fn repairs_cp1252_euro() {
        // "€" (U+20AC) encodes as E2 82 AC; read as cp1252 gives "â‚¬".
        assert_eq!(fix_encoding("â\u{201A}¬"), "€");
    }

    #[test]
    fn nfkc_ligature() {
        assert_eq!(fix_encoding("ﬁn"), "fin");
    }

    #[test]
    fn nfkc_fullwidth_digits() {
        assert_eq!(fix_encoding("１２３"), "123");
    }

    #[test]
    fn clean_text_is_a_fixed_point() {
        assert_eq!(fix_encoding("Café"), "Café");
    }

    #[test]
    fn strips_controls_but_keeps_newline_and_tab() {
        assert_eq!(fix_encoding("a\u{0007}b\nc\td\r"), "ab\nc\td");
    }

    #[test]
    fn idempotent_on_mixed_samples() {
        for s in [
            "CafÃ©",
            "niÃ±o y seÃ±ora",
            "ﬁchero ２４",
            "plain ascii",
            "© 2020",
            "ñandú – España",
        ] {
            let once = fix_encoding(s);
            assert_eq!(fix_encoding(&once), once, "not idempotent on {s:?}");
        }
    }
}
