use unicode_normalization::UnicodeNormalization;

use super::PhonemizeError;

/// Marker written for a phrase-internal pause.
pub const PAUSE_MARK: char = ',';
/// Marker written for the end of a sentence.
pub const SENTENCE_MARK: char = '.';

const ZWNJ: char = '\u{200C}';
const TATWEEL: char = '\u{0640}';

/// Letters of the Sorani alphabet accepted by [`normalize_text`].
const SORANI_LETTERS: &str = "ئابپتجچحخدرڕزژسشعغفڤقکگلڵمنهەوۆیێ";

fn canonical_letter(c: char) -> Option<char> {
    match c {
        // Arabic code points commonly typed for Kurdish letters.
        'ك' => Some('ک'),
        'ي' | 'ى' => Some('ی'),
        'ھ' => Some('ه'),
        'ة' => Some('ە'),
        c if SORANI_LETTERS.contains(c) => Some(c),
        _ => None,
    }
}

fn punctuation_mark(c: char) -> Option<char> {
    match c {
        '،' | ',' => Some(PAUSE_MARK),
        '؟' | '?' | '.' | '!' => Some(SENTENCE_MARK),
        _ => None,
    }
}

/// Canonicalizes raw Central Kurdish text for [`super::phonemize`].
///
/// Applies NFC, maps Arabic letter variants to their Kurdish forms, drops
/// zero-width non-joiners and tatweel, turns sentence punctuation into
/// [`PAUSE_MARK`] / [`SENTENCE_MARK`], collapses whitespace runs to a single
/// space, and trims. Digits and any other character are rejected with the
/// code-point index of the first offender in the input.
pub fn normalize_text(text: &str) -> Result<String, PhonemizeError> {
    // Validate on the original code points so reported indices match input.
    for (index, ch) in text.chars().enumerate() {
        if ch.is_numeric() {
            return Err(PhonemizeError::Digit { ch, index });
        }
        if !(ch.is_whitespace()
            || ch == ZWNJ
            || ch == TATWEEL
            || canonical_letter(ch).is_some()
            || punctuation_mark(ch).is_some())
        {
            return Err(PhonemizeError::UnsupportedChar { ch, index });
        }
    }

    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.nfc() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if ch == ZWNJ || ch == TATWEEL {
            continue;
        }
        let mapped = punctuation_mark(ch)
            .or_else(|| canonical_letter(ch))
            .ok_or(PhonemizeError::UnsupportedChar { ch, index: 0 })?;
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(mapped);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stays_empty() {
        assert_eq!(normalize_text("").unwrap(), "");
        assert_eq!(normalize_text("   \t\n").unwrap(), "");
    }

    #[test]
    fn whitespace_collapses_and_trims() {
        assert_eq!(normalize_text("ب  ب").unwrap(), "ب ب");
        assert_eq!(normalize_text("  ب\t\nب  ").unwrap(), "ب ب");
    }

    #[test]
    fn digit_rejected_with_index() {
        assert_eq!(
            normalize_text("ب7"),
            Err(PhonemizeError::Digit { ch: '7', index: 1 })
        );
        // Arabic-Indic digits too.
        assert_eq!(
            normalize_text("با ٣"),
            Err(PhonemizeError::Digit { ch: '٣', index: 3 })
        );
    }

    #[test]
    fn latin_letters_rejected() {
        assert_eq!(
            normalize_text("بa"),
            Err(PhonemizeError::UnsupportedChar { ch: 'a', index: 1 })
        );
    }

    #[test]
    fn punctuation_becomes_markers() {
        assert_eq!(normalize_text("ب، ب؟").unwrap(), "ب, ب.");
        assert_eq!(normalize_text("ب! ب?").unwrap(), "ب. ب.");
        assert!(normalize_text("ب;").is_err());
    }

    #[test]
    fn arabic_variants_and_joiners() {
        assert_eq!(normalize_text("كي").unwrap(), "کی");
        assert_eq!(normalize_text("ب\u{200C}ـب").unwrap(), "بب");
    }
}
