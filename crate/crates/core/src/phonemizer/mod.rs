//! Central Kurdish (Sorani) text to phoneme IDs.
//!
//! Text goes through [`normalize_text`] and then [`phonemize`], which tokenizes
//! by longest grapheme match against a [`PhonemeTable`] and resolves the
//! consonant/vowel reading of `و` and `ی` from their neighbours:
//!
//! * next to a vowel letter, the consonant reading (/w/, /j/);
//! * otherwise after a consonant (between two consonants, or word-final),
//!   the vowel reading (/ʊ/, /i/);
//! * a letter standing alone as a word takes the vowel reading;
//! * anything else (word-initial before a consonant) is a consonant.
//!
//! Ambiguous letters count as consonants when they are the neighbour.

mod normalize;
mod table;

pub use normalize::{normalize_text, PAUSE_MARK, SENTENCE_MARK};
pub use table::{PhonemeClass, PhonemeTable, Reading, SpecialToken, TableEntry, LONG_U};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PhonemizeError {
    #[error("digit `{ch}` at index {index}: number expansion is not supported")]
    Digit { ch: char, index: usize },
    #[error("unsupported character `{ch}` (U+{:04X}) at index {index}", *ch as u32)]
    UnsupportedChar { ch: char, index: usize },
    #[error("grapheme `{grapheme}` at index {index} is not in the phoneme table")]
    UnknownGrapheme { grapheme: String, index: usize },
    #[error("phoneme table line {line}: {message}")]
    TableSyntax { line: usize, message: String },
    #[error("cannot read phoneme table {path}: {message}")]
    TableIo { path: String, message: String },
    #[error("phoneme id {id} at position {position} is not in the table")]
    UnknownId { id: usize, position: usize },
}

/// A sequence of phoneme IDs from one [`PhonemeTable`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhonemeSeq {
    ids: Vec<usize>,
}

impl PhonemeSeq {
    /// Wraps IDs after checking them against `table` and the no-double-
    /// boundary rule.
    pub fn new(ids: Vec<usize>, table: &PhonemeTable) -> Result<Self, PhonemizeError> {
        for (position, &id) in ids.iter().enumerate() {
            if id >= table.vocab_size() {
                return Err(PhonemizeError::UnknownId { id, position });
            }
        }
        let boundary = SpecialToken::WordBoundary.id();
        if let Some(position) = ids.windows(2).position(|w| w[0] == boundary && w[1] == boundary) {
            return Err(PhonemizeError::UnknownId {
                id: boundary,
                position: position + 1,
            });
        }
        Ok(Self { ids })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn symbols<'t>(&self, table: &'t PhonemeTable) -> Vec<&'t str> {
        self.ids.iter().map(|&id| table.symbol(id).unwrap_or("?")).collect()
    }
}

#[derive(Debug, Clone, Copy)]
enum Token<'t> {
    Special(SpecialToken),
    Letter(&'t TableEntry),
}

impl Token<'_> {
    fn is_vowel(&self) -> bool {
        matches!(self, Token::Letter(e) if matches!(e.reading, Reading::Fixed(_)) && e.class.is_vowel())
    }

    fn is_consonant(&self) -> bool {
        matches!(self, Token::Letter(_)) && !self.is_vowel()
    }
}

fn tokenize<'t>(text: &str, table: &'t PhonemeTable) -> Result<Vec<Token<'t>>, PhonemizeError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::with_capacity(chars.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let special = if c.is_whitespace() {
            Some(SpecialToken::WordBoundary)
        } else if c == PAUSE_MARK {
            Some(SpecialToken::Pause)
        } else if c == SENTENCE_MARK {
            Some(SpecialToken::SentenceEnd)
        } else {
            None
        };
        if let Some(s) = special {
            tokens.push(Token::Special(s));
            i += 1;
            continue;
        }
        let longest = table.max_grapheme_len().min(chars.len() - i);
        let matched = (1..=longest).rev().find_map(|n| {
            let g: String = chars[i..i + n].iter().collect();
            table.entry(&g).map(|e| (e, n))
        });
        match matched {
            Some((entry, n)) => {
                tokens.push(Token::Letter(entry));
                i += n;
            }
            None => {
                return Err(PhonemizeError::UnknownGrapheme {
                    grapheme: c.to_string(),
                    index: i,
                })
            }
        }
    }
    Ok(tokens)
}

/// Converts normalized text to phoneme IDs.
pub fn phonemize(text: &str, table: &PhonemeTable) -> Result<PhonemeSeq, PhonemizeError> {
    let tokens = tokenize(text, table)?;
    let boundary = SpecialToken::WordBoundary.id();
    let mut ids: Vec<usize> = Vec::with_capacity(tokens.len());

    for (k, tok) in tokens.iter().enumerate() {
        match *tok {
            Token::Special(SpecialToken::WordBoundary) => {
                if ids.last().is_some_and(|&last| last != boundary) {
                    ids.push(boundary);
                }
            }
            Token::Special(s) => ids.push(s.id()),
            Token::Letter(entry) => ids.push(match entry.reading {
                Reading::Fixed(id) => id,
                Reading::Contextual { consonant, vowel } => {
                    let prev = k.checked_sub(1).map(|p| tokens[p]);
                    let next = tokens.get(k + 1).copied();
                    let near_vowel = prev.is_some_and(|t| t.is_vowel()) || next.is_some_and(|t| t.is_vowel());
                    let after_consonant = prev.is_some_and(|t| t.is_consonant());
                    let alone = !prev.is_some_and(|t| matches!(t, Token::Letter(_)))
                        && !next.is_some_and(|t| matches!(t, Token::Letter(_)));
                    if !near_vowel && (after_consonant || alone) {
                        vowel
                    } else {
                        consonant
                    }
                }
            }),
        }
    }
    if ids.last() == Some(&boundary) {
        ids.pop();
    }
    Ok(PhonemeSeq { ids })
}
