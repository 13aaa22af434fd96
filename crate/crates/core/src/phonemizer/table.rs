use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::PhonemizeError;

/// Articulatory class of a phoneme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhonemeClass {
    VoicedStop,
    VoicedFricative,
    UnvoicedStop,
    UnvoicedFricative,
    Vibrant,
    Lateral,
    Nasal,
    Approximant,
    Vowel,
}

impl PhonemeClass {
    pub fn is_vowel(self) -> bool {
        self == PhonemeClass::Vowel
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PhonemeClass::VoicedStop => "voiced-stop",
            PhonemeClass::VoicedFricative => "voiced-fricative",
            PhonemeClass::UnvoicedStop => "unvoiced-stop",
            PhonemeClass::UnvoicedFricative => "unvoiced-fricative",
            PhonemeClass::Vibrant => "vibrant",
            PhonemeClass::Lateral => "lateral",
            PhonemeClass::Nasal => "nasal",
            PhonemeClass::Approximant => "approximant",
            PhonemeClass::Vowel => "vowel",
        }
    }
}

impl FromStr for PhonemeClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "voiced-stop" => PhonemeClass::VoicedStop,
            "voiced-fricative" => PhonemeClass::VoicedFricative,
            "unvoiced-stop" => PhonemeClass::UnvoicedStop,
            "unvoiced-fricative" => PhonemeClass::UnvoicedFricative,
            "vibrant" => PhonemeClass::Vibrant,
            "lateral" => PhonemeClass::Lateral,
            "nasal" => PhonemeClass::Nasal,
            "approximant" => PhonemeClass::Approximant,
            "vowel" => PhonemeClass::Vowel,
            _ => return Err(()),
        })
    }
}

impl fmt::Display for PhonemeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Tokens that do not come from a letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialToken {
    WordBoundary,
    Pause,
    SentenceEnd,
}

impl SpecialToken {
    pub const ALL: [SpecialToken; 3] = [
        SpecialToken::WordBoundary,
        SpecialToken::Pause,
        SpecialToken::SentenceEnd,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> &'static str {
        match self {
            SpecialToken::WordBoundary => "_",
            SpecialToken::Pause => ",",
            SpecialToken::SentenceEnd => ".",
        }
    }
}

/// How a grapheme reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    Fixed(usize),
    /// Consonant or vowel depending on neighbours.
    Contextual { consonant: usize, vowel: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableEntry {
    pub grapheme: String,
    pub reading: Reading,
    pub class: PhonemeClass,
}

/// Grapheme-to-phoneme inventory with a dense phoneme-ID space.
///
/// IDs `0..3` are the special tokens (word boundary, pause, sentence end);
/// phoneme symbols follow in order of first appearance in the table file.
#[derive(Debug, Clone)]
pub struct PhonemeTable {
    entries: Vec<TableEntry>,
    by_grapheme: HashMap<String, usize>,
    symbols: Vec<String>,
    classes: Vec<Option<PhonemeClass>>,
    max_grapheme_len: usize,
}

const DEFAULT_TABLE: &str = include_str!("../../data/sorani.tsv");

/// The digraph for the long vowel /u/, which must outrank its single letter.
pub const LONG_U: &str = "وو";

impl PhonemeTable {
    /// The bundled Central Kurdish inventory.
    pub fn sorani() -> Self {
        Self::parse(DEFAULT_TABLE).expect("bundled phoneme table is valid")
    }

    pub fn load(path: &Path) -> Result<Self, PhonemizeError> {
        let text = std::fs::read_to_string(path).map_err(|e| PhonemizeError::TableIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PhonemizeError> {
        let mut table = PhonemeTable {
            entries: Vec::new(),
            by_grapheme: HashMap::new(),
            symbols: SpecialToken::ALL.iter().map(|t| t.symbol().to_string()).collect(),
            classes: vec![None; SpecialToken::ALL.len()],
            max_grapheme_len: 1,
        };
        let bad = |line: usize, message: String| PhonemizeError::TableSyntax { line, message };

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim_end();
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(bad(line_no, format!("expected 3 tab-separated fields, got {}", fields.len())));
            }
            let (grapheme, phoneme, class) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
            let n_chars = grapheme.chars().count();
            if !(1..=2).contains(&n_chars) {
                return Err(bad(line_no, format!("grapheme `{grapheme}` must be 1 or 2 code points")));
            }
            if table.by_grapheme.contains_key(grapheme) {
                return Err(bad(line_no, format!("duplicate grapheme `{grapheme}`")));
            }
            let class: PhonemeClass = class
                .parse()
                .map_err(|_| bad(line_no, format!("unknown phoneme class `{class}`")))?;
            let reading = match phoneme.split_once('|') {
                Some((cons, vow)) => {
                    if class.is_vowel() {
                        return Err(bad(line_no, "a contextual reading needs a consonant class".into()));
                    }
                    Reading::Contextual {
                        consonant: table.intern(cons.trim(), class, line_no)?,
                        vowel: table.intern(vow.trim(), PhonemeClass::Vowel, line_no)?,
                    }
                }
                None => Reading::Fixed(table.intern(phoneme, class, line_no)?),
            };
            table.max_grapheme_len = table.max_grapheme_len.max(n_chars);
            table.by_grapheme.insert(grapheme.to_string(), table.entries.len());
            table.entries.push(TableEntry {
                grapheme: grapheme.to_string(),
                reading,
                class,
            });
        }

        if !table.by_grapheme.contains_key(LONG_U) {
            return Err(PhonemizeError::TableSyntax {
                line: 0,
                message: format!("table lacks the long-vowel digraph `{LONG_U}`"),
            });
        }
        Ok(table)
    }

    fn intern(&mut self, symbol: &str, class: PhonemeClass, line: usize) -> Result<usize, PhonemizeError> {
        if symbol.is_empty() {
            return Err(PhonemizeError::TableSyntax {
                line,
                message: "empty phoneme symbol".into(),
            });
        }
        if let Some(pos) = self.symbols.iter().position(|s| s == symbol) {
            if pos < SpecialToken::ALL.len() {
                return Err(PhonemizeError::TableSyntax {
                    line,
                    message: format!("symbol `{symbol}` is reserved for a special token"),
                });
            }
            return Ok(pos);
        }
        self.symbols.push(symbol.to_string());
        self.classes.push(Some(class));
        Ok(self.symbols.len() - 1)
    }

    /// Number of distinct IDs, special tokens included.
    pub fn vocab_size(&self) -> usize {
        self.symbols.len()
    }

    pub fn entries(&self) -> &[TableEntry] {
        &self.entries
    }

    pub fn entry(&self, grapheme: &str) -> Option<&TableEntry> {
        self.by_grapheme.get(grapheme).map(|&i| &self.entries[i])
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn id_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Class of a phoneme ID; `None` for special tokens and unknown IDs.
    pub fn class_of(&self, id: usize) -> Option<PhonemeClass> {
        self.classes.get(id).copied().flatten()
    }

    pub(crate) fn max_grapheme_len(&self) -> usize {
        self.max_grapheme_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_is_consistent() {
        let t = PhonemeTable::sorani();
        assert!(t.entry(LONG_U).is_some());
        assert_ne!(t.entry(LONG_U), t.entry("و"));
        assert_eq!(t.symbol(0), Some("_"));
        assert_eq!(t.id_of("b").and_then(|id| t.class_of(id)), Some(PhonemeClass::VoicedStop));
        let u = t.id_of("u").unwrap();
        assert_eq!(t.entry(LONG_U).unwrap().reading, Reading::Fixed(u));
        // Every symbol maps to one ID.
        for id in 0..t.vocab_size() {
            assert_eq!(t.id_of(t.symbol(id).unwrap()), Some(id));
        }
    }

    #[test]
    fn duplicate_grapheme_rejected() {
        let err = PhonemeTable::parse("ب\tb\tvoiced-stop\nب\tp\tunvoiced-stop\nوو\tu\tvowel\n").unwrap_err();
        assert!(matches!(err, PhonemizeError::TableSyntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn unknown_class_and_field_count_rejected() {
        assert!(matches!(
            PhonemeTable::parse("ب\tb\tplosive\n"),
            Err(PhonemizeError::TableSyntax { line: 1, .. })
        ));
        assert!(matches!(
            PhonemeTable::parse("ب b voiced-stop\n"),
            Err(PhonemizeError::TableSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn missing_long_vowel_digraph_rejected() {
        assert!(PhonemeTable::parse("ب\tb\tvoiced-stop\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let t = PhonemeTable::parse("# header\n\nوو\tu\tvowel # long\n").unwrap();
        assert_eq!(t.entries().len(), 1);
        assert_eq!(t.vocab_size(), 4);
    }
}
