//! Finite symbol alphabets with a fixed symbol order.
//!
//! Symbols are non-empty tokens without whitespace. The order in which
//! symbols are declared is significant: it fixes the iteration order of
//! every algorithm in the crate (canonical minimization, breadth-first
//! searches, counterexample tie-breaking), which keeps all outputs
//! deterministic.

use std::collections::HashMap;
use std::fmt;

use crate::error::AutomatonError;

/// A word is a sequence of symbol tokens.
pub type Word = Vec<String>;

/// An ordered finite set of symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    /// Builds an alphabet from the given symbols, keeping their order.
    ///
    /// Symbols must be non-empty, free of whitespace and commas (both are
    /// separators in the text formats), and pairwise distinct.
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(
        symbols: I,
    ) -> Result<Alphabet, AutomatonError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        let mut index = HashMap::new();
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(|c| c.is_whitespace() || c == ',') {
                return Err(AutomatonError::BadSymbol(s.clone()));
            }
            if index.insert(s.clone(), i).is_some() {
                return Err(AutomatonError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Alphabet { symbols, index })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Position of a symbol in the declaration order.
    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.symbols[i]
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }

    /// Maps a word of symbol tokens to symbol indices, rejecting unknown symbols.
    pub fn encode<S: AsRef<str>>(&self, word: &[S]) -> Result<Vec<usize>, AutomatonError> {
        word.iter()
            .map(|s| {
                self.index_of(s.as_ref())
                    .ok_or_else(|| AutomatonError::UnknownSymbol(s.as_ref().to_string()))
            })
            .collect()
    }

    /// Renders the alphabet as a comma-separated list (file header form).
    pub fn to_header(&self) -> String {
        self.symbols.join(",")
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_header())
    }
}

/// Renders a word for human-readable output: tokens joined by spaces,
/// `ε` for the empty word.
pub fn format_word<S: AsRef<str>>(word: &[S]) -> String {
    if word.is_empty() {
        "ε".to_string()
    } else {
        word.iter()
            .map(|s| s.as_ref())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Renders a word for machine-readable output: tokens joined by commas,
/// empty string for the empty word. Symbols never contain commas.
pub fn machine_word<S: AsRef<str>>(word: &[S]) -> String {
    word.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_symbols() {
        assert!(Alphabet::new(["a", "b"]).is_ok());
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new([""]).is_err());
        assert!(Alphabet::new(["a b"]).is_err());
        assert!(Alphabet::new(["a,b"]).is_err());
    }

    #[test]
    fn encode_respects_order() {
        let al = Alphabet::new(["c1", "c2", "r"]).unwrap();
        assert_eq!(al.encode(&["r", "c1"]).unwrap(), vec![2, 0]);
        assert!(al.encode(&["x"]).is_err());
    }

    #[test]
    fn word_rendering() {
        assert_eq!(format_word::<&str>(&[]), "ε");
        assert_eq!(format_word(&["c1", "a", "r"]), "c1 a r");
        assert_eq!(machine_word(&["c1", "a"]), "c1,a");
        assert_eq!(machine_word::<&str>(&[]), "");
    }
}
