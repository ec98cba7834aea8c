//! Offset-preserving tokenizers.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A token with code-point offsets into its source text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub start: usize,
    pub stop: usize,
    pub text: String,
}

impl Token {
    pub fn new(start: usize, stop: usize, text: impl Into<String>) -> Self {
        Self {
            start,
            stop,
            text: text.into(),
        }
    }
}

/// Registered tokenizers. `WordPunct` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tokenizer {
    #[default]
    WordPunct,
    Whitespace,
}

impl Tokenizer {
    pub const NAMES: [&'static str; 2] = ["wordpunct", "whitespace"];

    pub fn name(self) -> &'static str {
        match self {
            Tokenizer::WordPunct => "wordpunct",
            Tokenizer::Whitespace => "whitespace",
        }
    }

    pub fn tokenize(self, text: &str) -> Vec<Token> {
        match self {
            Tokenizer::WordPunct => tokenize_wordpunct(text),
            Tokenizer::Whitespace => tokenize_whitespace(text),
        }
    }
}

impl fmt::Display for Tokenizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tokenizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        get_tokenizer(s)
    }
}

pub fn get_tokenizer(name: &str) -> Result<Tokenizer> {
    match name {
        "wordpunct" => Ok(Tokenizer::WordPunct),
        "whitespace" => Ok(Tokenizer::Whitespace),
        other => Err(Error::UnknownTokenizer(other.to_string())),
    }
}

fn wordpunct_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(r"[\p{Alphabetic}\p{N}_]+|[^\p{Alphabetic}\p{N}_\s]+").expect("static pattern")
    })
}

fn whitespace_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| Regex::new(r"\S+").expect("static pattern"))
}

/// Maximal runs of word characters (alphabetic or numeric characters and
/// underscore) or of characters that are neither word characters nor
/// whitespace.
pub fn tokenize_wordpunct(text: &str) -> Vec<Token> {
    tokens_from_matches(text, wordpunct_pattern())
}

/// Maximal runs of non-whitespace.
pub fn tokenize_whitespace(text: &str) -> Vec<Token> {
    tokens_from_matches(text, whitespace_pattern())
}

fn tokens_from_matches(text: &str, pattern: &Regex) -> Vec<Token> {
    let mut tokens = Vec::new();
    // chars counted so far and the byte offset they end at
    let mut chars = 0usize;
    let mut byte = 0usize;
    for m in pattern.find_iter(text) {
        chars += text[byte..m.start()].chars().count();
        let start = chars;
        let len = m.as_str().chars().count();
        chars += len;
        byte = m.end();
        tokens.push(Token::new(start, start + len, m.as_str()));
    }
    tokens
}
