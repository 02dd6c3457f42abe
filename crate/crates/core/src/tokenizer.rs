//! Reference-string tokenization.
//!
//! A reference string is split into maximal runs of letters, maximal runs of
//! decimal digits, and maximal mixed letter-digit runs; every remaining
//! non-whitespace character becomes a single-character token. Whitespace
//! separates tokens and never produces one. Tokens carry byte offsets into
//! the source string.

use serde::{Deserialize, Serialize};

/// Character class of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    /// Only alphabetic characters (Unicode letters, diacritics included).
    Letters,
    /// Only decimal digits.
    Digits,
    /// At least one letter and one digit, nothing else.
    Alphanumeric,
    /// A single character that is neither letter, digit nor whitespace.
    Other,
}

/// A lexical unit of a reference string with its byte span in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// Byte offset of the first byte, inclusive.
    pub start: usize,
    /// Byte offset past the last byte, exclusive.
    pub end: usize,
}

impl Token {
    /// True for Letters, Digits and Alphanumeric tokens; false for punctuation.
    pub fn is_word(&self) -> bool {
        !matches!(self.kind, TokenKind::Other)
    }
}

fn is_letter(c: char) -> bool {
    c.is_alphabetic()
}

// Decimal digits: ASCII 0-9 plus Unicode decimal digits. Letter-like numerics
// (Roman numeral codepoints) are alphabetic and classified as letters.
fn is_digit(c: char) -> bool {
    !c.is_alphabetic() && c.is_numeric()
}

/// Classifies a token text that is already known to be a single token.
///
/// Used when reading pre-tokenized training data, where only texts are stored.
pub fn classify_text(text: &str) -> TokenKind {
    let mut letters = false;
    let mut digits = false;
    let mut other = false;
    for c in text.chars() {
        if is_letter(c) {
            letters = true;
        } else if is_digit(c) {
            digits = true;
        } else {
            other = true;
        }
    }
    match (letters, digits, other) {
        (true, false, false) => TokenKind::Letters,
        (false, true, false) => TokenKind::Digits,
        (true, true, false) => TokenKind::Alphanumeric,
        _ => TokenKind::Other,
    }
}

/// Splits a reference string into tokens.
///
/// Maximal letter runs become `Letters` tokens, maximal digit runs `Digits`,
/// maximal mixed runs `Alphanumeric`. Any other non-whitespace character is a
/// single `Other` token. The empty string yields no tokens.
pub fn tokenize(s: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    // Current letter/digit run: (start offset, saw letter, saw digit).
    let mut run: Option<(usize, bool, bool)> = None;

    let flush = |run: &mut Option<(usize, bool, bool)>, end: usize, tokens: &mut Vec<Token>| {
        if let Some((start, letters, digits)) = run.take() {
            let kind = match (letters, digits) {
                (true, false) => TokenKind::Letters,
                (false, true) => TokenKind::Digits,
                _ => TokenKind::Alphanumeric,
            };
            tokens.push(Token {
                text: s[start..end].to_string(),
                kind,
                start,
                end,
            });
        }
    };

    for (idx, c) in s.char_indices() {
        if is_letter(c) || is_digit(c) {
            match &mut run {
                Some((_, letters, digits)) => {
                    *letters |= is_letter(c);
                    *digits |= is_digit(c);
                }
                None => run = Some((idx, is_letter(c), is_digit(c))),
            }
        } else {
            flush(&mut run, idx, &mut tokens);
            if !c.is_whitespace() {
                let end = idx + c.len_utf8();
                tokens.push(Token {
                    text: s[idx..end].to_string(),
                    kind: TokenKind::Other,
                    start: idx,
                    end,
                });
            }
        }
    }
    flush(&mut run, s.len(), &mut tokens);
    tokens
}
