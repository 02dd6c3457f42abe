//! Reference parsing: per-token features, a trainable linear sequence tagger,
//! and assembly of tagged tokens into a structured citation.

mod dictionaries;
mod features;
mod tagger;

pub use dictionaries::{Dictionaries, DictionaryError};
pub use features::{FeatureExtractor, FeatureVector, DEFAULT_WORD_FEATURES};
pub use tagger::{train_tagger, Tagger, TaggerError, TaggerModel};

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tokenizer::{classify_text, Token, TokenKind};

/// Metadata class of a citation token. The declaration order is the
/// canonical order used for deterministic tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenLabel {
    Author,
    Title,
    Source,
    Year,
    Pages,
    Other,
}

/// All labels in canonical order.
pub const LABELS: [TokenLabel; 6] = [
    TokenLabel::Author,
    TokenLabel::Title,
    TokenLabel::Source,
    TokenLabel::Year,
    TokenLabel::Pages,
    TokenLabel::Other,
];

pub const NUM_LABELS: usize = 6;

impl TokenLabel {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> TokenLabel {
        LABELS[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenLabel::Author => "Author",
            TokenLabel::Title => "Title",
            TokenLabel::Source => "Source",
            TokenLabel::Year => "Year",
            TokenLabel::Pages => "Pages",
            TokenLabel::Other => "Other",
        }
    }
}

impl fmt::Display for TokenLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Author" => Ok(TokenLabel::Author),
            "Title" => Ok(TokenLabel::Title),
            "Source" => Ok(TokenLabel::Source),
            "Year" => Ok(TokenLabel::Year),
            "Pages" => Ok(TokenLabel::Pages),
            "Other" => Ok(TokenLabel::Other),
            _ => Err(format!("unknown token label {s:?}")),
        }
    }
}

/// A field-tagged citation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParsedCitation {
    pub raw: String,
    /// Author-labeled token texts joined by single spaces.
    #[serde(default)]
    pub author_text: String,
    #[serde(default)]
    pub title_text: String,
    #[serde(default)]
    pub source_text: String,
    #[serde(default)]
    pub year_numbers: BTreeSet<i64>,
    #[serde(default)]
    pub page_numbers: BTreeSet<i64>,
    /// Word tokens labeled Author, original order, punctuation excluded.
    #[serde(default)]
    pub author_tokens: Vec<String>,
}

/// Builds a [`ParsedCitation`] from labeled tokens.
///
/// Digits tokens labeled Year or Pages are parsed as base-10 integers;
/// values that do not fit are ignored with a warning.
pub fn assemble(raw: &str, tokens: &[Token], labels: &[TokenLabel]) -> ParsedCitation {
    assert_eq!(
        tokens.len(),
        labels.len(),
        "one label per token is required"
    );
    let mut citation = ParsedCitation {
        raw: raw.to_string(),
        ..ParsedCitation::default()
    };
    let mut authors: Vec<&str> = Vec::new();
    let mut titles: Vec<&str> = Vec::new();
    let mut sources: Vec<&str> = Vec::new();
    for (token, &label) in tokens.iter().zip(labels) {
        match label {
            TokenLabel::Author => {
                authors.push(&token.text);
                if token.is_word() {
                    citation.author_tokens.push(token.text.clone());
                }
            }
            TokenLabel::Title => titles.push(&token.text),
            TokenLabel::Source => sources.push(&token.text),
            TokenLabel::Year | TokenLabel::Pages => {
                if token.kind == TokenKind::Digits {
                    match token.text.parse::<i64>() {
                        Ok(v) if label == TokenLabel::Year => {
                            citation.year_numbers.insert(v);
                        }
                        Ok(v) => {
                            citation.page_numbers.insert(v);
                        }
                        Err(_) => {
                            log::warn!(
                                "ignoring numeric token {:?} labeled {label}: out of range",
                                token.text
                            );
                        }
                    }
                }
            }
            TokenLabel::Other => {}
        }
    }
    citation.author_text = authors.join(" ");
    citation.title_text = titles.join(" ");
    citation.source_text = sources.join(" ");
    citation
}

/// A labeled token sequence used for tagger training.
pub type LabeledSequence = (Vec<Token>, Vec<TokenLabel>);

/// Reads labeled sequences from text: one `token<TAB>label` pair per line,
/// blank lines separate sequences. Token kinds are re-derived from the
/// texts; byte spans are synthesized as if tokens were space-separated.
pub fn parse_labeled_sequences(text: &str) -> Result<Vec<LabeledSequence>, String> {
    let mut sequences = Vec::new();
    let mut tokens: Vec<Token> = Vec::new();
    let mut labels: Vec<TokenLabel> = Vec::new();
    let mut offset = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !tokens.is_empty() {
                sequences.push((std::mem::take(&mut tokens), std::mem::take(&mut labels)));
                offset = 0;
            }
            continue;
        }
        let (text, label) = line
            .split_once('\t')
            .ok_or_else(|| format!("line {}: expected token<TAB>label", i + 1))?;
        if text.is_empty() {
            return Err(format!("line {}: empty token", i + 1));
        }
        let label: TokenLabel = label
            .trim()
            .parse()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        tokens.push(Token {
            text: text.to_string(),
            kind: classify_text(text),
            start: offset,
            end: offset + text.len(),
        });
        offset += text.len() + 1;
        labels.push(label);
    }
    if !tokens.is_empty() {
        sequences.push((tokens, labels));
    }
    Ok(sequences)
}

/// Writes labeled sequences in the format read by [`parse_labeled_sequences`].
pub fn format_labeled_sequences(sequences: &[LabeledSequence]) -> String {
    let mut out = String::new();
    for (tokens, labels) in sequences {
        for (t, l) in tokens.iter().zip(labels) {
            out.push_str(&t.text);
            out.push('\t');
            out.push_str(l.as_str());
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::tokenize;

    #[test]
    fn assemble_populates_fields() {
        let tokens = tokenize("Smith , 1999");
        let labels = vec![TokenLabel::Author, TokenLabel::Other, TokenLabel::Year];
        let c = assemble("Smith , 1999", &tokens, &labels);
        assert_eq!(c.author_tokens, vec!["Smith"]);
        assert_eq!(c.author_text, "Smith");
        assert_eq!(c.year_numbers, [1999].into_iter().collect());
        assert!(c.page_numbers.is_empty());
    }

    #[test]
    fn assemble_collects_pages_and_handles_missing_year() {
        let tokens = tokenize("pp 120 - 135");
        let labels = vec![
            TokenLabel::Other,
            TokenLabel::Pages,
            TokenLabel::Other,
            TokenLabel::Pages,
        ];
        let c = assemble("pp 120 - 135", &tokens, &labels);
        assert_eq!(c.page_numbers, [120, 135].into_iter().collect());
        assert!(c.year_numbers.is_empty());
    }

    #[test]
    fn assemble_ignores_overflowing_numbers() {
        let raw = "99999999999999999999999999";
        let tokens = tokenize(raw);
        let c = assemble(raw, &tokens, &[TokenLabel::Year]);
        assert!(c.year_numbers.is_empty());
    }

    #[test]
    fn parsed_citation_json_uses_camel_case() {
        let c = ParsedCitation {
            raw: "x".into(),
            author_tokens: vec!["Smith".into()],
            ..Default::default()
        };
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("authorTokens"));
        assert!(json.contains("yearNumbers"));
        let back: ParsedCitation = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn labeled_sequence_round_trip() {
        let text = "Smith\tAuthor\n,\tOther\n1999\tYear\n\nA\tTitle\n";
        let seqs = parse_labeled_sequences(text).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].0.len(), 3);
        assert_eq!(seqs[0].1[2], TokenLabel::Year);
        assert_eq!(seqs[0].0[2].kind, TokenKind::Digits);
        let round = parse_labeled_sequences(&format_labeled_sequences(&seqs)).unwrap();
        assert_eq!(round.len(), 2);
        assert_eq!(round[0].1, seqs[0].1);
    }
}
