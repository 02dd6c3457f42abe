//! Per-token feature extraction.
//!
//! Each token position is described by a fixed inventory of binary features:
//! character-class tests, specific-character tests, a configurable
//! specific-word list, one membership feature per named dictionary, and
//! positional buckets. With the default word list and the four bundled
//! dictionaries that is 42 features per position. The full vector for a
//! token copies the inventory for the focus token and for offsets -2, -1,
//! +1, +2 (out-of-range offsets emit a dedicated marker instead), all
//! name-prefixed by the offset.

use std::collections::HashMap;

use super::dictionaries::Dictionaries;
use crate::tokenizer::{Token, TokenKind};

/// Default specific-word features.
pub const DEFAULT_WORD_FEATURES: [&str; 13] = [
    "vol", "pp", "no", "and", "in", "ed", "eds", "et", "al", "of", "the", "press", "proc",
];

const CHAR_CLASS_FEATURES: [&str; 6] = [
    "all-digits",
    "all-lowercase",
    "all-uppercase",
    "capitalized",
    "roman-numeral",
    "mixed-alnum",
];

const SPECIFIC_CHAR_FEATURES: [&str; 7] = [
    "is-dot",
    "is-comma",
    "is-dash",
    "is-open-bracket",
    "is-close-bracket",
    "is-quote",
    "is-colon",
];

const POSITION_DECILES: usize = 10;

const OFFSETS: [(&str, isize); 5] = [("-2", -2), ("-1", -1), ("0", 0), ("+1", 1), ("+2", 2)];

/// Active features of one token position, as indices into the extractor's
/// inventory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    ids: Vec<u32>,
}

impl FeatureVector {
    pub fn active_ids(&self) -> &[u32] {
        &self.ids
    }

    /// The full binary map over the extractor's inventory.
    pub fn to_map(&self, fx: &FeatureExtractor) -> std::collections::BTreeMap<String, bool> {
        let mut map: std::collections::BTreeMap<String, bool> = fx
            .inventory()
            .iter()
            .map(|n| (n.clone(), false))
            .collect();
        for &id in &self.ids {
            map.insert(fx.name(id).to_string(), true);
        }
        map
    }

    pub fn active_names<'a>(&self, fx: &'a FeatureExtractor) -> Vec<&'a str> {
        self.ids.iter().map(|&id| fx.name(id)).collect()
    }
}

/// Deterministic feature extractor over a fixed inventory.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    dicts: Dictionaries,
    dict_names: Vec<String>,
    words: Vec<String>,
    word_ids: HashMap<String, usize>,
    names: Vec<String>,
    base_count: usize,
}

impl FeatureExtractor {
    /// Extractor with the default word list.
    pub fn new(dicts: Dictionaries) -> FeatureExtractor {
        FeatureExtractor::with_words(
            dicts,
            DEFAULT_WORD_FEATURES.iter().map(|w| w.to_string()).collect(),
        )
    }

    /// Extractor with a custom specific-word list. Changing the word list or
    /// the dictionary names changes the inventory; models only apply to the
    /// inventory they were trained on.
    pub fn with_words(dicts: Dictionaries, words: Vec<String>) -> FeatureExtractor {
        let words: Vec<String> = words.into_iter().map(|w| w.to_lowercase()).collect();
        let dict_names = dicts.names();
        let base_count =
            CHAR_CLASS_FEATURES.len() + SPECIFIC_CHAR_FEATURES.len() + words.len()
                + dict_names.len()
                + POSITION_DECILES
                + 2;

        let mut base_names: Vec<String> = Vec::with_capacity(base_count);
        base_names.extend(CHAR_CLASS_FEATURES.iter().map(|s| s.to_string()));
        base_names.extend(SPECIFIC_CHAR_FEATURES.iter().map(|s| s.to_string()));
        base_names.extend(words.iter().map(|w| format!("word:{w}")));
        base_names.extend(dict_names.iter().map(|d| format!("dict:{d}")));
        base_names.extend((0..POSITION_DECILES).map(|d| format!("pos-decile-{d}")));
        base_names.push("is-first".to_string());
        base_names.push("is-last".to_string());

        let mut names = Vec::with_capacity(base_count * OFFSETS.len() + 4);
        for (tag, _) in OFFSETS {
            for base in &base_names {
                names.push(format!("{tag}:{base}"));
            }
        }
        for (tag, off) in OFFSETS {
            if off != 0 {
                names.push(format!("{tag}:out-of-bounds"));
            }
        }

        let word_ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();

        FeatureExtractor {
            dicts,
            dict_names,
            words,
            word_ids,
            names,
            base_count,
        }
    }

    /// Number of features per position (42 with the defaults).
    pub fn base_feature_count(&self) -> usize {
        self.base_count
    }

    /// All feature names, in id order.
    pub fn inventory(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.names.iter().position(|n| n == name).map(|i| i as u32)
    }

    pub fn dictionaries(&self) -> &Dictionaries {
        &self.dicts
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Features of token `i`, including the +-2 window.
    pub fn extract(&self, tokens: &[Token], i: usize) -> FeatureVector {
        assert!(i < tokens.len(), "token index {i} out of range");
        let mut ids: Vec<u32> = Vec::with_capacity(24);
        for (block, (_, off)) in OFFSETS.iter().enumerate() {
            let j = i as isize + off;
            if j < 0 || j >= tokens.len() as isize {
                // Blocks are laid out first, out-of-bounds markers after them,
                // in offset order skipping 0.
                let oob_index = match off {
                    -2 => 0,
                    -1 => 1,
                    1 => 2,
                    _ => 3,
                };
                ids.push((self.base_count * OFFSETS.len() + oob_index) as u32);
                continue;
            }
            let start = (block * self.base_count) as u32;
            self.push_base(tokens, j as usize, start, &mut ids);
        }
        ids.sort_unstable();
        FeatureVector { ids }
    }

    fn push_base(&self, tokens: &[Token], j: usize, start: u32, ids: &mut Vec<u32>) {
        let token = &tokens[j];
        let text = token.text.as_str();

        // Character classes.
        if token.kind == TokenKind::Digits {
            ids.push(start);
        }
        if !text.is_empty() && text.chars().all(char::is_lowercase) {
            ids.push(start + 1);
        }
        if !text.is_empty() && text.chars().all(char::is_uppercase) {
            ids.push(start + 2);
        }
        if text.chars().next().is_some_and(char::is_uppercase) {
            ids.push(start + 3);
        }
        if !text.is_empty()
            && text
                .chars()
                .all(|c| "IVXLCDMivxlcdm".contains(c))
        {
            ids.push(start + 4);
        }
        if token.kind == TokenKind::Alphanumeric {
            ids.push(start + 5);
        }

        // Specific characters.
        let char_base = start + CHAR_CLASS_FEATURES.len() as u32;
        let specific: Option<u32> = match text {
            "." => Some(0),
            "," => Some(1),
            "-" | "\u{2013}" | "\u{2014}" => Some(2),
            "(" | "[" => Some(3),
            ")" | "]" => Some(4),
            "\"" | "'" | "\u{201c}" | "\u{201d}" | "\u{2018}" | "\u{2019}" | "`" => Some(5),
            ":" => Some(6),
            _ => None,
        };
        if let Some(k) = specific {
            ids.push(char_base + k);
        }

        // Specific words.
        let word_base = char_base + SPECIFIC_CHAR_FEATURES.len() as u32;
        if let Some(&w) = self.word_ids.get(&text.to_lowercase()) {
            ids.push(word_base + w as u32);
        }

        // Dictionary membership.
        let dict_base = word_base + self.words.len() as u32;
        for (d, name) in self.dict_names.iter().enumerate() {
            if self.dicts.contains(name, text) {
                ids.push(dict_base + d as u32);
            }
        }

        // Position buckets.
        let pos_base = dict_base + self.dict_names.len() as u32;
        let n = tokens.len();
        let decile = (POSITION_DECILES * j / n).min(POSITION_DECILES - 1);
        ids.push(pos_base + decile as u32);
        if j == 0 {
            ids.push(pos_base + POSITION_DECILES as u32);
        }
        if j == n - 1 {
            ids.push(pos_base + POSITION_DECILES as u32 + 1);
        }
    }
}
