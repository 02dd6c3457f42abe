//! Field-level similarity measures and the feature vector consumed by the
//! match classifier.
//!
//! Trigram and token similarity use the Dice coefficient over multisets,
//! 2*|A "intersect" B| / (|A| + |B|), so identical inputs score 1 and all
//! values stay in [0, 1]. Source similarity is a length-normalized longest
//! common subsequence, year similarity is equality of the year closest to
//! 2000, and pages similarity is the Jaccard index of the page-number sets.

mod author;
mod hungarian;

pub use author::{author_pair_weights, boundary_positions, sim_author_complex, sim_author_simple};
pub use hungarian::max_weight_assignment;

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::corpus::DocumentRecord;
use crate::parser::ParsedCitation;
use crate::tokenizer::tokenize;

/// Multiset of contiguous 3-character substrings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrigramMultiset {
    counts: HashMap<String, u32>,
    total: u32,
}

impl TrigramMultiset {
    pub fn total(&self) -> u32 {
        self.total
    }

    pub fn count(&self, trigram: &str) -> u32 {
        self.counts.get(trigram).copied().unwrap_or(0)
    }

    /// Multiset intersection size: sum of per-trigram count minima.
    pub fn intersection_size(&self, other: &TrigramMultiset) -> u32 {
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .counts
            .iter()
            .map(|(t, &c)| c.min(large.count(t)))
            .sum()
    }
}

/// All contiguous 3-character substrings of `s` with multiplicity.
/// Strings shorter than 3 characters yield the empty multiset.
pub fn trigram_multiset(s: &str) -> TrigramMultiset {
    let chars: Vec<char> = s.chars().collect();
    let mut counts = HashMap::new();
    let mut total = 0;
    for w in chars.windows(3) {
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        total += 1;
    }
    TrigramMultiset { counts, total }
}

fn dice(inter: u32, total_a: u32, total_b: u32) -> f64 {
    2.0 * inter as f64 / (total_a + total_b) as f64
}

/// Trigram similarity of two strings.
///
/// When both multisets are empty (both strings shorter than 3 characters)
/// the result is 1 for equal strings and 0 otherwise.
pub fn sim_trigram(s: &str, t: &str) -> f64 {
    let a = trigram_multiset(s);
    let b = trigram_multiset(t);
    if a.total == 0 && b.total == 0 {
        return if s == t { 1.0 } else { 0.0 };
    }
    dice(a.intersection_size(&b), a.total, b.total)
}

fn word_token_multiset(s: &str) -> (HashMap<String, u32>, u32) {
    let mut counts = HashMap::new();
    let mut total = 0;
    for tok in tokenize(s) {
        if tok.is_word() {
            *counts.entry(tok.text.to_lowercase()).or_insert(0) += 1;
            total += 1;
        }
    }
    (counts, total)
}

/// Token similarity: Dice coefficient over multisets of lowercased word
/// tokens (punctuation dropped). Two strings without any word token compare
/// equal case-insensitively or score 0.
pub fn sim_token(s: &str, t: &str) -> f64 {
    let (a, ta) = word_token_multiset(s);
    let (b, tb) = word_token_multiset(t);
    if ta == 0 && tb == 0 {
        return if s.to_lowercase() == t.to_lowercase() {
            1.0
        } else {
            0.0
        };
    }
    let inter: u32 = a
        .iter()
        .map(|(w, &c)| c.min(b.get(w).copied().unwrap_or(0)))
        .sum();
    dice(inter, ta, tb)
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    for (j, &cl) in long.iter().enumerate() {
        let mut diag = prev[0];
        prev[0] = j + 1;
        for (i, &cs) in short.iter().enumerate() {
            let cur = prev[i + 1];
            prev[i + 1] = if cs == cl {
                diag
            } else {
                1 + diag.min(cur).min(prev[i])
            };
            diag = cur;
        }
    }
    prev[short.len()]
}

/// Levenshtein distance with the initials exception: two distinct strings
/// where the shorter has at most 2 characters and is a case-insensitive
/// prefix of the longer are at distance 1 ("J" vs "John").
pub fn edit_distance_ex(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    let (short, long) = if ca.len() <= cb.len() {
        (a, b)
    } else {
        (b, a)
    };
    let short_len = ca.len().min(cb.len());
    if short_len <= 2 && short_len > 0 {
        if long.to_lowercase().starts_with(&short.to_lowercase()) {
            return 1;
        }
    }
    levenshtein(&ca, &cb)
}

/// Length-normalized token similarity, 1 - d/max(|a|, |b|), clamped to [0,1].
/// Both tokens must be non-empty.
pub fn token_pair_similarity(a: &str, b: &str) -> f64 {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "token_pair_similarity requires non-empty tokens"
    );
    let d = edit_distance_ex(a, b) as f64;
    let max_len = a.chars().count().max(b.chars().count()) as f64;
    (1.0 - d / max_len).clamp(0.0, 1.0)
}

fn collapse_whitespace_lower(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_ws = true; // leading whitespace dropped
    for c in s.chars() {
        if c.is_whitespace() {
            if !in_ws {
                out.push(' ');
                in_ws = true;
            }
        } else {
            for lc in c.to_lowercase() {
                out.push(lc);
            }
            in_ws = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for &cl in long {
        for (i, &cs) in short.iter().enumerate() {
            cur[i + 1] = if cs == cl {
                prev[i] + 1
            } else {
                prev[i + 1].max(cur[i])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Source (journal) similarity: character LCS of the lowercased,
/// whitespace-collapsed strings divided by the shorter length. Handles the
/// abbreviation conventions where words are prefix-truncated ("appl.") or
/// lose letters ("jrnl").
pub fn sim_source(a: &str, b: &str) -> f64 {
    let na = collapse_whitespace_lower(a);
    let nb = collapse_whitespace_lower(b);
    if na.is_empty() && nb.is_empty() {
        return 1.0;
    }
    if na.is_empty() || nb.is_empty() {
        return 0.0;
    }
    let ca: Vec<char> = na.chars().collect();
    let cb: Vec<char> = nb.chars().collect();
    lcs_len(&ca, &cb) as f64 / ca.len().min(cb.len()) as f64
}

/// Title similarity: trigram similarity of the lowercased titles; an absent
/// title on either side scores 0.
pub fn sim_title(a: &str, b: &str) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    sim_trigram(&a.to_lowercase(), &b.to_lowercase())
}

fn closest_to_2000(years: &BTreeSet<i64>) -> Option<i64> {
    // Ties at equal distance resolve to the smaller year; BTreeSet iteration
    // order plus strict improvement gives exactly that.
    let mut best: Option<i64> = None;
    for &y in years {
        match best {
            None => best = Some(y),
            Some(b) => {
                if (y - 2000).abs() < (b - 2000).abs() {
                    best = Some(y);
                }
            }
        }
    }
    best
}

/// Year similarity: from each set pick the year closest to 2000 (ties go to
/// the smaller year); 1 if both sets are non-empty and the picks are equal.
pub fn sim_year(a: &BTreeSet<i64>, b: &BTreeSet<i64>) -> f64 {
    match (closest_to_2000(a), closest_to_2000(b)) {
        (Some(x), Some(y)) if x == y => 1.0,
        _ => 0.0,
    }
}

/// Pages similarity: Jaccard index of the two page-number sets. Two empty
/// sets score 0.
pub fn sim_pages(a: &BTreeSet<i64>, b: &BTreeSet<i64>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// Whole-string trigram features: the raw strings, the letters-only
/// projections and the digits-only projections.
pub fn whole_string_features(a: &str, b: &str) -> (f64, f64, f64) {
    let letters = |s: &str| s.chars().filter(|c| c.is_alphabetic()).collect::<String>();
    let digits = |s: &str| {
        s.chars()
            .filter(|c| !c.is_alphabetic() && c.is_numeric())
            .collect::<String>()
    };
    (
        sim_trigram(a, b),
        sim_trigram(&letters(a), &letters(b)),
        sim_trigram(&digits(a), &digits(b)),
    )
}

/// Which features the classifier consumes.
///
/// The batch pipeline omits the whole-string features and uses the simple
/// author similarity only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    Full,
    Pipeline,
}

impl FeatureMode {
    /// Canonical feature names for this mode, in serialization order.
    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            FeatureMode::Full => &[
                "authorComplex",
                "authorTokenSim",
                "authorTrigramSim",
                "sourceLcs",
                "titleTrigram",
                "yearEqual",
                "pagesJaccard",
                "wholeRaw",
                "wholeLetters",
                "wholeDigits",
            ],
            FeatureMode::Pipeline => &[
                "authorTokenSim",
                "authorTrigramSim",
                "sourceLcs",
                "titleTrigram",
                "yearEqual",
                "pagesJaccard",
            ],
        }
    }

    pub fn parse(s: &str) -> Option<FeatureMode> {
        match s {
            "full" | "Full" => Some(FeatureMode::Full),
            "pipeline" | "Pipeline" => Some(FeatureMode::Pipeline),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Full => "full",
            FeatureMode::Pipeline => "pipeline",
        }
    }
}

/// The per-field similarity values for one citation/record pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityFeatures {
    pub mode: FeatureMode,
    /// Assignment-based author similarity; absent in pipeline mode.
    pub author_complex: Option<f64>,
    pub author_token_sim: f64,
    pub author_trigram_sim: f64,
    pub source_lcs: f64,
    pub title_trigram: f64,
    pub year_equal: f64,
    pub pages_jaccard: f64,
    pub whole_raw: Option<f64>,
    pub whole_letters: Option<f64>,
    pub whole_digits: Option<f64>,
}

impl SimilarityFeatures {
    /// Values in the canonical order of `mode.feature_names()`.
    pub fn dense(&self) -> Vec<f64> {
        match self.mode {
            FeatureMode::Full => vec![
                self.author_complex.unwrap_or(0.0),
                self.author_token_sim,
                self.author_trigram_sim,
                self.source_lcs,
                self.title_trigram,
                self.year_equal,
                self.pages_jaccard,
                self.whole_raw.unwrap_or(0.0),
                self.whole_letters.unwrap_or(0.0),
                self.whole_digits.unwrap_or(0.0),
            ],
            FeatureMode::Pipeline => vec![
                self.author_token_sim,
                self.author_trigram_sim,
                self.source_lcs,
                self.title_trigram,
                self.year_equal,
                self.pages_jaccard,
            ],
        }
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        self.mode
            .feature_names()
            .iter()
            .copied()
            .zip(self.dense())
            .collect()
    }

    /// Rebuilds a feature vector from values in canonical order.
    pub fn from_dense(mode: FeatureMode, values: &[f64]) -> Option<SimilarityFeatures> {
        if values.len() != mode.feature_names().len() {
            return None;
        }
        Some(match mode {
            FeatureMode::Full => SimilarityFeatures {
                mode,
                author_complex: Some(values[0]),
                author_token_sim: values[1],
                author_trigram_sim: values[2],
                source_lcs: values[3],
                title_trigram: values[4],
                year_equal: values[5],
                pages_jaccard: values[6],
                whole_raw: Some(values[7]),
                whole_letters: Some(values[8]),
                whole_digits: Some(values[9]),
            },
            FeatureMode::Pipeline => SimilarityFeatures {
                mode,
                author_complex: None,
                author_token_sim: values[0],
                author_trigram_sim: values[1],
                source_lcs: values[2],
                title_trigram: values[3],
                year_equal: values[4],
                pages_jaccard: values[5],
                whole_raw: None,
                whole_letters: None,
                whole_digits: None,
            },
        })
    }
}

/// Textual rendering of one side of a comparison. Parsed citations and
/// document records both reduce to this shape.
#[derive(Debug, Clone, Default)]
pub struct FieldView {
    pub author_text: String,
    pub author_tokens: Vec<String>,
    pub title: String,
    pub source: String,
    pub years: BTreeSet<i64>,
    pub pages: BTreeSet<i64>,
    /// The raw reference string, or a flat rendering of a structured record.
    pub whole: String,
}

impl FieldView {
    pub fn from_citation(c: &ParsedCitation) -> FieldView {
        FieldView {
            author_text: c.author_text.clone(),
            author_tokens: c.author_tokens.clone(),
            title: c.title_text.clone(),
            source: c.source_text.clone(),
            years: c.year_numbers.clone(),
            pages: c.page_numbers.clone(),
            whole: c.raw.clone(),
        }
    }

    pub fn from_document(d: &DocumentRecord) -> FieldView {
        FieldView {
            author_text: d.authors.join(" "),
            author_tokens: d.author_tokens(),
            title: d.title.clone(),
            source: d.journal.clone(),
            years: d.year.into_iter().collect(),
            pages: d.pages.clone(),
            whole: d.reference_text(),
        }
    }
}

/// Computes the similarity feature vector for a pair of field views.
pub fn feature_vector(a: &FieldView, b: &FieldView, mode: FeatureMode) -> SimilarityFeatures {
    let (author_token_sim, author_trigram_sim) =
        sim_author_simple(&a.author_text, &b.author_text);
    let source_lcs = if a.source.is_empty() || b.source.is_empty() {
        0.0
    } else {
        sim_source(&a.source, &b.source)
    };
    let base = SimilarityFeatures {
        mode,
        author_complex: None,
        author_token_sim,
        author_trigram_sim,
        source_lcs,
        title_trigram: sim_title(&a.title, &b.title),
        year_equal: sim_year(&a.years, &b.years),
        pages_jaccard: sim_pages(&a.pages, &b.pages),
        whole_raw: None,
        whole_letters: None,
        whole_digits: None,
    };
    match mode {
        FeatureMode::Pipeline => base,
        FeatureMode::Full => {
            let (raw, letters, digits) = whole_string_features(&a.whole, &b.whole);
            SimilarityFeatures {
                author_complex: Some(sim_author_complex(&a.author_tokens, &b.author_tokens)),
                whole_raw: Some(raw),
                whole_letters: Some(letters),
                whole_digits: Some(digits),
                ..base
            }
        }
    }
}
