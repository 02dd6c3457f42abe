//! Approximate author-token index over rotation keys.
//!
//! Every author token w is stored under all rotations of w + '$', where '$'
//! is a sentinel outside the token alphabet. Lookup generates the rotations
//! of the query the same way and, for each rotation r of length n, scans the
//! key range starting at the smallest key with prefix b (r minus its last
//! character), collecting keys with prefix b of length <= n and keys with
//! prefix r of length <= n + 1. This retrieves exact matches, all
//! single-substitution variants, and most single edits in general.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::parser::ParsedCitation;

pub const SENTINEL: char = '$';

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("cannot index an empty token")]
    EmptyToken,
    #[error("token {0:?} contains the reserved sentinel character '$'")]
    SentinelInToken(String),
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
}

/// All rotations of `w + '$'`, starting with `w$` and rotating left by one.
pub fn rotations(w: &str) -> Result<Vec<String>, IndexError> {
    if w.is_empty() {
        return Err(IndexError::EmptyToken);
    }
    if w.contains(SENTINEL) {
        return Err(IndexError::SentinelInToken(w.to_string()));
    }
    let mut chars: Vec<char> = w.chars().collect();
    chars.push(SENTINEL);
    let mut out = Vec::with_capacity(chars.len());
    for _ in 0..chars.len() {
        out.push(chars.iter().collect::<String>());
        chars.rotate_left(1);
    }
    Ok(out)
}

/// Recovers the stored token from one of its rotation keys by rotating the
/// sentinel to the end.
pub fn token_of_key(key: &str) -> Option<String> {
    let pos = key.find(SENTINEL)?;
    let mut token = String::with_capacity(key.len() - 1);
    token.push_str(&key[pos + 1..]);
    token.push_str(&key[..pos]);
    Some(token)
}

/// Ordered access to rotation keys and their posting lists.
///
/// Implementations visit stored keys in lexicographic order, starting at the
/// smallest key that has `prefix` as a prefix, for as long as keys share the
/// prefix. The in-memory index and the on-disk sorted store both implement
/// this.
pub trait KeyScanner {
    fn scan_prefix(
        &mut self,
        prefix: &str,
        visit: &mut dyn FnMut(&str, &[String]),
    ) -> std::io::Result<()>;
}

/// In-memory rotation index: sorted map from rotation key to a sorted,
/// duplicate-free posting list of document ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RotationIndex {
    entries: BTreeMap<String, Vec<String>>,
}

impl RotationIndex {
    /// Indexes the author tokens of the given documents. Tokens are
    /// lowercased. Document ids must be unique.
    pub fn build(docs: &[crate::corpus::DocumentRecord]) -> Result<RotationIndex, IndexError> {
        let mut seen = BTreeSet::new();
        let mut postings: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for doc in docs {
            if !seen.insert(doc.id.as_str()) {
                return Err(IndexError::DuplicateDocId(doc.id.clone()));
            }
            for token in doc.author_tokens() {
                let token = token.to_lowercase();
                if token.is_empty() || token.contains(SENTINEL) {
                    continue; // cannot arise from tokenization
                }
                postings.entry(token).or_default().insert(doc.id.clone());
            }
        }
        let mut entries = BTreeMap::new();
        for (token, ids) in postings {
            let ids: Vec<String> = ids.into_iter().collect();
            for key in rotations(&token).expect("validated above") {
                entries.insert(key, ids.clone());
            }
        }
        Ok(RotationIndex { entries })
    }

    /// Builds directly from (token, posting list) pairs; tokens are used as
    /// given, repeated tokens merge their postings. Used by tests and by the
    /// pipeline equivalence checks.
    pub fn from_token_postings(
        pairs: impl IntoIterator<Item = (String, Vec<String>)>,
    ) -> Result<RotationIndex, IndexError> {
        let mut postings: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (token, ids) in pairs {
            if token.is_empty() {
                return Err(IndexError::EmptyToken);
            }
            if token.contains(SENTINEL) {
                return Err(IndexError::SentinelInToken(token));
            }
            postings.entry(token).or_default().extend(ids);
        }
        let mut entries = BTreeMap::new();
        for (token, ids) in postings {
            let ids: Vec<String> = ids.into_iter().collect();
            for key in rotations(&token).expect("validated above") {
                entries.insert(key, ids.clone());
            }
        }
        Ok(RotationIndex { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.entries.iter()
    }

    pub fn posting(&self, key: &str) -> Option<&[String]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    /// Documents whose indexed tokens are near matches of `q`.
    pub fn lookup(&self, q: &str) -> BTreeSet<String> {
        let mut scanner = &*self;
        lookup_token_in(&mut scanner, q, false).expect("in-memory scan cannot fail")
    }

    /// Candidate documents for a parsed citation, with match counts.
    pub fn candidates(&self, citation: &ParsedCitation) -> BTreeMap<String, usize> {
        let mut scanner = &*self;
        candidates_in(&mut scanner, citation, false).expect("in-memory scan cannot fail")
    }
}

impl KeyScanner for &RotationIndex {
    fn scan_prefix(
        &mut self,
        prefix: &str,
        visit: &mut dyn FnMut(&str, &[String]),
    ) -> std::io::Result<()> {
        for (key, ids) in self.entries.range(prefix.to_string()..) {
            if !key.starts_with(prefix) {
                break;
            }
            visit(key, ids);
        }
        Ok(())
    }
}

/// True when the plain Levenshtein distance of `a` and `b` is at most 1.
fn within_edit_one(a: &str, b: &str) -> bool {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    let (short, long) = if ca.len() <= cb.len() {
        (&ca, &cb)
    } else {
        (&cb, &ca)
    };
    match long.len() - short.len() {
        0 => short.iter().zip(long.iter()).filter(|(x, y)| x != y).count() <= 1,
        1 => {
            let mut i = 0;
            while i < short.len() && short[i] == long[i] {
                i += 1;
            }
            short[i..] == long[i + 1..]
        }
        _ => false,
    }
}

/// Retrieves documents stored under keys that the rotation scan rules accept
/// for query `q`. The query is lowercased first; empty queries and queries
/// containing the sentinel retrieve nothing. With `verify` set, retrieved
/// tokens additionally must be within plain Levenshtein distance 1 of the
/// query.
pub fn lookup_token_in(
    scanner: &mut impl KeyScanner,
    q: &str,
    verify: bool,
) -> std::io::Result<BTreeSet<String>> {
    let q = q.to_lowercase();
    if q.is_empty() || q.contains(SENTINEL) {
        return Ok(BTreeSet::new());
    }
    let rots = rotations(&q).expect("validated above");
    let n = q.chars().count() + 1; // every rotation has length |q| + 1
    let mut out: BTreeSet<String> = BTreeSet::new();
    let mut seen_keys: BTreeSet<String> = BTreeSet::new();
    for r in &rots {
        let split = r
            .char_indices()
            .last()
            .map(|(i, _)| i)
            .expect("rotations are non-empty");
        let b = &r[..split];
        scanner.scan_prefix(b, &mut |key, ids| {
            if !seen_keys.contains(key) {
                let klen = key.chars().count();
                let accepted = klen <= n || (klen <= n + 1 && key.starts_with(r.as_str()));
                if accepted {
                    let verified = !verify
                        || token_of_key(key).is_some_and(|t| within_edit_one(&t, &q));
                    if verified {
                        out.extend(ids.iter().cloned());
                    }
                    seen_keys.insert(key.to_string());
                }
            }
        })?;
    }
    Ok(out)
}

/// Retrieves and filters candidate documents for a citation.
///
/// Each distinct author token votes for the documents it retrieves; with M
/// the maximum vote count, documents with fewer than max(1, M-1) votes are
/// dropped. No author tokens or no hits yield the empty set.
pub fn candidates_in(
    scanner: &mut impl KeyScanner,
    citation: &ParsedCitation,
    verify: bool,
) -> std::io::Result<BTreeMap<String, usize>> {
    let tokens: BTreeSet<String> = citation
        .author_tokens
        .iter()
        .map(|t| t.to_lowercase())
        .filter(|t| !t.is_empty() && !t.contains(SENTINEL))
        .collect();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for token in &tokens {
        for doc in lookup_token_in(scanner, token, verify)? {
            *counts.entry(doc).or_insert(0) += 1;
        }
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    let threshold = 1.max(max_count.saturating_sub(1));
    Ok(counts
        .into_iter()
        .filter(|&(_, c)| c >= threshold)
        .collect())
}
