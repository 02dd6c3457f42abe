//! Named word sets used as token features.
//!
//! Four small lists ship with the crate (cities, months, common journal
//! words, surname particles); callers may replace or extend them from
//! word-per-line files. Lookups are case-insensitive.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("dictionary name {0:?} is invalid: use lowercase letters, digits and underscores")]
    BadName(String),
    #[error("failed to read dictionary {name}: {source}")]
    Io {
        name: String,
        #[source]
        source: std::io::Error,
    },
}

/// Named, case-insensitive word sets.
#[derive(Debug, Clone, Default)]
pub struct Dictionaries {
    sets: BTreeMap<String, HashSet<String>>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

impl Dictionaries {
    pub fn empty() -> Dictionaries {
        Dictionaries::default()
    }

    /// The word lists bundled with the crate.
    pub fn bundled() -> Dictionaries {
        let mut d = Dictionaries::empty();
        for (name, data) in [
            ("cities", include_str!("../../data/dictionaries/cities.txt")),
            ("months", include_str!("../../data/dictionaries/months.txt")),
            (
                "journal_words",
                include_str!("../../data/dictionaries/journal_words.txt"),
            ),
            (
                "name_particles",
                include_str!("../../data/dictionaries/name_particles.txt"),
            ),
        ] {
            d.insert_words(name, data.lines()).expect("bundled names are valid");
        }
        d
    }

    /// Replaces or creates the named set from an iterator of words.
    pub fn insert_words<'a>(
        &mut self,
        name: &str,
        words: impl IntoIterator<Item = &'a str>,
    ) -> Result<(), DictionaryError> {
        if !valid_name(name) {
            return Err(DictionaryError::BadName(name.to_string()));
        }
        let set = words
            .into_iter()
            .map(|w| w.trim().to_lowercase())
            .filter(|w| !w.is_empty())
            .collect();
        self.sets.insert(name.to_string(), set);
        Ok(())
    }

    /// Replaces or creates the named set from a word-per-line file.
    pub fn load_file(&mut self, name: &str, path: &Path) -> Result<(), DictionaryError> {
        if !valid_name(name) {
            return Err(DictionaryError::BadName(name.to_string()));
        }
        let file = std::fs::File::open(path).map_err(|source| DictionaryError::Io {
            name: name.to_string(),
            source,
        })?;
        let mut words = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|source| DictionaryError::Io {
                name: name.to_string(),
                source,
            })?;
            words.push(line);
        }
        self.insert_words(name, words.iter().map(|s| s.as_str()))
    }

    /// Case-insensitive membership test. Unknown dictionary names are simply
    /// empty.
    pub fn contains(&self, dict: &str, word: &str) -> bool {
        self.sets
            .get(dict)
            .map(|s| s.contains(&word.to_lowercase()))
            .unwrap_or(false)
    }

    /// Dictionary names in sorted order.
    pub fn names(&self) -> Vec<String> {
        self.sets.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sets_exist_and_are_case_insensitive() {
        let d = Dictionaries::bundled();
        assert_eq!(
            d.names(),
            vec!["cities", "journal_words", "months", "name_particles"]
        );
        assert!(d.contains("cities", "Warsaw"));
        assert!(d.contains("months", "JAN"));
        assert!(d.contains("journal_words", "Journal"));
        assert!(d.contains("name_particles", "van"));
        assert!(!d.contains("cities", "journal"));
        assert!(!d.contains("no_such_dict", "anything"));
    }

    #[test]
    fn rejects_bad_names() {
        let mut d = Dictionaries::empty();
        assert!(d.insert_words("Bad Name", ["x"]).is_err());
        assert!(d.insert_words("", ["x"]).is_err());
        assert!(d.insert_words("ok_name2", ["x"]).is_ok());
    }
}
