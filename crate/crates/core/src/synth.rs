//! Synthetic corpora for tests and benchmarks.
//!
//! Generates document records with plausible author/title/journal/year/pages
//! fields and renders each document as citation strings in several styles
//! with realistic perturbations: abbreviated given names, journal words
//! truncated to a prefix or stripped of vowels, single-character typos and
//! reordered fields. Rendered citations carry gold token labels so the same
//! data trains the reference parser.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::DocumentRecord;
use crate::parser::{LabeledSequence, TokenLabel};
use crate::tokenizer::{tokenize, Token};

const GIVEN_NAMES: [&str; 24] = [
    "John", "Jane", "Maria", "Piotr", "Anna", "Luis", "Chen", "Yuki", "Omar", "Ivan", "Elena",
    "David", "Sara", "Marco", "Nina", "Paul", "Greta", "Tomas", "Aisha", "Viktor", "Lena",
    "Oscar", "Ruth", "Milan",
];

const SURNAME_HEADS: [&str; 22] = [
    "Kow", "Nov", "Schu", "Fern", "Tana", "Oko", "Berg", "Lind", "Mora", "Petr", "Sand", "Vol",
    "Haas", "Kli", "Rost", "Dub", "Gall", "Mart", "Wein", "Zhao", "Bial", "Cart",
];

const SURNAME_TAILS: [&str; 18] = [
    "alski", "akova", "mann", "andez", "ka", "nowski", "strom", "qvist", "les", "ov", "berg",
    "sen", "etti", "ard", "ikov", "owicz", "er", "sson",
];

const TITLE_WORDS: [&str; 48] = [
    "adaptive", "analysis", "approach", "approximate", "bayesian", "citation", "classification",
    "clustering", "combinatorial", "data", "decomposition", "detection", "distributed",
    "efficient", "estimation", "evaluation", "extraction", "fast", "framework", "graph",
    "incremental", "indexing", "inference", "information", "integration", "language", "learning",
    "linkage", "matching", "method", "model", "networks", "optimization", "parallel", "parsing",
    "probabilistic", "processing", "random", "recognition", "records", "retrieval", "scalable",
    "search", "semantic", "sequence", "statistical", "structured", "systems",
];

const FIELD_WORDS: [&str; 24] = [
    "artificial", "intelligence", "computation", "algorithms", "software", "databases",
    "knowledge", "discovery", "pattern", "analysis", "machine", "learning", "digital",
    "libraries", "information", "retrieval", "language", "processing", "data", "mining",
    "statistics", "optimization", "computing", "informatics",
];

/// Configuration for corpus generation.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub documents: usize,
    pub seed: u64,
    pub min_renders: usize,
    pub max_renders: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            documents: 300,
            seed: 7,
            min_renders: 3,
            max_renders: 6,
        }
    }
}

/// One rendered citation string with its gold labels and source document.
#[derive(Debug, Clone)]
pub struct RenderedCitation {
    pub source_doc_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub labels: Vec<TokenLabel>,
}

impl RenderedCitation {
    pub fn labeled(&self) -> LabeledSequence {
        (self.tokens.clone(), self.labels.clone())
    }
}

/// A generated corpus with citation renderings of every document.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub documents: Vec<DocumentRecord>,
    pub renders: Vec<RenderedCitation>,
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let documents: Vec<DocumentRecord> = (0..config.documents)
        .map(|i| generate_document(i, &mut rng))
        .collect();
    let mut renders = Vec::new();
    for doc in &documents {
        let n = rng.random_range(config.min_renders..=config.max_renders);
        for _ in 0..n {
            renders.push(render_citation(doc, &mut rng));
        }
    }
    SynthCorpus { documents, renders }
}

fn surname(rng: &mut ChaCha8Rng) -> String {
    format!(
        "{}{}",
        SURNAME_HEADS.choose(rng).unwrap(),
        SURNAME_TAILS.choose(rng).unwrap()
    )
}

fn generate_document(i: usize, rng: &mut ChaCha8Rng) -> DocumentRecord {
    let author_count = rng.random_range(1..=3);
    let authors: Vec<String> = (0..author_count)
        .map(|_| format!("{} {}", GIVEN_NAMES.choose(rng).unwrap(), surname(rng)))
        .collect();
    let title_len = rng.random_range(4..=8);
    let mut title_words: Vec<String> = (0..title_len)
        .map(|_| TITLE_WORDS.choose(rng).unwrap().to_string())
        .collect();
    if let Some(first) = title_words.first_mut() {
        *first = capitalize(first);
    }
    let journal = generate_journal(rng);
    let year = rng.random_range(1975..=2004);
    let first_page = rng.random_range(1..=400);
    let last_page = first_page + rng.random_range(1..=30);
    DocumentRecord {
        id: format!("doc-{i:05}"),
        authors,
        title: title_words.join(" "),
        journal,
        year: Some(year),
        pages: [first_page, last_page].into_iter().collect(),
        references: vec![],
    }
}

fn generate_journal(rng: &mut ChaCha8Rng) -> String {
    let w1 = capitalize(FIELD_WORDS.choose(rng).unwrap());
    let w2 = capitalize(FIELD_WORDS.choose(rng).unwrap());
    match rng.random_range(0..5) {
        0 => format!("Journal of {w1} {w2}"),
        1 => format!("{w1} Letters"),
        2 => format!("Transactions on {w1} {w2}"),
        3 => format!("International {w1} Review"),
        _ => format!("Annals of {w1}"),
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Accumulates labeled text pieces and produces (text, tokens, labels).
struct CitationBuilder {
    text: String,
    spans: Vec<(usize, usize, TokenLabel)>,
}

impl CitationBuilder {
    fn new() -> CitationBuilder {
        CitationBuilder {
            text: String::new(),
            spans: Vec::new(),
        }
    }

    fn push(&mut self, piece: &str, label: TokenLabel) {
        if piece.is_empty() {
            return;
        }
        if !self.text.is_empty() {
            self.text.push(' ');
        }
        let start = self.text.len();
        self.text.push_str(piece);
        self.spans.push((start, self.text.len(), label));
    }

    fn finish(self, source_doc_id: &str) -> RenderedCitation {
        let tokens = tokenize(&self.text);
        let labels = tokens
            .iter()
            .map(|t| {
                self.spans
                    .iter()
                    .find(|(start, end, _)| t.start >= *start && t.end <= *end)
                    .map(|(_, _, label)| *label)
                    .unwrap_or(TokenLabel::Other)
            })
            .collect();
        RenderedCitation {
            source_doc_id: source_doc_id.to_string(),
            text: self.text,
            tokens,
            labels,
        }
    }
}

fn typo(word: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() < 4 {
        return word.to_string();
    }
    let pos = rng.random_range(1..chars.len() - 1);
    let replacement = (b'a' + rng.random_range(0..26u8)) as char;
    chars
        .iter()
        .enumerate()
        .map(|(i, &c)| if i == pos { replacement } else { c })
        .collect()
}

/// Journal-word abbreviation: prefix truncation ("applied" -> "appl.") or
/// vowel dropping ("journal" -> "jrnl").
fn abbreviate(word: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() <= 4 {
        return word.to_string();
    }
    if rng.random_bool(0.5) {
        let keep = rng.random_range(3..=4.min(chars.len() - 1));
        let prefix: String = chars[..keep].iter().collect();
        format!("{prefix}.")
    } else {
        let mut out = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if i == 0 || !"aeiouAEIOU".contains(c) {
                out.push(c);
            }
        }
        out
    }
}

fn render_author(name: &str, style: u8, rng: &mut ChaCha8Rng) -> String {
    let mut parts = name.split_whitespace();
    let given = parts.next().unwrap_or("");
    let mut family = parts.next().unwrap_or("").to_string();
    if rng.random_bool(0.12) {
        family = typo(&family, rng);
    }
    let initial: String = given.chars().take(1).collect();
    match style {
        0 => format!("{given} {family}"),
        1 => format!("{initial}. {family}"),
        2 => format!("{family}, {initial}."),
        _ => format!("{family} {initial}"),
    }
}

/// Renders one citation string for a document, with random style and
/// perturbations, carrying gold token labels.
pub fn render_citation(doc: &DocumentRecord, rng: &mut ChaCha8Rng) -> RenderedCitation {
    use TokenLabel::*;
    let mut b = CitationBuilder::new();

    let author_style: u8 = rng.random_range(0..4);
    let authors: Vec<String> = doc
        .authors
        .iter()
        .map(|a| render_author(a, author_style, rng))
        .collect();

    let mut title = doc.title.clone();
    if rng.random_bool(0.5) {
        let words: Vec<&str> = title.split_whitespace().collect();
        if !words.is_empty() {
            let idx = rng.random_range(0..words.len());
            let mutated: Vec<String> = words
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    if i == idx {
                        typo(w, rng)
                    } else {
                        w.to_string()
                    }
                })
                .collect();
            title = mutated.join(" ");
        }
    }

    let journal: String = doc
        .journal
        .split_whitespace()
        .map(|w| {
            if rng.random_bool(0.4) {
                abbreviate(w, rng)
            } else {
                w.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ");

    let year = doc.year.expect("synthetic documents have years");
    let pages: Vec<i64> = doc.pages.iter().copied().collect();
    let (p1, p2) = (pages[0], pages[pages.len() - 1]);

    let push_authors = |b: &mut CitationBuilder, rng: &mut ChaCha8Rng| {
        for (i, a) in authors.iter().enumerate() {
            let last = i + 1 == authors.len();
            if last && authors.len() > 1 && rng.random_bool(0.5) {
                b.push("and", Other);
            }
            let sep = if last { "" } else { "," };
            b.push(&format!("{a}{sep}"), Author);
        }
    };

    match rng.random_range(0..3) {
        0 => {
            // Authors. Title. Journal, year, pp. p1-p2.
            push_authors(&mut b, rng);
            b.push(&format!("{title}."), Title);
            b.push(&format!("{journal},"), Source);
            b.push(&format!("{year},"), Year);
            b.push("pp.", Other);
            b.push(&format!("{p1}-{p2}."), Pages);
        }
        1 => {
            // Authors (year) Title. Journal vol:p1-p2.
            push_authors(&mut b, rng);
            b.push("(", Other);
            b.push(&year.to_string(), Year);
            b.push(")", Other);
            b.push(&format!("{title}."), Title);
            b.push(&journal, Source);
            b.push(&format!("{}:", rng.random_range(1..=60)), Other);
            b.push(&format!("{p1}-{p2}."), Pages);
        }
        _ => {
            // Title. Authors. Journal, p1-p2, year.
            b.push(&format!("{title}."), Title);
            push_authors(&mut b, rng);
            b.push(&format!("{journal},"), Source);
            b.push(&format!("{p1}-{p2},"), Pages);
            b.push(&format!("{year}."), Year);
        }
    }
    b.finish(&doc.id)
}

/// The two-template training set used for tagger sanity checks:
/// "I. Surname: Title. Journal, year." and
/// "Surname, I. Title. Journal (year)".
pub fn two_template_sequences(count: usize, seed: u64) -> Vec<LabeledSequence> {
    use TokenLabel::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let family = surname(&mut rng);
            let initial: String = GIVEN_NAMES
                .choose(&mut rng)
                .unwrap()
                .chars()
                .take(1)
                .collect();
            let mut title_words: Vec<String> = (0..rng.random_range(3..=6))
                .map(|_| TITLE_WORDS.choose(&mut rng).unwrap().to_string())
                .collect();
            title_words[0] = capitalize(&title_words[0]);
            let title = title_words.join(" ");
            let journal = generate_journal(&mut rng);
            let year = rng.random_range(1980..=2004);

            let mut b = CitationBuilder::new();
            if rng.random_bool(0.5) {
                b.push(&format!("{initial}.", ), Author);
                b.push(&format!("{family}:"), Author);
                b.push(&format!("{title}."), Title);
                b.push(&format!("{journal},"), Source);
                b.push(&format!("{year}."), Year);
            } else {
                b.push(&format!("{family},"), Author);
                b.push(&format!("{initial}."), Author);
                b.push(&format!("{title}."), Title);
                b.push(&journal, Source);
                b.push("(", Other);
                b.push(&year.to_string(), Year);
                b.push(")", Other);
            }
            let rendered = b.finish("template");
            (rendered.tokens, rendered.labels)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = generate(&SynthConfig::default());
        let b = generate(&SynthConfig::default());
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.renders.len(), b.renders.len());
        for (x, y) in a.renders.iter().zip(&b.renders) {
            assert_eq!(x.text, y.text);
            assert_eq!(x.labels, y.labels);
        }
    }

    #[test]
    fn renders_cover_every_document() {
        let config = SynthConfig {
            documents: 20,
            ..Default::default()
        };
        let corpus = generate(&config);
        assert_eq!(corpus.documents.len(), 20);
        for doc in &corpus.documents {
            let renders: Vec<&RenderedCitation> = corpus
                .renders
                .iter()
                .filter(|r| r.source_doc_id == doc.id)
                .collect();
            assert!((3..=6).contains(&renders.len()));
        }
    }

    #[test]
    fn labels_align_with_tokens() {
        let corpus = generate(&SynthConfig {
            documents: 10,
            ..Default::default()
        });
        for render in &corpus.renders {
            assert_eq!(render.tokens.len(), render.labels.len());
            // Year tokens must include the document's year digits.
            let year_texts: Vec<&str> = render
                .tokens
                .iter()
                .zip(&render.labels)
                .filter(|(_, l)| **l == TokenLabel::Year)
                .map(|(t, _)| t.text.as_str())
                .collect();
            assert!(!year_texts.is_empty(), "no year in {:?}", render.text);
        }
    }

    #[test]
    fn two_template_set_is_parseable() {
        let seqs = two_template_sequences(50, 3);
        assert_eq!(seqs.len(), 50);
        for (tokens, labels) in &seqs {
            assert_eq!(tokens.len(), labels.len());
            assert!(labels.contains(&TokenLabel::Author));
            assert!(labels.contains(&TokenLabel::Title));
            assert!(labels.contains(&TokenLabel::Source));
            assert!(labels.contains(&TokenLabel::Year));
        }
    }
}
