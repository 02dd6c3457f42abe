//! Linear sequence tagger: Viterbi decoding over per-label emission weights
//! and label-transition weights, trained with the averaged structured
//! perceptron. Unseen features score 0. Ties resolve to the first label in
//! canonical order.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use super::features::{FeatureExtractor, FeatureVector};
use super::{LabeledSequence, TokenLabel, LABELS, NUM_LABELS};
use crate::tokenizer::Token;

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("training sequence {0} is empty")]
    EmptySequence(usize),
    #[error("training sequence {0} has {tokens} tokens but {labels} labels", tokens = .1, labels = .2)]
    LengthMismatch(usize, usize, usize),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature and transition weights of a trained tagger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggerModel {
    feature_names: Vec<String>,
    emission: Vec<[f64; NUM_LABELS]>,
    transition: [[f64; NUM_LABELS]; NUM_LABELS],
}

const MODEL_HEADER: &str = "citmatch-tagger-v1";

impl TaggerModel {
    /// A model with no weights; every input decodes to all-Author by the
    /// canonical tie-break.
    pub fn zero() -> TaggerModel {
        TaggerModel::default()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn transition(&self) -> &[[f64; NUM_LABELS]; NUM_LABELS] {
        &self.transition
    }

    /// Versioned flat text: one line per nonzero (feature, label, weight)
    /// and (label, label, weight).
    pub fn to_text(&self) -> String {
        let mut out = String::from(MODEL_HEADER);
        out.push('\n');
        for (name, row) in self.feature_names.iter().zip(&self.emission) {
            for (l, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    out.push_str(&format!("feature\t{name}\t{}\t{w}\n", LABELS[l]));
                }
            }
        }
        for (a, row) in self.transition.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if w != 0.0 {
                    out.push_str(&format!("transition\t{}\t{}\t{w}\n", LABELS[a], LABELS[b]));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<TaggerModel, TaggerError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == MODEL_HEADER => {}
            other => {
                return Err(TaggerError::Format {
                    line: 1,
                    message: format!(
                        "expected header {MODEL_HEADER:?}, found {:?}",
                        other.map(|(_, l)| l).unwrap_or("")
                    ),
                })
            }
        }
        let mut model = TaggerModel::default();
        let mut rows: HashMap<String, usize> = HashMap::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| TaggerError::Format {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["feature", name, label, weight] => {
                    let label: TokenLabel =
                        label.parse().map_err(|e: String| fail(e.clone()))?;
                    let weight: f64 = weight
                        .parse()
                        .map_err(|e| fail(format!("bad weight: {e}")))?;
                    let row = *rows.entry(name.to_string()).or_insert_with(|| {
                        model.feature_names.push(name.to_string());
                        model.emission.push([0.0; NUM_LABELS]);
                        model.emission.len() - 1
                    });
                    model.emission[row][label.index()] = weight;
                }
                ["transition", from, to, weight] => {
                    let from: TokenLabel = from.parse().map_err(|e: String| fail(e.clone()))?;
                    let to: TokenLabel = to.parse().map_err(|e: String| fail(e.clone()))?;
                    let weight: f64 = weight
                        .parse()
                        .map_err(|e| fail(format!("bad weight: {e}")))?;
                    model.transition[from.index()][to.index()] = weight;
                }
                _ => return Err(fail("expected feature or transition line".into())),
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), TaggerError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TaggerModel, TaggerError> {
        TaggerModel::from_text(&std::fs::read_to_string(path)?)
    }
}

/// A model bound to a feature extractor for decoding.
///
/// Binding resolves the model's feature names against the extractor's
/// inventory once; model features outside the inventory can never fire and
/// are dropped with a warning.
pub struct Tagger<'a> {
    fx: &'a FeatureExtractor,
    emission: Vec<[f64; NUM_LABELS]>,
    transition: [[f64; NUM_LABELS]; NUM_LABELS],
}

impl<'a> Tagger<'a> {
    pub fn new(model: &TaggerModel, fx: &'a FeatureExtractor) -> Tagger<'a> {
        let mut emission = vec![[0.0; NUM_LABELS]; fx.inventory().len()];
        let ids: HashMap<&str, usize> = fx
            .inventory()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut unknown = 0usize;
        for (name, row) in model.feature_names.iter().zip(&model.emission) {
            match ids.get(name.as_str()) {
                Some(&i) => emission[i] = *row,
                None => unknown += 1,
            }
        }
        if unknown > 0 {
            log::warn!(
                "{unknown} model feature(s) are not in the extractor inventory; \
                 check that dictionaries and word lists match the training setup"
            );
        }
        Tagger {
            fx,
            emission,
            transition: model.transition,
        }
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        self.fx
    }

    /// Viterbi-optimal label sequence; one label per token.
    pub fn tag(&self, tokens: &[Token]) -> Vec<TokenLabel> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let emissions: Vec<[f64; NUM_LABELS]> = (0..tokens.len())
            .map(|i| self.score_position(&self.fx.extract(tokens, i)))
            .collect();
        viterbi(&emissions, &self.transition)
            .into_iter()
            .map(TokenLabel::from_index)
            .collect()
    }

    fn score_position(&self, features: &FeatureVector) -> [f64; NUM_LABELS] {
        let mut scores = [0.0; NUM_LABELS];
        for &id in features.active_ids() {
            let row = &self.emission[id as usize];
            for l in 0..NUM_LABELS {
                scores[l] += row[l];
            }
        }
        scores
    }

    /// Total path score of a specific label sequence, used to check Viterbi
    /// optimality.
    pub fn sequence_score(&self, tokens: &[Token], labels: &[TokenLabel]) -> f64 {
        assert_eq!(tokens.len(), labels.len());
        let mut score = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            score += self.score_position(&self.fx.extract(tokens, i))[label.index()];
            if i > 0 {
                score += self.transition[labels[i - 1].index()][label.index()];
            }
        }
        score
    }
}

/// Decodes the best label path. Ties resolve to the smallest label index,
/// so a zero-weight model yields all-Author.
fn viterbi(emissions: &[[f64; NUM_LABELS]], transition: &[[f64; NUM_LABELS]; NUM_LABELS]) -> Vec<usize> {
    let n = emissions.len();
    let mut best = vec![[0.0f64; NUM_LABELS]; n];
    let mut back = vec![[0usize; NUM_LABELS]; n];
    best[0] = emissions[0];
    for t in 1..n {
        for l in 0..NUM_LABELS {
            let mut arg = 0usize;
            let mut score = best[t - 1][0] + transition[0][l];
            for p in 1..NUM_LABELS {
                let s = best[t - 1][p] + transition[p][l];
                if s > score {
                    score = s;
                    arg = p;
                }
            }
            best[t][l] = score + emissions[t][l];
            back[t][l] = arg;
        }
    }
    let mut last = 0usize;
    for l in 1..NUM_LABELS {
        if best[n - 1][l] > best[n - 1][last] {
            last = l;
        }
    }
    let mut path = vec![0usize; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = back[t][path[t]];
    }
    path
}

/// Averaged structured perceptron training over Viterbi decoding.
///
/// Deterministic for a fixed corpus order and seed; the example order is
/// reshuffled each epoch from a seeded generator. Returns averaged weights.
pub fn train_tagger(
    corpus: &[LabeledSequence],
    epochs: usize,
    fx: &FeatureExtractor,
    seed: u64,
) -> Result<TaggerModel, TaggerError> {
    if corpus.is_empty() {
        return Err(TaggerError::EmptyCorpus);
    }
    for (i, (tokens, labels)) in corpus.iter().enumerate() {
        if tokens.is_empty() {
            return Err(TaggerError::EmptySequence(i));
        }
        if tokens.len() != labels.len() {
            return Err(TaggerError::LengthMismatch(i, tokens.len(), labels.len()));
        }
    }
    let epochs = epochs.max(1);

    let features: Vec<Vec<FeatureVector>> = corpus
        .iter()
        .map(|(tokens, _)| (0..tokens.len()).map(|i| fx.extract(tokens, i)).collect())
        .collect();

    let inventory = fx.inventory().len();
    let mut emission = vec![[0.0f64; NUM_LABELS]; inventory];
    let mut emission_acc = vec![[0.0f64; NUM_LABELS]; inventory];
    let mut transition = [[0.0f64; NUM_LABELS]; NUM_LABELS];
    let mut transition_acc = [[0.0f64; NUM_LABELS]; NUM_LABELS];

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let total_steps = (epochs * corpus.len()) as f64;
    let mut step = 0f64; // completed steps before the current one

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &idx in &order {
            let (_, gold) = &corpus[idx];
            let feats = &features[idx];

            let emissions: Vec<[f64; NUM_LABELS]> = feats
                .iter()
                .map(|f| {
                    let mut scores = [0.0; NUM_LABELS];
                    for &id in f.active_ids() {
                        let row = &emission[id as usize];
                        for l in 0..NUM_LABELS {
                            scores[l] += row[l];
                        }
                    }
                    scores
                })
                .collect();
            let pred = viterbi(&emissions, &transition);

            for (t, f) in feats.iter().enumerate() {
                let g = gold[t].index();
                let p = pred[t];
                if g != p {
                    for &id in f.active_ids() {
                        let row = &mut emission[id as usize];
                        row[g] += 1.0;
                        row[p] -= 1.0;
                        let acc = &mut emission_acc[id as usize];
                        acc[g] += step;
                        acc[p] -= step;
                    }
                }
                if t > 0 {
                    let gp = (gold[t - 1].index(), g);
                    let pp = (pred[t - 1], p);
                    if gp != pp {
                        transition[gp.0][gp.1] += 1.0;
                        transition_acc[gp.0][gp.1] += step;
                        transition[pp.0][pp.1] -= 1.0;
                        transition_acc[pp.0][pp.1] -= step;
                    }
                }
            }
            step += 1.0;
        }
    }

    // Averaged weights: mean over the weight vector after each step equals
    // w_final - acc / T when acc accumulates (steps before update) * delta.
    let mut model = TaggerModel {
        feature_names: fx.inventory().to_vec(),
        emission: Vec::with_capacity(inventory),
        transition: [[0.0; NUM_LABELS]; NUM_LABELS],
    };
    for (w, acc) in emission.iter().zip(&emission_acc) {
        let mut row = [0.0; NUM_LABELS];
        for l in 0..NUM_LABELS {
            row[l] = w[l] - acc[l] / total_steps;
        }
        model.emission.push(row);
    }
    for a in 0..NUM_LABELS {
        for b in 0..NUM_LABELS {
            model.transition[a][b] = transition[a][b] - transition_acc[a][b] / total_steps;
        }
    }
    Ok(model)
}
