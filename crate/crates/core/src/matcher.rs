//! Linear max-margin match classifier over similarity features.
//!
//! Training is primal hinge-loss stochastic subgradient descent on a
//! 1/(lambda*t) schedule; the returned weights are the average of the
//! iterates. A logistic calibration (scale, offset) fitted on the training
//! margins turns the raw margin into a score in (0, 1) so that the 50%
//! acceptance threshold is meaningful.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use thiserror::Error;

use crate::similarity::{FeatureMode, SimilarityFeatures};

#[derive(Debug, Error)]
pub enum MatchModelError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains only one class")]
    SingleClass,
    #[error("feature mode mismatch: model is {model}, features are {features}")]
    ModeMismatch {
        model: &'static str,
        features: &'static str,
    },
    #[error("regularization must be positive, got {0}")]
    BadRegularization(f64),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calibrated linear classifier. Weights are aligned with the canonical
/// feature names of the mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub mode: FeatureMode,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Logistic calibration: score = sigmoid(scale * margin + offset).
    pub scale: f64,
    pub offset: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LinearModel {
    /// Raw margin w . f + bias.
    pub fn margin(&self, f: &SimilarityFeatures) -> Result<f64, MatchModelError> {
        if f.mode != self.mode {
            return Err(MatchModelError::ModeMismatch {
                model: self.mode.as_str(),
                features: f.mode.as_str(),
            });
        }
        Ok(self.margin_dense(&f.dense()))
    }

    fn margin_dense(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum::<f64>()
            + self.bias
    }

    /// Calibrated match score in (0, 1), monotone in the raw margin.
    pub fn score(&self, f: &SimilarityFeatures) -> Result<f64, MatchModelError> {
        Ok(sigmoid(self.scale * self.margin(f)? + self.offset))
    }

    const HEADER: &'static str = "citmatch-matcher-v1";

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}\nmode\t{}\nbias\t{}\ncalibration\t{}\t{}\n",
            Self::HEADER,
            self.mode.as_str(),
            self.bias,
            self.scale,
            self.offset
        );
        for (name, w) in self.mode.feature_names().iter().zip(&self.weights) {
            out.push_str(&format!("weight\t{name}\t{w}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<LinearModel, MatchModelError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == Self::HEADER => {}
            other => {
                return Err(MatchModelError::Format {
                    line: 1,
                    message: format!(
                        "expected header {:?}, found {:?}",
                        Self::HEADER,
                        other.map(|(_, l)| l).unwrap_or("")
                    ),
                })
            }
        }
        let mut mode: Option<FeatureMode> = None;
        let mut bias = 0.0;
        let mut scale = 1.0;
        let mut offset = 0.0;
        let mut weights: Vec<(String, f64)> = Vec::new();
        for (i, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| MatchModelError::Format {
                line: i + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            match fields.as_slice() {
                ["mode", m] => {
                    mode = Some(
                        FeatureMode::parse(m).ok_or_else(|| fail(format!("unknown mode {m:?}")))?,
                    )
                }
                ["bias", v] => bias = v.parse().map_err(|e| fail(format!("bad bias: {e}")))?,
                ["calibration", s, o] => {
                    scale = s.parse().map_err(|e| fail(format!("bad scale: {e}")))?;
                    offset = o.parse().map_err(|e| fail(format!("bad offset: {e}")))?;
                }
                ["weight", name, v] => weights.push((
                    name.to_string(),
                    v.parse().map_err(|e| fail(format!("bad weight: {e}")))?,
                )),
                _ => return Err(fail("unrecognized line".into())),
            }
        }
        let mode = mode.ok_or(MatchModelError::Format {
            line: 1,
            message: "missing mode line".into(),
        })?;
        let names = mode.feature_names();
        let mut dense = vec![0.0; names.len()];
        for (name, w) in weights {
            match names.iter().position(|n| *n == name) {
                Some(i) => dense[i] = w,
                None => {
                    return Err(MatchModelError::Format {
                        line: 1,
                        message: format!("feature {name:?} does not belong to mode {}", mode.as_str()),
                    })
                }
            }
        }
        Ok(LinearModel {
            mode,
            weights: dense,
            bias,
            scale,
            offset,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), MatchModelError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LinearModel, MatchModelError> {
        LinearModel::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Binary match decision at a threshold (default 0.5 upstream).
pub fn is_match(score: f64, threshold: f64) -> bool {
    score >= threshold
}

/// Training configuration.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
    /// Fit the logistic calibration on training margins; identity (1, 0)
    /// otherwise.
    pub calibrate: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            lambda: 0.01,
            seed: 1,
            calibrate: true,
        }
    }
}

/// Regularized hinge loss of a weight vector over a dataset.
fn hinge_loss(weights: &[f64], bias: f64, lambda: f64, data: &[(Vec<f64>, f64)]) -> f64 {
    let norm: f64 = weights.iter().map(|w| w * w).sum();
    let hinge: f64 = data
        .iter()
        .map(|(x, y)| {
            let margin: f64 = weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias;
            (1.0 - y * margin).max(0.0)
        })
        .sum::<f64>()
        / data.len() as f64;
    lambda / 2.0 * norm + hinge
}

/// Trains the classifier. See [`train_with_history`].
pub fn train(
    data: &[(SimilarityFeatures, bool)],
    config: TrainConfig,
) -> Result<LinearModel, MatchModelError> {
    train_with_history(data, config).map(|(m, _)| m)
}

/// Trains the classifier and reports the regularized hinge loss of the
/// running averaged weights at each epoch end.
pub fn train_with_history(
    data: &[(SimilarityFeatures, bool)],
    config: TrainConfig,
) -> Result<(LinearModel, Vec<f64>), MatchModelError> {
    if data.is_empty() {
        return Err(MatchModelError::EmptyData);
    }
    if config.lambda <= 0.0 {
        return Err(MatchModelError::BadRegularization(config.lambda));
    }
    let mode = data[0].0.mode;
    let mut saw_pos = false;
    let mut saw_neg = false;
    let mut dense: Vec<(Vec<f64>, f64)> = Vec::with_capacity(data.len());
    for (f, label) in data {
        if f.mode != mode {
            return Err(MatchModelError::ModeMismatch {
                model: mode.as_str(),
                features: f.mode.as_str(),
            });
        }
        saw_pos |= *label;
        saw_neg |= !*label;
        dense.push((f.dense(), if *label { 1.0 } else { -1.0 }));
    }
    if !(saw_pos && saw_neg) {
        return Err(MatchModelError::SingleClass);
    }

    let dim = mode.feature_names().len();
    let lambda = config.lambda;
    let epochs = config.epochs.max(1);
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut sum_w = vec![0.0f64; dim];
    let mut sum_b = 0.0f64;
    let mut steps = 0u64;
    let mut history = Vec::with_capacity(epochs);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dense.len()).collect();

    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (x, y) = &dense[i];
            steps += 1;
            let eta = 1.0 / (lambda * steps as f64);
            let margin: f64 = w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b;
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if *y * margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(x) {
                    *wj += eta * y * xj;
                }
                b += eta * y;
            }
            for (s, wj) in sum_w.iter_mut().zip(&w) {
                *s += *wj;
            }
            sum_b += b;
        }
        let avg_w: Vec<f64> = sum_w.iter().map(|s| s / steps as f64).collect();
        history.push(hinge_loss(&avg_w, sum_b / steps as f64, lambda, &dense));
    }

    let total = steps as f64;
    let weights: Vec<f64> = sum_w.iter().map(|s| s / total).collect();
    let bias = sum_b / total;

    let (scale, offset) = if config.calibrate {
        let margins: Vec<f64> = dense
            .iter()
            .map(|(x, _)| weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + bias)
            .collect();
        let labels: Vec<bool> = dense.iter().map(|(_, y)| *y > 0.0).collect();
        fit_logistic(&margins, &labels)
    } else {
        (1.0, 0.0)
    };

    Ok((
        LinearModel {
            mode,
            weights,
            bias,
            scale,
            offset,
        },
        history,
    ))
}

/// Platt-style logistic fit of p(match | margin) = sigmoid(scale*m + offset),
/// Newton's method with backtracking on smoothed targets. Falls back to the
/// identity calibration if the fit is not increasing in the margin.
fn fit_logistic(margins: &[f64], labels: &[bool]) -> (f64, f64) {
    let n_pos = labels.iter().filter(|&&l| l).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = labels.iter().map(|&l| if l { hi } else { lo }).collect();

    // Parametrization p = 1 / (1 + exp(a*f + b)); a < 0 means increasing.
    let mut a = 0.0f64;
    let mut b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();
    let objective = |a: f64, b: f64| -> f64 {
        margins
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let fapb = a * f + b;
                if fapb >= 0.0 {
                    t * fapb + (1.0 + (-fapb).exp()).ln()
                } else {
                    (t - 1.0) * fapb + (1.0 + fapb.exp()).ln()
                }
            })
            .sum()
    };
    let mut fval = objective(a, b);

    for _ in 0..100 {
        // Gradient and Hessian of the negative log-likelihood.
        let (mut h11, mut h22, mut h21) = (1e-12f64, 1e-12f64, 0.0f64);
        let (mut g1, mut g2) = (0.0f64, 0.0f64);
        for (&f, &t) in margins.iter().zip(&targets) {
            let fapb = a * f + b;
            let (p, q) = if fapb >= 0.0 {
                let e = (-fapb).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = fapb.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0f64;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }

    if a < 0.0 {
        (-a, -b)
    } else {
        log::warn!("calibration fit was not increasing in the margin; using identity");
        (1.0, 0.0)
    }
}

/// One row of a delimited training-data file.
pub fn write_training_tsv(
    path: &Path,
    rows: &[(SimilarityFeatures, bool)],
) -> Result<(), MatchModelError> {
    if rows.is_empty() {
        return Err(MatchModelError::EmptyData);
    }
    let mode = rows[0].0.mode;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}\tlabel", mode.feature_names().join("\t"))?;
    for (f, label) in rows {
        let values: Vec<String> = f.dense().iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{}\t{}",
            values.join("\t"),
            if *label { "match" } else { "non-match" }
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads feature rows; the header determines the mode.
pub fn read_training_tsv(
    path: &Path,
) -> Result<Vec<(SimilarityFeatures, bool)>, MatchModelError> {
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(MatchModelError::EmptyData),
    };
    let cols: Vec<&str> = header.trim_end().split('\t').collect();
    let mode = [FeatureMode::Full, FeatureMode::Pipeline]
        .into_iter()
        .find(|m| {
            let names = m.feature_names();
            cols.len() == names.len() + 1
                && cols[..names.len()] == *names
                && cols[names.len()] == "label"
        })
        .ok_or(MatchModelError::Format {
            line: 1,
            message: "header does not match any feature mode".into(),
        })?;

    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| MatchModelError::Format {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.trim_end().split('\t').collect();
        if fields.len() != cols.len() {
            return Err(fail(format!(
                "expected {} fields, found {}",
                cols.len(),
                fields.len()
            )));
        }
        let mut values = Vec::with_capacity(fields.len() - 1);
        for v in &fields[..fields.len() - 1] {
            values.push(v.parse::<f64>().map_err(|e| fail(format!("bad value: {e}")))?);
        }
        let label = match fields[fields.len() - 1] {
            "match" | "1" => true,
            "non-match" | "0" => false,
            other => return Err(fail(format!("bad label {other:?}"))),
        };
        let features = SimilarityFeatures::from_dense(mode, &values)
            .expect("length checked against header");
        rows.push((features, label));
    }
    if rows.is_empty() {
        return Err(MatchModelError::EmptyData);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn synthetic(n: usize, seed: u64, mode: FeatureMode) -> Vec<(SimilarityFeatures, bool)> {
        // Matches have every feature >= 0.9, non-matches <= 0.1.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dim = mode.feature_names().len();
        (0..n)
            .map(|i| {
                let label = i % 2 == 0;
                let values: Vec<f64> = (0..dim)
                    .map(|_| {
                        if label {
                            rng.random_range(0.9..=1.0)
                        } else {
                            rng.random_range(0.0..=0.1)
                        }
                    })
                    .collect();
                (SimilarityFeatures::from_dense(mode, &values).unwrap(), label)
            })
            .collect()
    }

    #[test]
    fn separable_data_reaches_full_training_accuracy() {
        let data = synthetic(200, 7, FeatureMode::Pipeline);
        let model = train(&data, TrainConfig::default()).unwrap();
        for (f, label) in &data {
            let s = model.score(f).unwrap();
            assert_eq!(is_match(s, 0.5), *label, "score {s} for label {label}");
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synthetic(100, 3, FeatureMode::Full);
        let m1 = train(&data, TrainConfig::default()).unwrap();
        let m2 = train(&data, TrainConfig::default()).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn huge_regularization_pins_scores_to_midpoint() {
        // Calibration refitting would amplify the tiny remaining margins, so
        // the regularization limit is observed with identity calibration.
        let data = synthetic(100, 5, FeatureMode::Pipeline);
        let config = TrainConfig {
            lambda: 1e6,
            calibrate: false,
            ..TrainConfig::default()
        };
        let model = train(&data, config).unwrap();
        assert!(model.weights.iter().all(|w| w.abs() < 1e-3));
        let midpoint = sigmoid(model.offset);
        for (f, _) in &data {
            let s = model.score(f).unwrap();
            assert!((s - midpoint).abs() < 0.05, "score {s} vs midpoint {midpoint}");
        }
    }

    #[test]
    fn loss_history_is_non_increasing_on_separable_data() {
        let data = synthetic(200, 11, FeatureMode::Pipeline);
        let (_, history) = train_with_history(&data, TrainConfig::default()).unwrap();
        for pair in history.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "loss increased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn identity_calibration_maps_zero_margin_to_half() {
        let model = LinearModel {
            mode: FeatureMode::Pipeline,
            weights: vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0],
            bias: 0.0,
            scale: 1.0,
            offset: 0.0,
        };
        let f = SimilarityFeatures::from_dense(
            FeatureMode::Pipeline,
            &[0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        assert!((model.score(&f).unwrap() - 0.5).abs() < 1e-12);
        // Saturation toward 1 for large margins.
        let f = SimilarityFeatures::from_dense(
            FeatureMode::Pipeline,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        )
        .unwrap();
        let mut big = model.clone();
        big.scale = 1000.0;
        assert!(big.score(&f).unwrap() > 0.999);
    }

    #[test]
    fn threshold_semantics() {
        assert!(is_match(0.5, 0.5));
        assert!(!is_match(0.49, 0.5));
        assert!(is_match(0.0, 0.0));
        assert!(is_match(1.0, 1.0));
    }

    #[test]
    fn rejects_bad_training_data() {
        assert!(matches!(
            train(&[], TrainConfig::default()),
            Err(MatchModelError::EmptyData)
        ));
        let one_class: Vec<_> = synthetic(10, 1, FeatureMode::Pipeline)
            .into_iter()
            .map(|(f, _)| (f, true))
            .collect();
        assert!(matches!(
            train(&one_class, TrainConfig::default()),
            Err(MatchModelError::SingleClass)
        ));
        let mut mixed = synthetic(4, 1, FeatureMode::Pipeline);
        mixed.push(synthetic(2, 2, FeatureMode::Full).pop().unwrap());
        assert!(matches!(
            train(&mixed, TrainConfig::default()),
            Err(MatchModelError::ModeMismatch { .. })
        ));
        let config = TrainConfig {
            lambda: 0.0,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&synthetic(10, 1, FeatureMode::Pipeline), config),
            Err(MatchModelError::BadRegularization(_))
        ));
    }

    #[test]
    fn model_text_round_trip() {
        let data = synthetic(50, 9, FeatureMode::Pipeline);
        let model = train(&data, TrainConfig::default()).unwrap();
        let back = LinearModel::from_text(&model.to_text()).unwrap();
        assert_eq!(model, back);
        assert!(LinearModel::from_text("garbage").is_err());
    }

    #[test]
    fn training_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.tsv");
        let rows = synthetic(20, 13, FeatureMode::Full);
        write_training_tsv(&path, &rows).unwrap();
        let back = read_training_tsv(&path).unwrap();
        assert_eq!(rows.len(), back.len());
        for ((f1, l1), (f2, l2)) in rows.iter().zip(&back) {
            assert_eq!(l1, l2);
            assert_eq!(f1.dense(), f2.dense());
        }
    }

    #[test]
    fn score_monotone_in_positive_weight_feature() {
        let data = synthetic(100, 21, FeatureMode::Pipeline);
        let model = train(&data, TrainConfig::default()).unwrap();
        let idx = model
            .weights
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        assert!(model.weights[idx] > 0.0);
        let mut lo = vec![0.3; 6];
        let mut hi = vec![0.3; 6];
        lo[idx] = 0.2;
        hi[idx] = 0.8;
        let f_lo = SimilarityFeatures::from_dense(FeatureMode::Pipeline, &lo).unwrap();
        let f_hi = SimilarityFeatures::from_dense(FeatureMode::Pipeline, &hi).unwrap();
        assert!(model.score(&f_hi).unwrap() > model.score(&f_lo).unwrap());
    }
}
