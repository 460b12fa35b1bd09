//! Gradient-descent trainer for the three heads.
//!
//! The objective per head is the mean example loss plus `l2/2 · |w|²`.
//! Examples are split into train and held-out sets by question id so that
//! no question contributes to both.
//!
//! The loss only sees score differences, so it leaves the bias untouched.
//! After training, each head's bias is set so that the midpoint of the mean
//! positive and mean negative training scores sits at zero, which keeps
//! clipped rewards centred in `[-2, 2]`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::head_loss_and_gradient;
use super::{clip_reward, extract_features, AnswerContext, CriticParams, FeatureVector, FEATURE_DIM};
use crate::corpus::{Aspect, CritiqueExample};
use crate::feedback::{AspectThresholds, BandThresholds, FeedbackError};
use crate::seeded_rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("loss became non-finite for aspect {aspect} at epoch {epoch} (weight norm {weight_norm})")]
    NonFinite {
        aspect: Aspect,
        epoch: usize,
        weight_norm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub l2: f64,
    /// Fraction of questions held out for evaluation.
    pub holdout: f64,
    /// `None` is full-batch; otherwise seeded-shuffle mini-batches.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rate: 0.1,
            epochs: 200,
            seed: 0,
            l2: 1e-4,
            holdout: 0.2,
            batch_size: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(TrainError::Config(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(TrainError::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(TrainError::Config(format!(
                "holdout must be in [0, 1), got {}",
                self.holdout
            )));
        }
        if self.batch_size == Some(0) {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Features of one example, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleFeatures {
    pub question_id: String,
    pub aspect: Aspect,
    pub positives: Vec<FeatureVector>,
    pub negatives: Vec<FeatureVector>,
}

pub fn precompute_features(dataset: &[CritiqueExample]) -> Vec<ExampleFeatures> {
    dataset
        .iter()
        .map(|ex| {
            let features = |answer: &crate::answer::CitedAnswer| {
                let ctx = AnswerContext::new(ex.question.clone(), ex.docs.clone(), answer.clone());
                extract_features(&ctx, ex.aspect)
            };
            ExampleFeatures {
                question_id: ex.question.id.clone(),
                aspect: ex.aspect,
                positives: vec![features(&ex.positive)],
                negatives: ex.negatives.iter().map(features).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Training objective per aspect after the epoch's updates.
    pub loss: BTreeMap<Aspect, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectEvaluation {
    pub aspect: Aspect,
    pub examples: usize,
    /// Fraction of (positive, negative) pairs ranked strictly correctly.
    pub accuracy: f64,
    /// Mean clipped reward of positives.
    pub avg_positive: f64,
    /// Mean clipped reward of negatives.
    pub avg_negative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub config: TrainConfig,
    pub train_questions: usize,
    pub heldout_questions: usize,
    pub epochs: Vec<EpochRecord>,
    /// Held-out evaluation, or training-set evaluation when nothing is held out.
    pub evaluation: Vec<AspectEvaluation>,
}

fn objective(weights: &[f64; FEATURE_DIM], examples: &[&ExampleFeatures], l2: f64) -> (f64, [f64; FEATURE_DIM]) {
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURE_DIM];
    for ex in examples {
        let (l, g) = head_loss_and_gradient(weights, &ex.positives, &ex.negatives);
        loss += l;
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    let n = examples.len().max(1) as f64;
    let norm_sq: f64 = weights.iter().map(|w| w * w).sum();
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (loss / n + 0.5 * l2 * norm_sq, grad)
}

fn split_questions(features: &[ExampleFeatures], config: &TrainConfig) -> BTreeSet<String> {
    let mut ids: Vec<String> = features
        .iter()
        .map(|f| f.question_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if ids.len() < 2 || config.holdout == 0.0 {
        return BTreeSet::new();
    }
    ids.shuffle(&mut seeded_rng(config.seed, 20));
    let n_held = ((ids.len() as f64 * config.holdout).round() as usize).clamp(1, ids.len() - 1);
    ids.into_iter().take(n_held).collect()
}

/// Trains three independent heads from zero weights. Deterministic given
/// the dataset order and `config.seed`.
pub fn train_critic(
    dataset: &[CritiqueExample],
    config: &TrainConfig,
) -> Result<(CriticParams, TrainingReport), TrainError> {
    train_on_features(&precompute_features(dataset), config)
}

pub(crate) fn train_on_features(
    features: &[ExampleFeatures],
    config: &TrainConfig,
) -> Result<(CriticParams, TrainingReport), TrainError> {
    config.validate()?;
    if features.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let heldout_ids = split_questions(features, config);
    let (heldout, train): (Vec<&ExampleFeatures>, Vec<&ExampleFeatures>) =
        features.iter().partition(|f| heldout_ids.contains(&f.question_id));
    let train_questions = train.iter().map(|f| &f.question_id).collect::<BTreeSet<_>>().len();

    let mut params = CriticParams::default();
    let mut epochs: Vec<EpochRecord> = (0..config.epochs)
        .map(|epoch| EpochRecord {
            epoch,
            loss: BTreeMap::new(),
        })
        .collect();

    for aspect in Aspect::ALL {
        let mut subset: Vec<&ExampleFeatures> = train.iter().copied().filter(|f| f.aspect == aspect).collect();
        if subset.is_empty() {
            continue;
        }
        let mut rng = seeded_rng(config.seed, 30 + aspect.ordinal());
        let mut weights = [0.0; FEATURE_DIM];
        for record in epochs.iter_mut() {
            match config.batch_size {
                None => {
                    let (_, grad) = objective(&weights, &subset, config.l2);
                    step(&mut weights, &grad, config.rate);
                }
                Some(size) => {
                    subset.shuffle(&mut rng);
                    for batch in subset.chunks(size) {
                        let (_, grad) = objective(&weights, batch, config.l2);
                        step(&mut weights, &grad, config.rate);
                    }
                }
            }
            let (loss, _) = objective(&weights, &subset, config.l2);
            if !loss.is_finite() {
                return Err(TrainError::NonFinite {
                    aspect,
                    epoch: record.epoch,
                    weight_norm: weights.iter().map(|w| w * w).sum::<f64>().sqrt(),
                });
            }
            record.loss.insert(aspect, loss);
        }
        params.head_mut(aspect).weights = weights;
        params.head_mut(aspect).bias = centring_bias(&weights, &subset);
    }

    let eval_set: Vec<ExampleFeatures> = if heldout.is_empty() { train } else { heldout }
        .into_iter()
        .cloned()
        .collect();
    let report = TrainingReport {
        config: *config,
        train_questions,
        heldout_questions: heldout_ids.len(),
        epochs,
        evaluation: evaluate_features(&params, &eval_set),
    };
    Ok((params, report))
}

fn centring_bias(weights: &[f64; FEATURE_DIM], examples: &[&ExampleFeatures]) -> f64 {
    let dot = |f: &FeatureVector| -> f64 { weights.iter().zip(&f.values).map(|(w, x)| w * x).sum() };
    let mean = |fs: &mut dyn Iterator<Item = &FeatureVector>| {
        let (sum, n) = fs.fold((0.0, 0usize), |(s, n), f| (s + dot(f), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    };
    let pos = mean(&mut examples.iter().flat_map(|e| e.positives.iter()));
    let neg = mean(&mut examples.iter().flat_map(|e| e.negatives.iter()));
    -(pos + neg) / 2.0
}

fn step(weights: &mut [f64; FEATURE_DIM], grad: &[f64; FEATURE_DIM], rate: f64) {
    for (w, g) in weights.iter_mut().zip(grad) {
        *w -= rate * g;
    }
}

pub(crate) fn evaluate_features(params: &CriticParams, features: &[ExampleFeatures]) -> Vec<AspectEvaluation> {
    Aspect::ALL
        .into_iter()
        .map(|aspect| {
            let head = params.head(aspect);
            let mut examples = 0;
            let (mut pairs, mut correct) = (0usize, 0usize);
            let (mut pos_sum, mut pos_n, mut neg_sum, mut neg_n) = (0.0, 0usize, 0.0, 0usize);
            for ex in features.iter().filter(|f| f.aspect == aspect) {
                examples += 1;
                let pos: Vec<f64> = ex.positives.iter().map(|f| head.raw(f)).collect();
                let neg: Vec<f64> = ex.negatives.iter().map(|f| head.raw(f)).collect();
                for p in &pos {
                    for n in &neg {
                        pairs += 1;
                        if p > n {
                            correct += 1;
                        }
                    }
                }
                pos_sum += pos.iter().map(|s| clip_reward(*s)).sum::<f64>();
                pos_n += pos.len();
                neg_sum += neg.iter().map(|s| clip_reward(*s)).sum::<f64>();
                neg_n += neg.len();
            }
            let mean = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
            AspectEvaluation {
                aspect,
                examples,
                accuracy: mean(correct as f64, pairs),
                avg_positive: mean(pos_sum, pos_n),
                avg_negative: mean(neg_sum, neg_n),
            }
        })
        .collect()
}

/// Pairwise accuracy and average clipped rewards per aspect.
pub fn evaluate_critic(params: &CriticParams, dataset: &[CritiqueExample]) -> Vec<AspectEvaluation> {
    evaluate_features(params, &precompute_features(dataset))
}

/// Band thresholds taken from measured average rewards.
pub fn thresholds_from_report(evaluation: &[AspectEvaluation]) -> Result<BandThresholds, FeedbackError> {
    let mut thresholds = BandThresholds::default();
    for aspect in Aspect::ALL {
        let e = evaluation
            .iter()
            .find(|e| e.aspect == aspect)
            .ok_or(FeedbackError::AspectCoverage(aspect))?;
        thresholds.set(
            aspect,
            AspectThresholds {
                avg_positive: e.avg_positive,
                avg_negative: e.avg_negative,
            },
        );
    }
    thresholds.validate()?;
    Ok(thresholds)
}
