//! Pairwise ranking objective `L = Σ_{j∈pos, i∈neg} ln(1 + exp(s_i − s_j))`
//! and its gradient with respect to one linear head.

use super::{extract_features, AnswerContext, CriticParams, FeatureVector, FEATURE_DIM};
use crate::corpus::CritiqueExample;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("pairwise ranking loss needs at least one positive and one negative score")]
    EmptyScores,
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn pairwise_ranking_loss(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64, LossError> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(LossError::EmptyScores);
    }
    let mut total = 0.0;
    for pos in pos_scores {
        for neg in neg_scores {
            total += softplus(neg - pos);
        }
    }
    Ok(total)
}

/// Loss and weight gradient of one head on precomputed features. The bias
/// cancels in every pair, so its gradient is always zero.
pub(crate) fn head_loss_and_gradient(
    weights: &[f64; FEATURE_DIM],
    positives: &[FeatureVector],
    negatives: &[FeatureVector],
) -> (f64, [f64; FEATURE_DIM]) {
    let dot = |f: &FeatureVector| -> f64 { weights.iter().zip(&f.values).map(|(w, x)| w * x).sum() };
    let mut loss = 0.0;
    let mut grad = [0.0; FEATURE_DIM];
    for pos in positives {
        let sp = dot(pos);
        for neg in negatives {
            let margin = dot(neg) - sp;
            loss += softplus(margin);
            let coef = sigmoid(margin);
            for (g, (n, p)) in grad.iter_mut().zip(neg.values.iter().zip(&pos.values)) {
                *g += coef * (n - p);
            }
        }
    }
    (loss, grad)
}

/// Gradient of the example's loss, laid out like the params. Only the head of
/// the example's aspect is non-zero.
pub fn loss_gradient(params: &CriticParams, example: &CritiqueExample) -> CriticParams {
    let features = |answer| {
        let ctx = AnswerContext::new(example.question.clone(), example.docs.clone(), answer);
        extract_features(&ctx, example.aspect)
    };
    let pos = [features(example.positive.clone())];
    let negs: Vec<FeatureVector> = example.negatives.iter().cloned().map(features).collect();
    let (_, grad) = head_loss_and_gradient(&params.head(example.aspect).weights, &pos, &negs);
    let mut out = CriticParams::default();
    out.head_mut(example.aspect).weights = grad;
    out
}
