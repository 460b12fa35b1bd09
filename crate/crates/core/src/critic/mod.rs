//! Per-aspect critic: feature extraction, a linear scorer, the pairwise
//! ranking objective and its trainer.
//!
//! Each aspect has an independent head `raw = w·f + b` over an
//! [`FEATURE_DIM`]-long feature vector. Raw scores feed the loss; clipping to
//! `[-2, 2]` happens only when a [`RewardScore`] is produced.

mod features;
mod loss;
mod train;

use serde::{Deserialize, Serialize};

pub use features::{extract_features, AnswerContext, FeatureVector, FEATURE_DIM};
pub use loss::{loss_gradient, pairwise_ranking_loss, sigmoid, softplus, LossError};
pub use train::{
    evaluate_critic, precompute_features, thresholds_from_report, train_critic, AspectEvaluation, EpochRecord,
    ExampleFeatures, TrainConfig, TrainError, TrainingReport,
};

use crate::corpus::Aspect;

pub const REWARD_MIN: f64 = -2.0;
pub const REWARD_MAX: f64 = 2.0;
pub const PARAMS_VERSION: u32 = 1;

pub fn clip_reward(raw: f64) -> f64 {
    raw.clamp(REWARD_MIN, REWARD_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardScore {
    pub aspect: Aspect,
    pub raw: f64,
    pub clipped: f64,
}

impl RewardScore {
    pub fn new(aspect: Aspect, raw: f64) -> Self {
        Self {
            aspect,
            raw,
            clipped: clip_reward(raw),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CriticError {
    #[error("unsupported params version {found}, expected {PARAMS_VERSION}")]
    Version { found: u32 },
    #[error("non-finite parameter in the {0} head")]
    NonFinite(Aspect),
    #[error("malformed params file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AspectHead {
    pub weights: [f64; FEATURE_DIM],
    pub bias: f64,
}

impl AspectHead {
    pub fn raw(&self, features: &FeatureVector) -> f64 {
        self.weights
            .iter()
            .zip(&features.values)
            .map(|(w, f)| w * f)
            .sum::<f64>()
            + self.bias
    }

    fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AspectHeads {
    pub fluency: AspectHead,
    pub correctness: AspectHead,
    pub citation: AspectHead,
}

/// Versioned parameter file: `{"version":1,"aspects":{"fluency":{"weights":[..],"bias":..},..}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticParams {
    pub version: u32,
    pub aspects: AspectHeads,
}

impl Default for CriticParams {
    fn default() -> Self {
        Self {
            version: PARAMS_VERSION,
            aspects: AspectHeads::default(),
        }
    }
}

impl CriticParams {
    pub fn head(&self, aspect: Aspect) -> &AspectHead {
        match aspect {
            Aspect::Fluency => &self.aspects.fluency,
            Aspect::Correctness => &self.aspects.correctness,
            Aspect::Citation => &self.aspects.citation,
        }
    }

    pub fn head_mut(&mut self, aspect: Aspect) -> &mut AspectHead {
        match aspect {
            Aspect::Fluency => &mut self.aspects.fluency,
            Aspect::Correctness => &mut self.aspects.correctness,
            Aspect::Citation => &mut self.aspects.citation,
        }
    }

    pub fn validate(&self) -> Result<(), CriticError> {
        if self.version != PARAMS_VERSION {
            return Err(CriticError::Version { found: self.version });
        }
        for aspect in Aspect::ALL {
            if !self.head(aspect).is_finite() {
                return Err(CriticError::NonFinite(aspect));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, CriticError> {
        let params: Self = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// Anything that rewards an answer context for one aspect.
pub trait Critic: Send + Sync {
    fn score(&self, ctx: &AnswerContext, aspect: Aspect) -> RewardScore;

    fn score_all(&self, ctx: &AnswerContext) -> [RewardScore; 3] {
        Aspect::ALL.map(|aspect| self.score(ctx, aspect))
    }
}

impl Critic for CriticParams {
    fn score(&self, ctx: &AnswerContext, aspect: Aspect) -> RewardScore {
        score_answer(self, ctx, aspect)
    }
}

pub fn score_answer(params: &CriticParams, ctx: &AnswerContext, aspect: Aspect) -> RewardScore {
    let features = extract_features(ctx, aspect);
    RewardScore::new(aspect, params.head(aspect).raw(&features))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{parse_cited_answer, Document, DocumentSet, Question};

    fn ctx() -> AnswerContext {
        AnswerContext::new(
            Question {
                id: "q".into(),
                text: "Who?".into(),
                gold_aspects: vec![],
            },
            DocumentSet::new(vec![Document::new(1, "T", "Alpha beta gamma.")]).unwrap(),
            parse_cited_answer("Alpha beta [1]."),
        )
    }

    #[test]
    fn zero_params_score_zero() {
        let s = score_answer(&CriticParams::default(), &ctx(), Aspect::Citation);
        assert_eq!((s.raw, s.clipped), (0.0, 0.0));
    }

    #[test]
    fn clipping_examples() {
        assert_eq!(RewardScore::new(Aspect::Fluency, 3.7).clipped, 2.0);
        assert_eq!(RewardScore::new(Aspect::Citation, 0.51).clipped, 0.51);
        assert_eq!(RewardScore::new(Aspect::Citation, -9.0).clipped, -2.0);
    }

    #[test]
    fn bias_only_head_scores_bias() {
        let mut p = CriticParams::default();
        p.head_mut(Aspect::Correctness).bias = 3.7;
        let s = p.score(&ctx(), Aspect::Correctness);
        assert_eq!((s.raw, s.clipped), (3.7, 2.0));
    }

    #[test]
    fn params_json_round_trip_and_shape() {
        let mut p = CriticParams::default();
        p.head_mut(Aspect::Fluency).weights[3] = 0.1 + 0.2;
        p.head_mut(Aspect::Citation).bias = -1.0 / 3.0;
        let json = p.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["version"], 1);
        assert!(v["aspects"]["fluency"]["weights"].is_array());
        assert_eq!(CriticParams::from_json(&json).unwrap(), p);
    }

    #[test]
    fn bad_version_rejected() {
        let p = CriticParams {
            version: 7,
            ..CriticParams::default()
        };
        assert!(matches!(
            CriticParams::from_json(&p.to_json()),
            Err(CriticError::Version { found: 7 })
        ));
    }
}
