//! Reward bands and the natural-language feedback sent back to the
//! generator.
//!
//! A clipped reward at or above an aspect's average positive reward earns
//! [`Band::Praise`], one at or below the average negative reward earns
//! [`Band::Corrective`], and anything in between [`Band::Improve`].
//!
//! Praise texts and the fluency and citation Improve texts are the
//! established exemplar wording. The correctness Improve text and all
//! Corrective texts are authored here; they mirror the exemplars with
//! stronger directives.

use serde::{Deserialize, Serialize};

use crate::answer::{render_cited_answer, CitedAnswer, DocumentSet, Question};
use crate::corpus::{format_question_and_docs, Aspect};
use crate::critic::RewardScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Praise,
    Improve,
    Corrective,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeedbackError {
    #[error("thresholds for {0}: average positive reward must exceed average negative reward")]
    InvalidThresholds(Aspect),
    #[error("feedback must contain exactly one item per aspect; {0} is missing or duplicated")]
    AspectCoverage(Aspect),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AspectThresholds {
    pub avg_positive: f64,
    pub avg_negative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandThresholds {
    pub fluency: AspectThresholds,
    pub correctness: AspectThresholds,
    pub citation: AspectThresholds,
}

impl Default for BandThresholds {
    /// Average positive/negative rewards of the reference critic.
    fn default() -> Self {
        Self {
            fluency: AspectThresholds {
                avg_positive: -0.35,
                avg_negative: -1.36,
            },
            correctness: AspectThresholds {
                avg_positive: 1.12,
                avg_negative: -1.25,
            },
            citation: AspectThresholds {
                avg_positive: 0.93,
                avg_negative: -1.75,
            },
        }
    }
}

impl BandThresholds {
    pub fn get(&self, aspect: Aspect) -> AspectThresholds {
        match aspect {
            Aspect::Fluency => self.fluency,
            Aspect::Correctness => self.correctness,
            Aspect::Citation => self.citation,
        }
    }

    pub fn set(&mut self, aspect: Aspect, value: AspectThresholds) {
        match aspect {
            Aspect::Fluency => self.fluency = value,
            Aspect::Correctness => self.correctness = value,
            Aspect::Citation => self.citation = value,
        }
    }

    pub fn validate(&self) -> Result<(), FeedbackError> {
        for aspect in Aspect::ALL {
            let t = self.get(aspect);
            if t.avg_positive.partial_cmp(&t.avg_negative) != Some(std::cmp::Ordering::Greater) {
                return Err(FeedbackError::InvalidThresholds(aspect));
            }
        }
        Ok(())
    }
}

pub fn classify_reward_band(score: &RewardScore, thresholds: &BandThresholds) -> Band {
    let t = thresholds.get(score.aspect);
    if score.clipped >= t.avg_positive {
        Band::Praise
    } else if score.clipped <= t.avg_negative {
        Band::Corrective
    } else {
        Band::Improve
    }
}

pub fn render_feedback(aspect: Aspect, band: Band) -> &'static str {
    match (aspect, band) {
        (Aspect::Fluency, Band::Praise) => "For the fluency aspect, you did great.",
        (Aspect::Fluency, Band::Improve) => {
            "For the fluency aspect, try to provide a more concise and non-repetitive response."
        }
        (Aspect::Fluency, Band::Corrective) => {
            "For the fluency aspect, the response repeats words and phrases. Remove every repetition and rewrite the answer concisely."
        }
        (Aspect::Correctness, Band::Praise) => "For the correctness aspect, you did great.",
        (Aspect::Correctness, Band::Improve) => {
            "For the correctness aspect, try to use more of the facts given in the provided search results."
        }
        (Aspect::Correctness, Band::Corrective) => {
            "For the correctness aspect, the response contains information that is not in the search results. Answer using only facts stated in the provided search results."
        }
        (Aspect::Citation, Band::Praise) => "For the citation aspect, you did great.",
        (Aspect::Citation, Band::Improve) => {
            "For the citation aspect, you have cited the appropriate search results, but try to cite more specifically by mentioning the search result number for each citation."
        }
        (Aspect::Citation, Band::Corrective) => {
            "For the citation aspect, the cited search results do not support the statements. Cite the search result number that supports each sentence."
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub aspect: Aspect,
    pub score: RewardScore,
    pub band: Band,
    pub text: String,
}

impl FeedbackItem {
    pub fn from_score(score: RewardScore, thresholds: &BandThresholds) -> Self {
        let band = classify_reward_band(&score, thresholds);
        Self {
            aspect: score.aspect,
            score,
            band,
            text: render_feedback(score.aspect, band).to_string(),
        }
    }
}

/// Line prefix carrying the previous answer in a refinement prompt.
pub const PREVIOUS_ANSWER_PREFIX: &str = "Previous answer: ";

pub const REFINEMENT_INSTRUCTION: &str =
    "Use the feedback given on Fluency, Correctness, and Citation to continually refine the previous answer for higher quality.";

/// Puts `items` in canonical aspect order, requiring exactly one per aspect.
pub fn canonical_feedback(items: &[FeedbackItem]) -> Result<[&FeedbackItem; 3], FeedbackError> {
    let pick = |aspect: Aspect| -> Result<&FeedbackItem, FeedbackError> {
        let mut matching = items.iter().filter(|i| i.aspect == aspect);
        match (matching.next(), matching.next()) {
            (Some(item), None) => Ok(item),
            _ => Err(FeedbackError::AspectCoverage(aspect)),
        }
    };
    if items.len() != 3 {
        for aspect in Aspect::ALL {
            pick(aspect)?;
        }
    }
    Ok([
        pick(Aspect::Fluency)?,
        pick(Aspect::Correctness)?,
        pick(Aspect::Citation)?,
    ])
}

pub fn build_refinement_prompt(
    question: &Question,
    docs: &DocumentSet,
    previous_answer: &CitedAnswer,
    feedback: &[FeedbackItem],
) -> Result<String, FeedbackError> {
    let ordered = canonical_feedback(feedback)?;
    let mut out = format!(
        "{REFINEMENT_INSTRUCTION}\n\n{}\n{PREVIOUS_ANSWER_PREFIX}{}\n\nFeedback:\n",
        format_question_and_docs(question, docs),
        render_cited_answer(previous_answer)
    );
    for item in ordered {
        out.push_str(&item.text);
        out.push('\n');
    }
    out.push_str("\nRefined answer:");
    Ok(out)
}
