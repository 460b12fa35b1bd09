//! The iterative feedback loop.
//!
//! Iteration 0 generates a base answer from the instruction prompt with one
//! worked example. Every later iteration scores the previous answer, turns
//! the clipped rewards into feedback and asks the generator for a refined
//! answer. The loop stops after `max_iterations` refinements, when all three
//! aspects are praised, or when the generator fails.

mod batch;
mod report;

use std::sync::LazyLock;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use batch::{read_run_log, run_batch, run_log_lines, write_run_log, RunLogLine, RunManifest};
pub use report::{aggregate_report, default_references, EvalSettings, IflReport, ReportRow, REPORT_COLUMNS};

use crate::answer::{parse_cited_answer, render_cited_answer, CitedAnswer, DocumentSet, Question};
use crate::corpus::{build_aspect_prompt, CorpusError, CorpusRecord, PromptKind};
use crate::critic::{AnswerContext, Critic, RewardScore};
use crate::feedback::{build_refinement_prompt, Band, BandThresholds, FeedbackError, FeedbackItem};
use crate::gateway::{DecodeParams, GatewayError, GenerationRequest, Generator};
use crate::metrics::MetricError;

#[derive(Debug, thiserror::Error)]
pub enum IflError {
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] CorpusError),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("base generation failed for question {question_id}: {source}")]
    BaseGeneration { question_id: String, source: GatewayError },
    #[error("no run for question {0}")]
    MissingQuestion(String),
    #[error("no runs to aggregate")]
    EmptyRuns,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("run log: {0}")]
    Log(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IflConfig {
    /// Refinement rounds after the base answer.
    pub max_iterations: usize,
    pub early_stop_all_praise: bool,
    pub seed: u64,
    /// Questions processed concurrently by [`run_batch`].
    pub parallelism: usize,
    pub decode: DecodeParams,
}

impl Default for IflConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2,
            early_stop_all_praise: true,
            seed: 0,
            parallelism: 4,
            decode: DecodeParams::default(),
        }
    }
}

impl IflConfig {
    pub fn validate(&self) -> Result<(), IflError> {
        if self.max_iterations == 0 {
            return Err(IflError::Config("max_iterations must be at least 1".into()));
        }
        if self.parallelism == 0 {
            return Err(IflError::Config("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    MaxIterations,
    AllPraise,
    GeneratorError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub prompt: String,
    pub answer: CitedAnswer,
    pub scores: Vec<RewardScore>,
    pub feedback: Vec<FeedbackItem>,
    /// Kept out of run logs so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IflRun {
    pub question_id: String,
    pub records: Vec<IterationRecord>,
    pub final_answer: CitedAnswer,
    pub stop_reason: StopReason,
    /// Generator error that ended the run, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl IflRun {
    /// Answer after `iteration` refinements, carrying the last answer forward
    /// when the run stopped earlier.
    pub fn answer_at(&self, iteration: usize) -> &CitedAnswer {
        let i = iteration.min(self.records.len() - 1);
        &self.records[i].answer
    }
}

static ONE_SHOT: LazyLock<CorpusRecord> = LazyLock::new(|| {
    serde_json::from_str(include_str!("../../fixtures/one_shot.json")).expect("one-shot fixture parses")
});

/// The worked `(prompt, answer)` example shown before the base prompt.
pub fn one_shot_example() -> (String, String) {
    let record = &*ONE_SHOT;
    let prompt =
        build_aspect_prompt(PromptKind::Positive, &record.to_question(), &record.docs).expect("fixture has documents");
    let answer = render_cited_answer(record.answer.as_ref().expect("fixture has an answer"));
    (prompt, answer)
}

fn score_and_feedback(
    ctx: &AnswerContext,
    critic: &dyn Critic,
    thresholds: &BandThresholds,
) -> (Vec<RewardScore>, Vec<FeedbackItem>) {
    let scores = critic.score_all(ctx).to_vec();
    let feedback = scores
        .iter()
        .map(|s| FeedbackItem::from_score(*s, thresholds))
        .collect();
    (scores, feedback)
}

pub fn run_ifl(
    question: &Question,
    docs: &DocumentSet,
    generator: &dyn Generator,
    critic: &dyn Critic,
    thresholds: &BandThresholds,
    config: &IflConfig,
) -> Result<IflRun, IflError> {
    config.validate()?;
    thresholds.validate()?;
    let base_prompt = build_aspect_prompt(PromptKind::Positive, question, docs)?;
    let request = |user: String, in_context| GenerationRequest {
        system: String::new(),
        user,
        in_context,
        decode: config.decode,
    };

    let started = Instant::now();
    let raw = generator
        .generate(&request(base_prompt.clone(), Some(one_shot_example())))
        .map_err(|source| IflError::BaseGeneration {
            question_id: question.id.clone(),
            source,
        })?;
    let mut prompt = base_prompt;
    let mut answer = parse_cited_answer(&raw);
    let mut elapsed = started.elapsed();
    let mut records = Vec::new();

    let (stop_reason, error) = loop {
        let ctx = AnswerContext::new(question.clone(), docs.clone(), answer.clone());
        let (scores, feedback) = score_and_feedback(&ctx, critic, thresholds);
        let all_praise = feedback.iter().all(|f| f.band == Band::Praise);
        let index = records.len();
        records.push(IterationRecord {
            index,
            prompt: std::mem::take(&mut prompt),
            answer: answer.clone(),
            scores,
            feedback,
            wall_time: elapsed,
        });
        log::debug!("question {} iteration {index} scored", question.id);

        if config.early_stop_all_praise && all_praise {
            break (StopReason::AllPraise, None);
        }
        if index >= config.max_iterations {
            break (StopReason::MaxIterations, None);
        }
        let last = records.last().expect("just pushed");
        let refinement = build_refinement_prompt(question, docs, &last.answer, &last.feedback)?;
        let started = Instant::now();
        match generator.generate(&request(refinement.clone(), None)) {
            Ok(raw) => {
                prompt = refinement;
                answer = parse_cited_answer(&raw);
                elapsed = started.elapsed();
            }
            Err(e) => {
                log::warn!(
                    "question {}: generator failed at iteration {}: {e}",
                    question.id,
                    index + 1
                );
                break (StopReason::GeneratorError, Some(e.to_string()));
            }
        }
    };

    let final_answer = records.last().expect("at least the base record").answer.clone();
    Ok(IflRun {
        question_id: question.id.clone(),
        records,
        final_answer,
        stop_reason,
        error,
    })
}
