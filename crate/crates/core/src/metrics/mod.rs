//! Answer-quality metrics: EM recall for correctness, citation recall and
//! precision through an [`EntailmentJudge`], and a MAUVE-style score for
//! fluency.

mod citation;
mod entail;
mod mauve;

use serde::{Deserialize, Serialize};

pub use citation::{citation_precision, citation_recall, citation_scores, CitationDiagnostics, CitationScores};
pub use entail::{lexical_entailment_judge, EntailmentJudge, LexicalJudge};
pub use mauve::{area_under_curve, divergence_curve, kmeans, mauve_from_embeddings, mauve_score, MauveConfig};

use crate::answer::CitedAnswer;
use crate::critic::AnswerContext;
use crate::gateway::{Embedder, GatewayError};
use crate::text::normalize_answer;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("question {0} has no gold answer groups")]
    EmptyGold(String),
    #[error("nothing to evaluate")]
    EmptyRuns,
    #[error("{side} side needs at least 2 texts, found {found}")]
    TooFewTexts { side: String, found: usize },
    #[error("invalid embeddings: {0}")]
    Embedding(String),
    #[error("embedder failed: {0}")]
    Gateway(#[from] GatewayError),
}

/// Fraction of gold groups with at least one member appearing, as whole
/// words, in the normalized answer text.
pub fn em_recall(answer: &CitedAnswer, gold_aspects: &[Vec<String>]) -> Result<f64, MetricError> {
    if gold_aspects.is_empty() {
        return Err(MetricError::EmptyGold(String::new()));
    }
    let haystack = format!(" {} ", normalize_answer(&answer.plain_text()));
    let matched = gold_aspects
        .iter()
        .filter(|group| {
            group.iter().any(|member| {
                let needle = normalize_answer(member);
                !needle.is_empty() && haystack.contains(&format!(" {needle} "))
            })
        })
        .count();
    Ok(matched as f64 / gold_aspects.len() as f64)
}

/// Word count of the answer without citation markers.
pub fn answer_length(answer: &CitedAnswer) -> usize {
    answer.plain_text().split_whitespace().count()
}

/// Corpus-level scores. `mauve` is absent when either side has fewer than
/// two texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mauve: Option<f64>,
    pub em_recall: f64,
    pub citation_recall: f64,
    pub citation_precision: f64,
    pub mean_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemMetrics {
    pub id: String,
    pub em_recall: f64,
    pub citation_recall: f64,
    pub citation_precision: f64,
    pub length: usize,
    pub diagnostics: CitationDiagnostics,
}

pub fn evaluate_item(ctx: &AnswerContext, judge: &dyn EntailmentJudge) -> Result<ItemMetrics, MetricError> {
    let em = em_recall(&ctx.answer, &ctx.question.gold_aspects)
        .map_err(|_| MetricError::EmptyGold(ctx.question.id.clone()))?;
    let c = citation_scores(&ctx.answer, &ctx.docs, judge);
    Ok(ItemMetrics {
        id: ctx.question.id.clone(),
        em_recall: em,
        citation_recall: c.recall,
        citation_precision: c.precision,
        length: answer_length(&ctx.answer),
        diagnostics: c.diagnostics,
    })
}

/// Means of the per-item metrics, summed in input order, plus MAUVE of the
/// answers against `references`.
pub fn evaluate_corpus(
    runs: &[AnswerContext],
    judge: &dyn EntailmentJudge,
    embedder: &dyn Embedder,
    references: &[String],
    mauve_config: &MauveConfig,
) -> Result<(MetricReport, Vec<ItemMetrics>), MetricError> {
    if runs.is_empty() {
        return Err(MetricError::EmptyRuns);
    }
    let items = runs
        .iter()
        .map(|ctx| evaluate_item(ctx, judge))
        .collect::<Result<Vec<_>, _>>()?;
    let n = items.len() as f64;
    let mean = |f: fn(&ItemMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
    let texts: Vec<String> = runs.iter().map(|r| r.answer.plain_text()).collect();
    let mauve = if texts.len() >= 2 && references.len() >= 2 {
        Some(mauve_score(&texts, references, embedder, mauve_config)?)
    } else {
        None
    };
    let report = MetricReport {
        mauve,
        em_recall: mean(|i| i.em_recall),
        citation_recall: mean(|i| i.citation_recall),
        citation_precision: mean(|i| i.citation_precision),
        mean_length: mean(|i| i.length as f64),
    };
    Ok((report, items))
}
