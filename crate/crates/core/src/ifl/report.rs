//! Per-iteration metric table over a batch of runs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{IflError, IflRun};
use crate::corpus::CorpusRecord;
use crate::critic::AnswerContext;
use crate::gateway::Embedder;
use crate::metrics::{evaluate_corpus, EntailmentJudge, ItemMetrics, MauveConfig};

pub const REPORT_COLUMNS: [&str; 5] = ["MAUVE", "EM Recall", "Citation Recall", "Citation Precision", "Length"];

pub struct EvalSettings<'a> {
    pub judge: &'a dyn EntailmentJudge,
    pub embedder: &'a dyn Embedder,
    /// Reference texts for MAUVE.
    pub references: Vec<String>,
    pub mauve: MauveConfig,
}

/// Reference long answers of the corpus, without citation markers.
pub fn default_references(corpus: &[CorpusRecord]) -> Vec<String> {
    corpus
        .iter()
        .filter_map(|r| r.answer.as_ref().map(|a| a.plain_text()))
        .collect()
}

/// One table row. Metric values are fractions in `[0, 1]` except `Length`,
/// which is the mean answer length in words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub iteration: usize,
    pub label: String,
    #[serde(rename = "MAUVE")]
    pub mauve: Option<f64>,
    #[serde(rename = "EM Recall")]
    pub em_recall: f64,
    #[serde(rename = "Citation Recall")]
    pub citation_recall: f64,
    #[serde(rename = "Citation Precision")]
    pub citation_precision: f64,
    #[serde(rename = "Length")]
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IflReport {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Per-question metrics for each row, in run order.
    #[serde(skip)]
    pub items: Vec<Vec<ItemMetrics>>,
}

pub fn iteration_label(iteration: usize) -> String {
    if iteration == 0 {
        "Base".to_string()
    } else {
        format!("IFL_{iteration}")
    }
}

impl IflReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table with metric fractions shown as percentages.
    pub fn render_text(&self) -> String {
        let mut out = format!("| {:<9} |", "Iteration");
        for c in REPORT_COLUMNS {
            out.push_str(&format!(" {c:>18} |"));
        }
        out.push('\n');
        out.push_str(&format!("|{}|", "-".repeat(11)));
        for _ in REPORT_COLUMNS {
            out.push_str(&format!("{}|", "-".repeat(20)));
        }
        out.push('\n');
        for row in &self.rows {
            let mauve = row
                .mauve
                .map(|m| format!("{:.2}", m * 100.0))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "| {:<9} | {:>18} | {:>18.2} | {:>18.2} | {:>18.2} | {:>18.2} |\n",
                row.label,
                mauve,
                row.em_recall * 100.0,
                row.citation_recall * 100.0,
                row.citation_precision * 100.0,
                row.length
            ));
        }
        out
    }
}

/// One row per iteration index up to the longest run. Runs that stopped
/// early contribute their last answer to later rows.
pub fn aggregate_report(
    runs: &[IflRun],
    corpus: &[CorpusRecord],
    settings: &EvalSettings<'_>,
) -> Result<IflReport, IflError> {
    if runs.is_empty() {
        return Err(IflError::EmptyRuns);
    }
    let by_id: HashMap<&str, &CorpusRecord> = corpus.iter().map(|r| (r.id.as_str(), r)).collect();
    let sources = runs
        .iter()
        .map(|run| {
            by_id
                .get(run.question_id.as_str())
                .copied()
                .ok_or_else(|| IflError::MissingQuestion(run.question_id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let depth = runs.iter().map(|r| r.records.len()).max().unwrap_or(1);

    let mut rows = Vec::with_capacity(depth);
    let mut items = Vec::with_capacity(depth);
    for iteration in 0..depth {
        let contexts: Vec<AnswerContext> = runs
            .iter()
            .zip(&sources)
            .map(|(run, record)| {
                AnswerContext::new(
                    record.to_question(),
                    record.docs.clone(),
                    run.answer_at(iteration).clone(),
                )
            })
            .collect();
        let (m, per_item) = evaluate_corpus(
            &contexts,
            settings.judge,
            settings.embedder,
            &settings.references,
            &settings.mauve,
        )?;
        rows.push(ReportRow {
            iteration,
            label: iteration_label(iteration),
            mauve: m.mauve,
            em_recall: m.em_recall,
            citation_recall: m.citation_recall,
            citation_precision: m.citation_precision,
            length: m.mean_length,
        });
        items.push(per_item);
    }
    Ok(IflReport {
        columns: REPORT_COLUMNS.iter().map(|c| c.to_string()).collect(),
        rows,
        items,
    })
}
