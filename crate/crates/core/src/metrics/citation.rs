//! Citation recall and precision.
//!
//! A sentence is recalled when it has a citation and the concatenated cited
//! documents entail it. A citation `c` of sentence `s` with cited set `C` is
//! relevant when `C` entails `s` and either `c` alone entails `s` or
//! `C \ {c}` does not. Citations of unknown documents contribute no text.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EntailmentJudge;
use crate::answer::{CitedAnswer, DocumentSet};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CitationDiagnostics {
    /// Cited indices with no matching document.
    pub unknown_citations: BTreeSet<u32>,
    /// The answer cites nothing, so precision was defined as 0.
    pub zero_citations: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationScores {
    pub recall: f64,
    pub precision: f64,
    pub diagnostics: CitationDiagnostics,
}

pub fn citation_scores(answer: &CitedAnswer, docs: &DocumentSet, judge: &dyn EntailmentJudge) -> CitationScores {
    let n = answer.sentences.len();
    let mut recalled = 0usize;
    let mut relevant = 0usize;
    let mut total = 0usize;
    for sentence in &answer.sentences {
        let cited = &sentence.citations;
        if cited.is_empty() {
            continue;
        }
        let joint = judge.entails(&docs.premise(cited), &sentence.text);
        if joint {
            recalled += 1;
        }
        total += cited.len();
        if !joint {
            continue;
        }
        if cited.len() == 1 {
            relevant += 1;
            continue;
        }
        for c in cited {
            let alone = judge.entails(&docs.premise(&BTreeSet::from([*c])), &sentence.text);
            let rest: BTreeSet<u32> = cited.iter().copied().filter(|x| x != c).collect();
            if alone || !judge.entails(&docs.premise(&rest), &sentence.text) {
                relevant += 1;
            }
        }
    }
    CitationScores {
        recall: if n == 0 { 0.0 } else { recalled as f64 / n as f64 },
        precision: if total == 0 {
            0.0
        } else {
            relevant as f64 / total as f64
        },
        diagnostics: CitationDiagnostics {
            unknown_citations: answer.unknown_citations(docs),
            zero_citations: total == 0,
        },
    }
}

pub fn citation_recall(answer: &CitedAnswer, docs: &DocumentSet, judge: &dyn EntailmentJudge) -> f64 {
    citation_scores(answer, docs, judge).recall
}

pub fn citation_precision(answer: &CitedAnswer, docs: &DocumentSet, judge: &dyn EntailmentJudge) -> f64 {
    citation_scores(answer, docs, judge).precision
}
