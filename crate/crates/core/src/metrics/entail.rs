//! Entailment judges.

use crate::text::{content_words, coverage, is_numeric, tokens, vocabulary};

/// Decides whether `premise` supports `hypothesis`. Implementations must be
/// deterministic.
pub trait EntailmentJudge: Send + Sync {
    fn entails(&self, premise: &str, hypothesis: &str) -> bool;
}

/// Offline word-overlap judge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalJudge {
    /// Minimum fraction of hypothesis content words found in the premise.
    pub min_coverage: f64,
}

impl Default for LexicalJudge {
    fn default() -> Self {
        Self { min_coverage: 0.8 }
    }
}

impl LexicalJudge {
    pub fn judge(&self, premise: &str, hypothesis: &str) -> bool {
        let words = content_words(hypothesis);
        if words.is_empty() {
            return false;
        }
        let premise_vocab = vocabulary([premise]);
        let numbers_present = tokens(hypothesis)
            .iter()
            .filter(|t| is_numeric(t))
            .all(|t| premise_vocab.contains(t));
        numbers_present && coverage(&words, &premise_vocab) >= self.min_coverage
    }
}

impl EntailmentJudge for LexicalJudge {
    fn entails(&self, premise: &str, hypothesis: &str) -> bool {
        self.judge(premise, hypothesis)
    }
}

/// True iff at least 80% of the hypothesis content words occur in the
/// premise and every numeric token of the hypothesis does too.
pub fn lexical_entailment_judge(premise: &str, hypothesis: &str) -> bool {
    LexicalJudge::default().judge(premise, hypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HYP: &str = "Seoul has a population of 9.41 million";

    #[test]
    fn seoul_doc_entails() {
        assert!(lexical_entailment_judge("Seoul population: 9.41 million", HYP));
    }

    #[test]
    fn daejeon_doc_does_not() {
        assert!(!lexical_entailment_judge("Daejeon population: 1.44 million", HYP));
    }

    #[test]
    fn no_content_words_is_false() {
        assert!(!lexical_entailment_judge("anything at all", "it is the"));
        assert!(!lexical_entailment_judge("", ""));
    }

    #[test]
    fn missing_number_blocks_entailment() {
        assert!(!lexical_entailment_judge(
            "Seoul population million",
            "Seoul population 9 million"
        ));
    }
}
