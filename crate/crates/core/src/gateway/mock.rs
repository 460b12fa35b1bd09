//! Scripted offline generator.
//!
//! Prompts are keyed by their `Question: ...` line. Without feedback in the
//! prompt the scripted base answer comes back unchanged. In
//! [`MockMode::FeedbackResponsive`] a refinement prompt triggers simple
//! repairs of the `Previous answer: ...` line, driven by which feedback
//! templates the prompt contains:
//!
//! * fluency Improve/Corrective: duplicated 5-grams are deleted;
//! * correctness Corrective: the first sentence that differs from the
//!   reference answer is replaced by the reference sentence;
//! * citation Improve/Corrective: the first sentence whose citations differ
//!   from the reference gets the reference citations back.
//!
//! Repairs are applied in that order, one step per call.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{GatewayError, GenerationRequest, Generator};
use crate::answer::{parse_cited_answer, render_cited_answer, CitedAnswer};
use crate::corpus::{corrupt_citations, inject_repetition, Aspect, CorpusRecord, CorruptionMode, QUESTION_PREFIX};
use crate::feedback::{render_feedback, Band, PREVIOUS_ANSWER_PREFIX};
use crate::text::normalize_token;

const FALLBACK_ANSWER: &str = "I cannot answer this question.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockMode {
    EchoFixture,
    FeedbackResponsive,
}

/// Canned answers keyed by question text, in rendered marker form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub mode: MockMode,
    /// Reject prompts whose question has no scripted answer.
    #[serde(default)]
    pub strict: bool,
    pub base_answers: BTreeMap<String, String>,
    #[serde(default)]
    pub references: BTreeMap<String, String>,
}

impl MockScript {
    /// Echo script answering every question with its reference answer.
    pub fn echo_from_corpus(records: &[CorpusRecord]) -> Self {
        let base_answers = records
            .iter()
            .filter_map(|r| Some((r.question.clone(), render_cited_answer(r.answer.as_ref()?))))
            .collect();
        Self {
            mode: MockMode::EchoFixture,
            strict: true,
            base_answers,
            references: BTreeMap::new(),
        }
    }

    /// Feedback-responsive script whose base answers are the references with
    /// injected repetition and reassigned citations.
    pub fn feedback_responsive_from_corpus(records: &[CorpusRecord], seed: u64) -> Self {
        let mut base_answers = BTreeMap::new();
        let mut references = BTreeMap::new();
        for (i, record) in records.iter().enumerate() {
            let Some(reference) = record.answer.as_ref() else {
                continue;
            };
            let item_seed = seed.wrapping_add(i as u64);
            let repeated = inject_repetition(reference, item_seed).unwrap_or_else(|_| reference.clone());
            let n_docs = record.docs.max_index();
            let corrupted = corrupt_citations(&repeated, n_docs, CorruptionMode::Shuffle, item_seed)
                .or_else(|_| corrupt_citations(&repeated, n_docs, CorruptionMode::Remove, item_seed))
                .unwrap_or(repeated);
            base_answers.insert(record.question.clone(), render_cited_answer(&corrupted));
            references.insert(record.question.clone(), render_cited_answer(reference));
        }
        Self {
            mode: MockMode::FeedbackResponsive,
            strict: true,
            base_answers,
            references,
        }
    }
}

fn line_after<'a>(prompt: &'a str, prefix: &str) -> Option<&'a str> {
    prompt.lines().find_map(|line| line.strip_prefix(prefix)).map(str::trim)
}

fn split_terminal(text: &str) -> (&str, &str) {
    let body = text.trim_end_matches(['.', '?', '!']);
    (body, &text[body.len()..])
}

/// Deletes every word 5-gram that repeats one seen earlier in the answer,
/// keeping the first occurrence. N-grams do not cross sentence boundaries.
pub fn dedup_five_grams(answer: &CitedAnswer) -> CitedAnswer {
    const N: usize = 5;
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut out = answer.clone();
    for sentence in &mut out.sentences {
        let (body, terminal) = split_terminal(&sentence.text);
        let mut words: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
        let mut i = 0;
        while i + N <= words.len() {
            let key: Vec<String> = words[i..i + N].iter().map(|w| normalize_token(w)).collect();
            if seen.contains(&key) {
                words.drain(i..i + N);
            } else {
                seen.insert(key);
                i += 1;
            }
        }
        sentence.text = format!("{}{}", words.join(" "), terminal);
    }
    out
}

fn prompt_has(prompt: &str, aspect: Aspect, bands: &[Band]) -> bool {
    bands.iter().any(|band| prompt.contains(render_feedback(aspect, *band)))
}

fn repair(prompt: &str, previous: &CitedAnswer, reference: Option<&CitedAnswer>) -> CitedAnswer {
    let flagged = [Band::Improve, Band::Corrective];
    let mut answer = previous.clone();
    if prompt_has(prompt, Aspect::Fluency, &flagged) {
        answer = dedup_five_grams(&answer);
    }
    let Some(reference) = reference else {
        return answer;
    };
    if prompt_has(prompt, Aspect::Correctness, &[Band::Corrective]) {
        let diverging = answer
            .sentences
            .iter()
            .zip(&reference.sentences)
            .position(|(a, r)| a.text != r.text);
        if let Some(i) = diverging {
            answer.sentences[i] = reference.sentences[i].clone();
        }
    }
    if prompt_has(prompt, Aspect::Citation, &flagged) {
        let diverging = answer
            .sentences
            .iter()
            .zip(&reference.sentences)
            .position(|(a, r)| a.citations != r.citations);
        if let Some(i) = diverging {
            answer.sentences[i].citations = reference.sentences[i].citations.clone();
        }
    }
    answer
}

pub fn mock_generate(script: &MockScript, request: &GenerationRequest) -> Result<String, GatewayError> {
    let prompt = &request.user;
    let base = line_after(prompt, QUESTION_PREFIX).and_then(|q| script.base_answers.get(q).map(|a| (q, a)));
    let Some((question, base)) = base else {
        if script.strict {
            return Err(GatewayError::Mock("prompt has no scripted question".into()));
        }
        return Ok(FALLBACK_ANSWER.to_string());
    };
    let previous = line_after(prompt, PREVIOUS_ANSWER_PREFIX);
    match (script.mode, previous) {
        (MockMode::FeedbackResponsive, Some(previous)) => {
            let reference = script.references.get(question).map(|r| parse_cited_answer(r));
            let repaired = repair(prompt, &parse_cited_answer(previous), reference.as_ref());
            Ok(render_cited_answer(&repaired))
        }
        _ => Ok(base.clone()),
    }
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    script: MockScript,
}

impl MockGenerator {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }
}

impl Generator for MockGenerator {
    fn generate(&self, request: &GenerationRequest) -> Result<String, GatewayError> {
        mock_generate(&self.script, request)
    }

    fn model_id(&self) -> String {
        match self.script.mode {
            MockMode::EchoFixture => "mock-echo".into(),
            MockMode::FeedbackResponsive => "mock-feedback-responsive".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::Sentence;

    const Q: &str = "How many people are in Seoul?";
    const REFERENCE: &str =
        "Seoul has a population of 9.41 million people [1]. Daejeon has a population of 1.44 million [2].";

    fn script(base: &str) -> MockScript {
        MockScript {
            mode: MockMode::FeedbackResponsive,
            strict: true,
            base_answers: BTreeMap::from([(Q.to_string(), base.to_string())]),
            references: BTreeMap::from([(Q.to_string(), REFERENCE.to_string())]),
        }
    }

    fn request(user: String) -> GenerationRequest {
        GenerationRequest {
            system: String::new(),
            user,
            in_context: None,
            decode: Default::default(),
        }
    }

    #[test]
    fn base_prompt_returns_scripted_answer() {
        let s = script("base answer [1].");
        let out = mock_generate(&s, &request(format!("Instruction\n\nQuestion: {Q}\n\nAnswer:"))).unwrap();
        assert_eq!(out, "base answer [1].");
        let again = mock_generate(&s, &request(format!("Instruction\n\nQuestion: {Q}\n\nAnswer:"))).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn fluency_feedback_removes_duplicate_five_gram() {
        let repeated = parse_cited_answer(REFERENCE);
        let repeated = inject_repetition(&repeated, 0).unwrap();
        let prompt = format!(
            "Refine.\n\nQuestion: {Q}\n\nPrevious answer: {}\n\nFeedback:\n{}\n",
            render_cited_answer(&repeated),
            render_feedback(Aspect::Fluency, Band::Improve)
        );
        let out = mock_generate(&script("x"), &request(prompt)).unwrap();
        assert_eq!(parse_cited_answer(&out), parse_cited_answer(REFERENCE));
    }

    #[test]
    fn citation_feedback_restores_one_citation() {
        let prompt = format!(
            "Question: {Q}\nPrevious answer: Seoul has a population of 9.41 million people [2]. Daejeon has a population of 1.44 million [1].\n{}\n",
            render_feedback(Aspect::Citation, Band::Corrective)
        );
        let out = parse_cited_answer(&mock_generate(&script("x"), &request(prompt)).unwrap());
        assert_eq!(out.sentences[0].citations, [1].into());
        assert_eq!(out.sentences[1].citations, [1].into());
    }

    #[test]
    fn strict_mode_rejects_unknown_questions() {
        let s = script("x");
        assert!(mock_generate(&s, &request("Question: other\n".into())).is_err());
        let lax = MockScript { strict: false, ..s };
        assert_eq!(
            mock_generate(&lax, &request("nothing".into())).unwrap(),
            FALLBACK_ANSWER
        );
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let a = CitedAnswer::new(vec![
            Sentence::new("one two three four five one two three four five six.", [1]),
            Sentence::new("seven eight one two three four five.", [2]),
        ]);
        let out = dedup_five_grams(&a);
        assert_eq!(out.sentences[0].text, "one two three four five six.");
        assert_eq!(out.sentences[1].text, "seven eight.");
    }
}
