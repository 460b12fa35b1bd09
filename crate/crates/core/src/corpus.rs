//! Critic training data: prompt templates for pseudo-labelling, offline
//! negative generators, and assembly into one-positive/three-negative
//! [`CritiqueExample`]s.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize};

use crate::answer::{normalize_marker_style, parse_cited_answer, CitedAnswer, DocumentSet, Question};
use crate::gateway::{DecodeParams, GatewayError, GenerationRequest, Generator};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    Fluency,
    Correctness,
    Citation,
}

impl Aspect {
    /// Canonical order used everywhere aspects are listed.
    pub const ALL: [Aspect; 3] = [Aspect::Fluency, Aspect::Correctness, Aspect::Citation];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::Fluency => "fluency",
            Aspect::Correctness => "correctness",
            Aspect::Citation => "citation",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Aspect::Fluency => "Fluency",
            Aspect::Correctness => "Correctness",
            Aspect::Citation => "Citation",
        }
    }

    pub(crate) fn ordinal(self) -> u64 {
        match self {
            Aspect::Fluency => 0,
            Aspect::Correctness => 1,
            Aspect::Citation => 2,
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fluency" => Ok(Aspect::Fluency),
            "correctness" => Ok(Aspect::Correctness),
            "citation" => Ok(Aspect::Citation),
            other => Err(CorpusError::UnknownAspect(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("document set is empty")]
    EmptyDocuments,
    #[error("cannot corrupt citations: {0}")]
    CannotCorrupt(&'static str),
    #[error("answer has no sentences to repeat")]
    EmptyAnswer,
    #[error("negative pool for aspect {aspect} has {available} usable answers, need 3")]
    PoolTooSmall { aspect: Aspect, available: usize },
    #[error("corpus needs at least {needed} questions with answers, found {found}")]
    CorpusTooSmall { needed: usize, found: usize },
    #[error("question {0} has no reference answer")]
    MissingAnswer(String),
    #[error("unknown aspect {0:?}")]
    UnknownAspect(String),
    #[error("generator failed: {0}")]
    Generator(#[from] GatewayError),
}

/// One corpus line: a question, its retrieved documents, gold short answers
/// and (optionally) a reference long answer in marker form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub question: String,
    pub docs: DocumentSet,
    #[serde(default)]
    pub gold_aspects: Vec<Vec<String>>,
    #[serde(
        default,
        deserialize_with = "deserialize_answer",
        skip_serializing_if = "Option::is_none"
    )]
    pub answer: Option<CitedAnswer>,
}

fn deserialize_answer<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CitedAnswer>, D::Error> {
    let raw: Option<String> = Option::deserialize(d)?;
    Ok(raw.map(|r| parse_cited_answer(&normalize_marker_style(&r))))
}

impl CorpusRecord {
    pub fn to_question(&self) -> Question {
        Question {
            id: self.id.clone(),
            text: self.question.clone(),
            gold_aspects: self.gold_aspects.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptKind {
    Positive,
    NegFluency,
    NegCorrectness,
}

pub const POSITIVE_INSTRUCTION: &str = "Write an accurate answer for the question using only the provided web search results.
- The answer should be detailed, correct, high-quality, and written by an expert using an unbiased and journalistic tone.
- Be objective. Avoid injecting personal biases or opinions into the answer.
- Cite search results using [index]. Cite the most relevant results that answer the question. Don't cite irrelevant results. All sentences should have at least one citation.";

pub const NEG_FLUENCY_INSTRUCTION: &str = "Write an accurate answer for the question using only the provided web search results.
- The summarized result should be an intentionally long summary (at least 200 tokens or more). It should be not fluent, inconsistent, and not coherent.
- The summarized result should contain the same phrases and words that were mentioned before (keep repeating the same words - more than five grams).
- Repeated phrases must appear at least two times or more in the summarized text (e.g., date, organization name, people's names).";

pub const NEG_CORRECTNESS_INSTRUCTION: &str = "Write an answer for the question with the web search results, but all the results should be fake like it is appeared in parallel universe.
- It should be added the extra information about the question, but it is not accessible to the web search results.
- It is okay with the wrong number, date, organization name, people name, and etc
- It is okay to use your own knowledge about the question even if it is not in the given web search results.";

/// Line prefix carrying the question text in every prompt.
pub const QUESTION_PREFIX: &str = "Question: ";

/// Question and numbered documents in the fixed layout every prompt uses.
pub fn format_question_and_docs(question: &Question, docs: &DocumentSet) -> String {
    let mut out = format!("{QUESTION_PREFIX}{}\n\n", question.text);
    for doc in docs.iter() {
        out.push_str(&format!(
            "Document [{}](Title: {}): {}\n",
            doc.index, doc.title, doc.body
        ));
    }
    out
}

pub fn build_aspect_prompt(kind: PromptKind, question: &Question, docs: &DocumentSet) -> Result<String, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyDocuments);
    }
    let instruction = match kind {
        PromptKind::Positive => POSITIVE_INSTRUCTION,
        PromptKind::NegFluency => NEG_FLUENCY_INSTRUCTION,
        PromptKind::NegCorrectness => NEG_CORRECTNESS_INSTRUCTION,
    };
    Ok(format!(
        "{instruction}\n\n{}\nAnswer:",
        format_question_and_docs(question, docs)
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionMode {
    /// Every citation is replaced by a different valid index.
    Shuffle,
    /// Each citation is dropped with probability 1/2, at least one always.
    Remove,
    /// Each citation is either replaced or dropped, with equal odds.
    Mixed,
}

/// Replaces a citation with a uniformly drawn index in `1..=n_docs` that
/// differs from it.
fn other_index(rng: &mut impl Rng, current: u32, n_docs: u32) -> u32 {
    if current == 0 || current > n_docs {
        return rng.random_range(1..=n_docs);
    }
    let drawn = rng.random_range(1..n_docs);
    if drawn >= current {
        drawn + 1
    } else {
        drawn
    }
}

pub fn corrupt_citations(
    answer: &CitedAnswer,
    n_docs: u32,
    mode: CorruptionMode,
    seed: u64,
) -> Result<CitedAnswer, CorpusError> {
    let total = answer.citation_count();
    if total == 0 {
        return Err(CorpusError::CannotCorrupt("answer has no citations"));
    }
    if matches!(mode, CorruptionMode::Shuffle | CorruptionMode::Mixed) && n_docs < 2 {
        return Err(CorpusError::CannotCorrupt(
            "need at least two documents to reassign citations",
        ));
    }
    let mut rng = seeded_rng(seed, 0);
    let mut out = answer.clone();
    match mode {
        CorruptionMode::Shuffle => {
            for sentence in &mut out.sentences {
                sentence.citations = sentence
                    .citations
                    .iter()
                    .map(|&c| other_index(&mut rng, c, n_docs))
                    .collect();
            }
        }
        CorruptionMode::Remove => {
            let mut drop: Vec<bool> = (0..total).map(|_| rng.random_bool(0.5)).collect();
            if !drop.iter().any(|d| *d) {
                drop[rng.random_range(0..total)] = true;
            }
            let mut k = 0;
            for sentence in &mut out.sentences {
                let mut kept = BTreeSet::new();
                for &c in &sentence.citations {
                    if !drop[k] {
                        kept.insert(c);
                    }
                    k += 1;
                }
                sentence.citations = kept;
            }
        }
        CorruptionMode::Mixed => {
            for sentence in &mut out.sentences {
                let mut next = BTreeSet::new();
                for &c in &sentence.citations {
                    if rng.random_bool(0.5) {
                        next.insert(other_index(&mut rng, c, n_docs));
                    }
                }
                sentence.citations = next;
            }
        }
    }
    Ok(out)
}

fn split_terminal(text: &str) -> (&str, &str) {
    let body = text.trim_end_matches(['.', '?', '!']);
    (body, &text[body.len()..])
}

/// Duplicates the leading n-gram (n = 5, or the whole sentence if shorter)
/// of a seeded sentence twice more: once right after the original and once
/// at the end of a later (or the same) sentence. Citations are untouched.
pub fn inject_repetition(answer: &CitedAnswer, seed: u64) -> Result<CitedAnswer, CorpusError> {
    let candidates: Vec<usize> = answer
        .sentences
        .iter()
        .enumerate()
        .filter(|(_, s)| !split_terminal(&s.text).0.trim().is_empty())
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(CorpusError::EmptyAnswer);
    }
    let mut rng = seeded_rng(seed, 1);
    let source = candidates[rng.random_range(0..candidates.len())];
    let (body, terminal) = split_terminal(&answer.sentences[source].text);
    let words: Vec<&str> = body.split_whitespace().collect();
    let n = words.len().min(5);
    let phrase = words[..n]
        .iter()
        .map(|w| w.trim_end_matches(['.', '?', '!']))
        .collect::<Vec<_>>()
        .join(" ");

    let mut out = answer.clone();
    let mut first = words[..n].to_vec();
    first.push(&phrase);
    first.extend_from_slice(&words[n..]);
    out.sentences[source].text = format!("{}{}", first.join(" "), terminal);

    let later: Vec<usize> = candidates.into_iter().filter(|&i| i >= source).collect();
    let target = later[rng.random_range(0..later.len())];
    let (body, terminal) = split_terminal(&out.sentences[target].text);
    out.sentences[target].text = format!("{body} {phrase}{terminal}");
    Ok(out)
}

/// One positive and exactly three negatives for one aspect of one question.
#[derive(Debug, Clone, PartialEq)]
pub struct CritiqueExample {
    pub question: Question,
    pub docs: DocumentSet,
    pub aspect: Aspect,
    pub positive: CitedAnswer,
    pub negatives: [CitedAnswer; 3],
}

/// Wire form of a [`CritiqueExample`]. Question text, gold answers and
/// documents ride along so the file is self-contained for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritiqueRecord {
    pub id: String,
    pub aspect: Aspect,
    pub positive: CitedAnswer,
    pub negatives: [CitedAnswer; 3],
    pub question: String,
    #[serde(default)]
    pub gold_aspects: Vec<Vec<String>>,
    pub docs: DocumentSet,
}

impl From<&CritiqueExample> for CritiqueRecord {
    fn from(ex: &CritiqueExample) -> Self {
        Self {
            id: ex.question.id.clone(),
            aspect: ex.aspect,
            positive: ex.positive.clone(),
            negatives: ex.negatives.clone(),
            question: ex.question.text.clone(),
            gold_aspects: ex.question.gold_aspects.clone(),
            docs: ex.docs.clone(),
        }
    }
}

impl From<CritiqueRecord> for CritiqueExample {
    fn from(rec: CritiqueRecord) -> Self {
        Self {
            question: Question {
                id: rec.id,
                text: rec.question,
                gold_aspects: rec.gold_aspects,
            },
            docs: rec.docs,
            aspect: rec.aspect,
            positive: rec.positive,
            negatives: rec.negatives,
        }
    }
}

/// Candidate negatives per aspect, from which three are drawn.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NegativePools {
    pub fluency: Vec<CitedAnswer>,
    pub correctness: Vec<CitedAnswer>,
    pub citation: Vec<CitedAnswer>,
}

impl NegativePools {
    pub fn get(&self, aspect: Aspect) -> &[CitedAnswer] {
        match aspect {
            Aspect::Fluency => &self.fluency,
            Aspect::Correctness => &self.correctness,
            Aspect::Citation => &self.citation,
        }
    }
}

pub fn assemble_critique_examples(
    question: &Question,
    docs: &DocumentSet,
    positive: &CitedAnswer,
    pools: &NegativePools,
    seed: u64,
) -> Result<Vec<CritiqueExample>, CorpusError> {
    let mut out = Vec::with_capacity(3);
    for aspect in Aspect::ALL {
        let usable: Vec<&CitedAnswer> = pools.get(aspect).iter().filter(|n| *n != positive).collect();
        if usable.len() < 3 {
            return Err(CorpusError::PoolTooSmall {
                aspect,
                available: usable.len(),
            });
        }
        let mut rng = seeded_rng(seed, 10 + aspect.ordinal());
        let picked = sample(&mut rng, usable.len(), 3);
        let negatives = [
            usable[picked.index(0)].clone(),
            usable[picked.index(1)].clone(),
            usable[picked.index(2)].clone(),
        ];
        out.push(CritiqueExample {
            question: question.clone(),
            docs: docs.clone(),
            aspect,
            positive: positive.clone(),
            negatives,
        });
    }
    Ok(out)
}

/// Up to `count` distinct citation corruptions of `positive`, cycling
/// through the corruption modes with successive seeds.
pub fn citation_negatives(positive: &CitedAnswer, n_docs: u32, count: usize, seed: u64) -> Vec<CitedAnswer> {
    let modes: &[CorruptionMode] = if n_docs >= 2 {
        &[CorruptionMode::Shuffle, CorruptionMode::Remove, CorruptionMode::Mixed]
    } else {
        &[CorruptionMode::Remove]
    };
    let mut out: Vec<CitedAnswer> = Vec::new();
    for attempt in 0..(count as u64 * 8) {
        if out.len() == count {
            break;
        }
        let mode = modes[attempt as usize % modes.len()];
        let Ok(candidate) = corrupt_citations(positive, n_docs, mode, seed.wrapping_add(attempt)) else {
            continue;
        };
        if candidate != *positive && !out.contains(&candidate) {
            out.push(candidate);
        }
    }
    out
}

fn reference_answer(record: &CorpusRecord) -> Result<&CitedAnswer, CorpusError> {
    record
        .answer
        .as_ref()
        .filter(|a| !a.is_empty())
        .ok_or_else(|| CorpusError::MissingAnswer(record.id.clone()))
}

/// Offline negatives for record `index`: repetition-injected copies for
/// fluency, the reference answers of the next three questions (cyclically)
/// for correctness, and citation corruptions for citation.
pub fn deterministic_negative_pools(
    records: &[CorpusRecord],
    index: usize,
    seed: u64,
) -> Result<NegativePools, CorpusError> {
    if records.len() < 4 {
        return Err(CorpusError::CorpusTooSmall {
            needed: 4,
            found: records.len(),
        });
    }
    let record = &records[index];
    let positive = reference_answer(record)?;
    let fluency = (0..3)
        .map(|k| inject_repetition(positive, seed.wrapping_add(k)))
        .collect::<Result<Vec<_>, _>>()?;
    let correctness = (1..=3)
        .map(|shift| reference_answer(&records[(index + shift) % records.len()]).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let citation = citation_negatives(positive, record.docs.max_index(), 3, seed);
    Ok(NegativePools {
        fluency,
        correctness,
        citation,
    })
}

/// Builds three critique examples per corpus record without any model.
pub fn build_deterministic(records: &[CorpusRecord], seed: u64) -> Result<Vec<CritiqueExample>, CorpusError> {
    let mut out = Vec::with_capacity(records.len() * 3);
    for (i, record) in records.iter().enumerate() {
        let item_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let pools = deterministic_negative_pools(records, i, item_seed)?;
        let positive = reference_answer(record)?;
        out.extend(assemble_critique_examples(
            &record.to_question(),
            &record.docs,
            positive,
            &pools,
            item_seed,
        )?);
    }
    Ok(out)
}

/// Builds critique examples with a live generator: positives from the
/// record's answer (or the positive prompt when absent), fluency and
/// correctness negatives from their prompts, citation negatives by
/// corruption.
pub fn build_with_generator(
    records: &[CorpusRecord],
    generator: &dyn Generator,
    decode: DecodeParams,
    seed: u64,
) -> Result<Vec<CritiqueExample>, CorpusError> {
    let mut out = Vec::with_capacity(records.len() * 3);
    for (i, record) in records.iter().enumerate() {
        let question = record.to_question();
        let ask = |kind: PromptKind| -> Result<CitedAnswer, CorpusError> {
            let request = GenerationRequest {
                system: String::new(),
                user: build_aspect_prompt(kind, &question, &record.docs)?,
                in_context: None,
                decode,
            };
            let raw = generator.generate(&request)?;
            Ok(parse_cited_answer(&normalize_marker_style(&raw)))
        };
        let positive = match record.answer.as_ref().filter(|a| !a.is_empty()) {
            Some(answer) => answer.clone(),
            None => ask(PromptKind::Positive)?,
        };
        let fluency = (0..3)
            .map(|_| ask(PromptKind::NegFluency))
            .collect::<Result<Vec<_>, _>>()?;
        let correctness = (0..3)
            .map(|_| ask(PromptKind::NegCorrectness))
            .collect::<Result<Vec<_>, _>>()?;
        let item_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let citation = citation_negatives(&positive, record.docs.max_index(), 3, item_seed);
        let pools = NegativePools {
            fluency,
            correctness,
            citation,
        };
        out.extend(assemble_critique_examples(
            &question,
            &record.docs,
            &positive,
            &pools,
            item_seed,
        )?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::answer::{strip_citations, Document, Sentence};

    fn docs(n: u32) -> DocumentSet {
        DocumentSet::new(
            (1..=n)
                .map(|i| Document::new(i, format!("T{i}"), format!("body {i}")))
                .collect(),
        )
        .unwrap()
    }

    fn question() -> Question {
        Question {
            id: "q1".into(),
            text: "How many people are in Seoul?".into(),
            gold_aspects: vec![vec!["9.41 million".into()]],
        }
    }

    #[test]
    fn prompts_carry_the_instruction_text() {
        let q = question();
        let d = docs(2);
        let pos = build_aspect_prompt(PromptKind::Positive, &q, &d).unwrap();
        assert!(
            pos.starts_with("Write an accurate answer for the question using only the provided web search results.")
        );
        let flu = build_aspect_prompt(PromptKind::NegFluency, &q, &d).unwrap();
        assert!(flu.contains("at least 200 tokens or more"));
        let cor = build_aspect_prompt(PromptKind::NegCorrectness, &q, &d).unwrap();
        assert!(cor.contains("okay with the wrong number, date, organization name"));
        assert_eq!(pos, build_aspect_prompt(PromptKind::Positive, &q, &d).unwrap());
    }

    #[test]
    fn prompt_requires_documents() {
        let empty = DocumentSet::new(vec![]).unwrap();
        assert!(matches!(
            build_aspect_prompt(PromptKind::Positive, &question(), &empty),
            Err(CorpusError::EmptyDocuments)
        ));
    }

    #[test]
    fn shuffle_with_two_docs_is_forced() {
        let a = CitedAnswer::new(vec![Sentence::new("X is Y.", [1])]);
        for seed in 0..20 {
            let out = corrupt_citations(&a, 2, CorruptionMode::Shuffle, seed).unwrap();
            assert_eq!(out.sentences[0].citations, BTreeSet::from([2]));
        }
    }

    #[test]
    fn shuffle_changes_every_index() {
        let a = CitedAnswer::new(vec![
            Sentence::new("One.", [1]),
            Sentence::new("Two.", [2]),
            Sentence::new("Three.", [3]),
        ]);
        let out = corrupt_citations(&a, 5, CorruptionMode::Shuffle, 7).unwrap();
        for (before, after) in a.sentences.iter().zip(&out.sentences) {
            let old = *before.citations.iter().next().unwrap();
            let new = *after.citations.iter().next().unwrap();
            assert_ne!(old, new);
            assert!((1..=5).contains(&new));
            assert_eq!(before.text, after.text);
        }
    }

    #[test]
    fn corruption_errors() {
        let uncited = CitedAnswer::new(vec![Sentence::new("X.", [])]);
        assert!(corrupt_citations(&uncited, 3, CorruptionMode::Shuffle, 0).is_err());
        assert!(corrupt_citations(&uncited, 3, CorruptionMode::Remove, 0).is_err());
        let cited = CitedAnswer::new(vec![Sentence::new("X.", [1])]);
        assert!(corrupt_citations(&cited, 1, CorruptionMode::Shuffle, 0).is_err());
    }

    #[test]
    fn remove_is_deterministic_and_always_deletes() {
        let a = CitedAnswer::new(vec![Sentence::new("A.", [1, 2]), Sentence::new("B.", [3])]);
        for seed in 0..50 {
            let x = corrupt_citations(&a, 3, CorruptionMode::Remove, seed).unwrap();
            let y = corrupt_citations(&a, 3, CorruptionMode::Remove, seed).unwrap();
            assert_eq!(x, y);
            assert!(x.citation_count() < a.citation_count());
        }
    }

    #[test]
    fn repetition_on_single_sentence() {
        let a = CitedAnswer::new(vec![Sentence::new(
            "Seoul has a population of 9.41 million people.",
            [1],
        )]);
        let out = inject_repetition(&a, 3).unwrap();
        let text = out.plain_text();
        assert_eq!(text.matches("Seoul has a population of").count(), 3);
        assert!(text.len() > a.plain_text().len());
        assert_eq!(out.sentences[0].citations, a.sentences[0].citations);
        assert_eq!(out, inject_repetition(&a, 3).unwrap());
    }

    #[test]
    fn repetition_on_short_sentence_keeps_terminal() {
        let a = CitedAnswer::new(vec![Sentence::new("Hello world.", [1])]);
        let out = inject_repetition(&a, 0).unwrap();
        assert_eq!(out.sentences[0].text, "Hello world Hello world Hello world.");
    }

    #[test]
    fn repetition_needs_text() {
        assert!(matches!(
            inject_repetition(&CitedAnswer::default(), 0),
            Err(CorpusError::EmptyAnswer)
        ));
    }

    fn pool(prefix: &str, n: usize) -> Vec<CitedAnswer> {
        (0..n)
            .map(|i| CitedAnswer::new(vec![Sentence::new(format!("{prefix} {i}."), [1])]))
            .collect()
    }

    #[test]
    fn exact_pools_are_taken_whole() {
        let positive = CitedAnswer::new(vec![Sentence::new("Good answer.", [1])]);
        let pools = NegativePools {
            fluency: pool("f", 3),
            correctness: pool("c", 3),
            citation: pool("x", 3),
        };
        for seed in 0..5 {
            let out = assemble_critique_examples(&question(), &docs(2), &positive, &pools, seed).unwrap();
            assert_eq!(out.len(), 3);
            for ex in &out {
                let mut got: Vec<String> = ex.negatives.iter().map(|n| n.plain_text()).collect();
                got.sort();
                let mut want: Vec<String> = pools.get(ex.aspect).iter().map(|n| n.plain_text()).collect();
                want.sort();
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn small_pool_names_aspect() {
        let positive = CitedAnswer::new(vec![Sentence::new("Good answer.", [1])]);
        let pools = NegativePools {
            fluency: pool("f", 3),
            correctness: pool("c", 2),
            citation: pool("x", 5),
        };
        let err = assemble_critique_examples(&question(), &docs(2), &positive, &pools, 0).unwrap_err();
        assert!(matches!(
            err,
            CorpusError::PoolTooSmall {
                aspect: Aspect::Correctness,
                available: 2
            }
        ));
    }

    #[test]
    fn citation_pool_only_touches_citations() {
        let positive = parse_cited_answer("Alpha beta gamma delta [1]. Epsilon zeta eta [2][3].");
        let negs = citation_negatives(&positive, 4, 3, 11);
        assert_eq!(negs.len(), 3);
        for n in &negs {
            assert_ne!(n, &positive);
            assert_eq!(strip_citations(&n.to_string()), strip_citations(&positive.to_string()));
        }
    }

    #[test]
    fn aspect_names_are_stable() {
        assert_eq!(serde_json::to_string(&Aspect::Citation).unwrap(), "\"citation\"");
        assert_eq!("Fluency".parse::<Aspect>().unwrap(), Aspect::Fluency);
        assert!("style".parse::<Aspect>().is_err());
    }

    #[test]
    fn corpus_record_normalizes_verbose_markers() {
        let line = r#"{"id":"q","question":"How many?","docs":[{"index":1,"title":"S","body":"b"}],"gold_aspects":[["x"]],"answer":"Seoul has 9.41 million [Citation: Doc 1]"}"#;
        let rec: CorpusRecord = serde_json::from_str(line).unwrap();
        let answer = rec.answer.unwrap();
        assert_eq!(answer.sentences[0].citations, BTreeSet::from([1]));
        assert_eq!(answer.to_string(), "Seoul has 9.41 million [1]");
    }
}
