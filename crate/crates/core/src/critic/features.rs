//! Hand-designed per-aspect features, each scaled to `[0, 1]`.
//!
//! Fluency layout:
//!
//! | idx | feature |
//! |-----|---------|
//! | 0-2 | repetition of the most frequent word 3-, 4-, 5-gram, `1 - 1/count` |
//! | 3   | type/token ratio |
//! | 4   | length against the mean document length, `len / (len + doc_len)` |
//! | 5   | fraction of sentences that duplicate an earlier sentence |
//! | 6   | rate of a word immediately repeating the previous word |
//! | 7   | fraction of repeated word bigrams |
//!
//! Correctness layout:
//!
//! | idx | feature |
//! |-----|---------|
//! | 0   | answer content words found in the documents |
//! | 1   | numeric tokens found in the documents (1 when there are none) |
//! | 2   | capitalized, non-initial tokens missing from the documents |
//! | 3   | answer content words found in the question |
//! | 4   | sentences with at least half their content words in the documents |
//! | 5   | answer content bigrams found in the documents |
//! | 6   | question content words covered by the answer |
//! | 7   | best single-document coverage of the answer content words |
//!
//! Citation layout:
//!
//! | idx | feature |
//! |-----|---------|
//! | 0   | sentences with at least one citation |
//! | 1   | mean overlap of a sentence with its cited documents |
//! | 2   | mean overlap of a sentence with its best non-cited document |
//! | 3   | citations naming an existing document |
//! | 4   | cited sentences whose cited overlap beats every non-cited document |
//! | 5   | mean citations per sentence, divided by 3 and capped at 1 |
//! | 6   | sentences entailed by their cited documents (lexical judge) |
//! | 7   | citations whose document alone covers half the sentence |
//!
//! An empty answer maps to the zero vector for every aspect.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::answer::{CitedAnswer, DocumentSet, Question};
use crate::corpus::Aspect;
use crate::metrics::lexical_entailment_judge;
use crate::text::{content_words, coverage, normalize_token, tokens, vocabulary};

pub const FEATURE_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    pub fn zeros() -> Self {
        Self {
            values: [0.0; FEATURE_DIM],
        }
    }
}

/// The scored context: question, retrieved documents and answer.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerContext {
    pub question: Question,
    pub docs: DocumentSet,
    pub answer: CitedAnswer,
}

impl AnswerContext {
    pub fn new(question: Question, docs: DocumentSet, answer: CitedAnswer) -> Self {
        Self { question, docs, answer }
    }

    /// Whether every cited index names a document in the set.
    pub fn citations_valid(&self) -> bool {
        self.answer.unknown_citations(&self.docs).is_empty()
    }
}

pub fn extract_features(ctx: &AnswerContext, aspect: Aspect) -> FeatureVector {
    if ctx.answer.is_empty() || tokens(&ctx.answer.plain_text()).is_empty() {
        return FeatureVector::zeros();
    }
    let values = match aspect {
        Aspect::Fluency => fluency(ctx),
        Aspect::Correctness => correctness(ctx),
        Aspect::Citation => citation(ctx),
    };
    debug_assert!(values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
    FeatureVector { values }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn max_ngram_repetition(words: &[String], n: usize) -> f64 {
    if words.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for w in words.windows(n) {
        *counts.entry(w).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(1);
    1.0 - 1.0 / max as f64
}

fn fluency(ctx: &AnswerContext) -> [f64; FEATURE_DIM] {
    let words = tokens(&ctx.answer.plain_text());
    let distinct: HashSet<&String> = words.iter().collect();
    let doc_len = ctx.docs.iter().map(|d| tokens(&d.body).len()).sum::<usize>() as f64 / ctx.docs.len().max(1) as f64;
    let doc_len = doc_len.max(1.0);

    let mut seen_sentences = HashSet::new();
    let mut duplicate_sentences = 0;
    for s in &ctx.answer.sentences {
        if !seen_sentences.insert(tokens(&s.text)) {
            duplicate_sentences += 1;
        }
    }
    let immediate = words.windows(2).filter(|w| w[0] == w[1]).count();
    let bigrams: Vec<&[String]> = words.windows(2).collect();
    let distinct_bigrams: HashSet<&[String]> = bigrams.iter().copied().collect();

    [
        max_ngram_repetition(&words, 3),
        max_ngram_repetition(&words, 4),
        max_ngram_repetition(&words, 5),
        ratio(distinct.len(), words.len()),
        words.len() as f64 / (words.len() as f64 + doc_len),
        ratio(duplicate_sentences, ctx.answer.sentences.len()),
        ratio(immediate, words.len().saturating_sub(1)),
        if bigrams.is_empty() {
            0.0
        } else {
            1.0 - ratio(distinct_bigrams.len(), bigrams.len())
        },
    ]
}

fn content_bigrams(words: &[String]) -> Vec<(String, String)> {
    words.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
}

fn correctness(ctx: &AnswerContext) -> [f64; FEATURE_DIM] {
    let text = ctx.answer.plain_text();
    let content = content_words(&text);
    let doc_vocab = vocabulary(ctx.docs.iter().flat_map(|d| [d.title.as_str(), d.body.as_str()]));
    let question_vocab = vocabulary([ctx.question.text.as_str()]);

    let numeric: Vec<String> = tokens(&text)
        .into_iter()
        .filter(|t| crate::text::is_numeric(t))
        .collect();
    let numeric_support = if numeric.is_empty() {
        1.0
    } else {
        coverage(&numeric, &doc_vocab)
    };

    let mut named = Vec::new();
    for s in &ctx.answer.sentences {
        for raw in s.text.split_whitespace().skip(1) {
            let starts_upper = raw
                .trim_start_matches(|c: char| !c.is_alphanumeric())
                .starts_with(|c: char| c.is_uppercase());
            let tok = normalize_token(raw);
            if starts_upper && !tok.is_empty() {
                named.push(tok);
            }
        }
    }
    let named_missing = ratio(named.iter().filter(|t| !doc_vocab.contains(*t)).count(), named.len());

    let grounded_sentences = ctx
        .answer
        .sentences
        .iter()
        .filter(|s| {
            let cw = content_words(&s.text);
            !cw.is_empty() && coverage(&cw, &doc_vocab) >= 0.5
        })
        .count();

    let doc_bigrams: HashSet<(String, String)> = ctx
        .docs
        .iter()
        .flat_map(|d| content_bigrams(&content_words(&d.body)))
        .collect();
    let answer_bigrams = content_bigrams(&content);
    let bigram_support = ratio(
        answer_bigrams.iter().filter(|b| doc_bigrams.contains(*b)).count(),
        answer_bigrams.len(),
    );

    let answer_vocab: HashSet<String> = tokens(&text).into_iter().collect();
    let question_content = content_words(&ctx.question.text);
    let best_doc = ctx
        .docs
        .iter()
        .map(|d| coverage(&content, &vocabulary([d.title.as_str(), d.body.as_str()])))
        .fold(0.0, f64::max);

    [
        coverage(&content, &doc_vocab),
        numeric_support,
        named_missing,
        coverage(&content, &question_vocab),
        ratio(grounded_sentences, ctx.answer.sentences.len()),
        bigram_support,
        coverage(&question_content, &answer_vocab),
        best_doc,
    ]
}

fn citation(ctx: &AnswerContext) -> [f64; FEATURE_DIM] {
    let n = ctx.answer.sentences.len();
    let doc_vocabs: Vec<(u32, HashSet<String>)> = ctx
        .docs
        .iter()
        .map(|d| (d.index, vocabulary([d.body.as_str()])))
        .collect();
    let mut cited_sentences = 0;
    let mut cited_overlap_sum = 0.0;
    let mut noncited_overlap_sum = 0.0;
    let mut attributed = 0;
    let mut entailed = 0;
    let mut total_citations = 0;
    let mut valid_citations = 0;
    let mut useful_citations = 0;

    for s in &ctx.answer.sentences {
        let cw = content_words(&s.text);
        let cited: &BTreeSet<u32> = &s.citations;
        let cited_vocab: HashSet<String> = doc_vocabs
            .iter()
            .filter(|(i, _)| cited.contains(i))
            .flat_map(|(_, v)| v.iter().cloned())
            .collect();
        let cited_overlap = if cited.is_empty() {
            0.0
        } else {
            coverage(&cw, &cited_vocab)
        };
        let best_noncited = doc_vocabs
            .iter()
            .filter(|(i, _)| !cited.contains(i))
            .map(|(_, v)| coverage(&cw, v))
            .fold(0.0, f64::max);
        cited_overlap_sum += cited_overlap;
        noncited_overlap_sum += best_noncited;
        if !cited.is_empty() {
            cited_sentences += 1;
            if cited_overlap >= best_noncited {
                attributed += 1;
            }
            if lexical_entailment_judge(&ctx.docs.premise(cited), &s.text) {
                entailed += 1;
            }
        }
        for c in cited {
            total_citations += 1;
            if let Some((_, v)) = doc_vocabs.iter().find(|(i, _)| i == c) {
                valid_citations += 1;
                if coverage(&cw, v) >= 0.5 {
                    useful_citations += 1;
                }
            }
        }
    }

    [
        ratio(cited_sentences, n),
        cited_overlap_sum / n as f64,
        noncited_overlap_sum / n as f64,
        ratio(valid_citations, total_citations),
        ratio(attributed, n),
        (ratio(total_citations, n) / 3.0).min(1.0),
        ratio(entailed, n),
        ratio(useful_citations, total_citations),
    ]
}
