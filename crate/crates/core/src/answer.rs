//! Questions, retrieved documents and citation-annotated answers.
//!
//! Answers travel as plain text with `[k]` markers referring to 1-based
//! document indices. [`parse_cited_answer`] turns that text into a
//! [`CitedAnswer`]: an ordered list of sentences, each with the set of
//! documents it cites. Parsing never fails. Anything that does not look like
//! a positive-integer marker is kept as ordinary text.
//!
//! Sentence boundaries are `.`, `?` or `!` (or a run of them) followed by
//! whitespace or the end of the text. A period ending `e.g.`, `i.e.`,
//! `etc.` or a single-letter initial is not a boundary, and nothing inside a
//! bracketed span splits. Markers that directly follow a boundary
//! (`"A is true. [1] B ..."`) are attached to the sentence they follow.
//! A marker anywhere in a sentence cites the whole sentence.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::text::collapse_whitespace;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AnswerError {
    #[error("document index must be >= 1")]
    ZeroDocIndex,
    #[error("duplicate document index {0}")]
    DuplicateDocIndex(u32),
    #[error("document {0} has an empty body")]
    EmptyDocBody(u32),
    #[error("question {0} has an empty gold answer group")]
    EmptyGoldGroup(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub index: u32,
    pub title: String,
    pub body: String,
}

impl Document {
    pub fn new(index: u32, title: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            index,
            title: title.into(),
            body: body.into(),
        }
    }
}

/// Documents retrieved for one question, with validated unique indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Document>", into = "Vec<Document>")]
pub struct DocumentSet {
    docs: Vec<Document>,
}

impl DocumentSet {
    pub fn new(docs: Vec<Document>) -> Result<Self, AnswerError> {
        let mut seen = HashSet::new();
        for doc in &docs {
            if doc.index == 0 {
                return Err(AnswerError::ZeroDocIndex);
            }
            if !seen.insert(doc.index) {
                return Err(AnswerError::DuplicateDocIndex(doc.index));
            }
            if doc.body.trim().is_empty() {
                return Err(AnswerError::EmptyDocBody(doc.index));
            }
        }
        Ok(Self { docs })
    }

    pub fn get(&self, index: u32) -> Option<&Document> {
        self.docs.iter().find(|d| d.index == index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Largest document index, or 0 for an empty set.
    pub fn max_index(&self) -> u32 {
        self.docs.iter().map(|d| d.index).max().unwrap_or(0)
    }

    pub fn indices(&self) -> Vec<u32> {
        let mut idx: Vec<u32> = self.docs.iter().map(|d| d.index).collect();
        idx.sort_unstable();
        idx
    }

    /// Bodies of the cited documents in ascending index order, joined by a
    /// space. Indices missing from the set contribute nothing.
    pub fn premise(&self, cited: &BTreeSet<u32>) -> String {
        cited
            .iter()
            .filter_map(|i| self.get(*i))
            .map(|d| d.body.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl TryFrom<Vec<Document>> for DocumentSet {
    type Error = AnswerError;

    fn try_from(docs: Vec<Document>) -> Result<Self, Self::Error> {
        Self::new(docs)
    }
}

impl From<DocumentSet> for Vec<Document> {
    fn from(set: DocumentSet) -> Self {
        set.docs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub text: String,
    /// Each group lists interchangeable spellings of one short answer.
    pub gold_aspects: Vec<Vec<String>>,
}

impl Question {
    pub fn validate(&self) -> Result<(), AnswerError> {
        if self.gold_aspects.iter().any(|g| g.is_empty()) {
            return Err(AnswerError::EmptyGoldGroup(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub citations: BTreeSet<u32>,
}

impl Sentence {
    pub fn new(text: impl Into<String>, citations: impl IntoIterator<Item = u32>) -> Self {
        Self {
            text: text.into(),
            citations: citations.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CitedAnswer {
    pub sentences: Vec<Sentence>,
}

impl CitedAnswer {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Self { sentences }
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn citation_count(&self) -> usize {
        self.sentences.iter().map(|s| s.citations.len()).sum()
    }

    /// Sentence texts joined by single spaces, without markers.
    pub fn plain_text(&self) -> String {
        collapse_whitespace(
            &self
                .sentences
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        )
    }

    /// Cited indices that do not name a document in `docs`.
    pub fn unknown_citations(&self, docs: &DocumentSet) -> BTreeSet<u32> {
        self.sentences
            .iter()
            .flat_map(|s| s.citations.iter().copied())
            .filter(|i| docs.get(*i).is_none())
            .collect()
    }
}

impl fmt::Display for CitedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_cited_answer(self))
    }
}

// Answers are stored in rendered marker form wherever they are serialized.
impl Serialize for CitedAnswer {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&render_cited_answer(self))
    }
}

impl<'de> Deserialize<'de> for CitedAnswer {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(parse_cited_answer(&raw))
    }
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

/// If `chars[at]` opens a `[digits]` marker with a positive value, returns
/// the value and the index of the closing bracket.
fn marker_at(chars: &[char], at: usize) -> Option<(u32, usize)> {
    if chars.get(at) != Some(&'[') {
        return None;
    }
    let mut end = at + 1;
    while end < chars.len() && chars[end].is_ascii_digit() {
        end += 1;
    }
    if end == at + 1 || chars.get(end) != Some(&']') {
        return None;
    }
    let digits: String = chars[at + 1..end].iter().collect();
    match digits.parse::<u32>() {
        Ok(v) if v > 0 => Some((v, end)),
        _ => None,
    }
}

/// Closing bracket of a bracketed span starting at `at`, on the same line
/// and without a nested opening bracket.
fn bracket_end(chars: &[char], at: usize) -> Option<usize> {
    for (offset, &c) in chars[at + 1..].iter().enumerate() {
        match c {
            ']' => return Some(at + 1 + offset),
            '[' | '\n' => return None,
            _ => {}
        }
    }
    None
}

/// Whether the period at `dot` ends a protected abbreviation.
fn is_protected_period(chars: &[char], start: usize, dot: usize) -> bool {
    let mut word_start = dot;
    while word_start > start && !chars[word_start - 1].is_whitespace() {
        word_start -= 1;
    }
    let word: String = chars[word_start..=dot]
        .iter()
        .collect::<String>()
        .trim_start_matches(['(', '"', '\''])
        .to_lowercase();
    if word.ends_with("e.g.") || word.ends_with("i.e.") || word.ends_with("etc.") {
        return true;
    }
    let mut it = word.chars();
    matches!((it.next(), it.next(), it.next()), (Some(c), Some('.'), None) if c.is_alphabetic())
}

fn segment(chars: &[char]) -> Vec<(usize, usize)> {
    let n = chars.len();
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if c == '[' {
            if let Some(end) = bracket_end(chars, i) {
                i = end + 1;
                continue;
            }
        }
        if is_terminal(c) {
            let mut last = i;
            while last + 1 < n && is_terminal(chars[last + 1]) {
                last += 1;
            }
            let next = last + 1;
            let at_boundary = next == n || chars[next].is_whitespace();
            let protected = last == i && c == '.' && is_protected_period(chars, start, i);
            if at_boundary && !protected {
                let mut end = next;
                loop {
                    let mut probe = end;
                    while probe < n && chars[probe].is_whitespace() {
                        probe += 1;
                    }
                    match marker_at(chars, probe) {
                        Some((_, close)) => end = close + 1,
                        None => break,
                    }
                }
                spans.push((start, end));
                start = end;
                i = end;
                continue;
            }
            i = next;
            continue;
        }
        i += 1;
    }
    if start < n {
        spans.push((start, n));
    }
    spans
}

fn build_sentence(chars: &[char]) -> Sentence {
    let mut text = String::new();
    let mut citations = BTreeSet::new();
    let mut after_marker = false;
    let mut i = 0;
    while i < chars.len() {
        if let Some((value, close)) = marker_at(chars, i) {
            citations.insert(value);
            let trimmed = text.trim_end().len();
            text.truncate(trimmed);
            after_marker = true;
            i = close + 1;
            continue;
        }
        let c = chars[i];
        if after_marker {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let attaches = matches!(c, '.' | ',' | ';' | ':' | '?' | '!' | ')');
            if !text.is_empty() && !attaches {
                text.push(' ');
            }
            after_marker = false;
        }
        text.push(c);
        i += 1;
    }
    Sentence {
        text: collapse_whitespace(&text),
        citations,
    }
}

/// Splits raw model output into sentences and collects their citations.
///
/// ```
/// use ifl_core::answer::parse_cited_answer;
///
/// let a = parse_cited_answer("A is true [1][3]. B is false.");
/// assert_eq!(a.sentences.len(), 2);
/// assert_eq!(a.sentences[0].citations.iter().copied().collect::<Vec<_>>(), vec![1, 3]);
/// assert!(a.sentences[1].citations.is_empty());
/// ```
pub fn parse_cited_answer(raw: &str) -> CitedAnswer {
    let chars: Vec<char> = raw.chars().collect();
    let sentences = segment(&chars)
        .into_iter()
        .map(|(s, e)| build_sentence(&chars[s..e]))
        .filter(|s| !s.text.is_empty() || !s.citations.is_empty())
        .collect();
    CitedAnswer { sentences }
}

/// Renders sentences joined by single spaces, with each sentence's markers
/// in ascending order just before its terminal punctuation.
pub fn render_cited_answer(answer: &CitedAnswer) -> String {
    answer
        .sentences
        .iter()
        .map(render_sentence)
        .collect::<Vec<_>>()
        .join(" ")
}

fn render_sentence(sentence: &Sentence) -> String {
    if sentence.citations.is_empty() {
        return sentence.text.clone();
    }
    let body = sentence.text.trim_end_matches(is_terminal);
    let terminal = &sentence.text[body.len()..];
    let markers: String = sentence.citations.iter().map(|c| format!("[{c}]")).collect();
    if body.is_empty() {
        format!("{markers}{terminal}")
    } else {
        format!("{body} {markers}{terminal}")
    }
}

/// Marker-free, whitespace-normalized text of `raw`.
pub fn strip_citations(raw: &str) -> String {
    parse_cited_answer(raw).plain_text()
}

static VERBOSE_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*Citation:\s*Doc\s*(\d+)\s*\]").expect("valid regex"));

/// Rewrites `[Citation: Doc k]` markers to the canonical `[k]` form.
pub fn normalize_marker_style(raw: &str) -> String {
    VERBOSE_MARKER.replace_all(raw, "[$1]").into_owned()
}
