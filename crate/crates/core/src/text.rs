//! Tokenization and normalization shared by features, metrics and the judge.

use std::collections::HashSet;
use std::sync::LazyLock;

const STOPWORD_LIST: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "then", "of", "to", "in", "on", "at", "by", "for", "with", "from",
    "as", "into", "about", "is", "are", "was", "were", "be", "been", "being", "has", "have", "had", "do", "does",
    "did", "it", "its", "this", "that", "these", "those", "there", "their", "they", "them", "he", "she", "his", "her",
    "we", "our", "you", "your", "i", "me", "my", "not", "no", "so", "than", "too", "very", "can", "will", "would",
    "should", "could", "may", "might", "also", "which", "who", "whom", "what", "when", "where", "why", "how", "all",
    "any", "both", "each", "some", "such", "only", "own", "same", "other", "more", "most", "over", "under", "again",
    "further", "once", "here", "up", "down", "out", "off", "just", "while", "after", "before", "between", "during",
    "through",
];

static STOPWORDS: LazyLock<HashSet<&'static str>> = LazyLock::new(|| STOPWORD_LIST.iter().copied().collect());

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(word)
}

/// Lowercases and trims non-alphanumeric characters from both ends, so
/// `"million."` becomes `"million"` while `"9.41"` keeps its inner point.
pub fn normalize_token(raw: &str) -> String {
    raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()
}

/// Whitespace-split, normalized, non-empty tokens.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn content_words(text: &str) -> Vec<String> {
    tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

pub fn is_numeric(token: &str) -> bool {
    token.chars().any(|c| c.is_ascii_digit())
}

/// Collapses every whitespace run to a single space and trims the ends.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Answer normalization used for exact-match recall: lowercase, drop
/// punctuation, drop the articles a/an/the, collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|w| !matches!(*w, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fraction of `words` that occur in `vocabulary`; 0 for an empty list.
pub fn coverage(words: &[String], vocabulary: &HashSet<String>) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    let hits = words.iter().filter(|w| vocabulary.contains(*w)).count();
    hits as f64 / words.len() as f64
}

pub fn vocabulary<'a>(texts: impl IntoIterator<Item = &'a str>) -> HashSet<String> {
    texts.into_iter().flat_map(tokens).collect()
}
