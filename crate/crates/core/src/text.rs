//! Token pipeline shared by knowledge ingestion, alignment scoring, and
//! retrieval: lowercasing, punctuation splitting, a compact stopword list,
//! and light suffix stripping.

use std::collections::BTreeSet;

/// Function words dropped when chunking questions and matching phrases.
/// Deliberately compact: interrogatives are included, content-bearing words
/// ("one", "way", numbers) are not.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "all", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "being", "below", "between",
    "both", "but", "by", "can", "could", "did", "do", "does", "doing", "down",
    "during", "each", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "him", "his", "how", "i", "if",
    "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most",
    "my", "no", "nor", "not", "now", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "same", "she", "should",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when",
    "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// A raw token together with its position in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Index among the raw tokens of the source text, stopwords included.
    pub position: usize,
}

/// Lowercases and splits on any non-alphanumeric character. Empty fragments
/// are dropped; positions count surviving raw tokens from zero.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(position, t)| Token { surface: t.to_string(), position })
        .collect()
}

/// Light suffix stripping: one of -ing, -ed, -es, -s, longest first, applied
/// once. Guards keep short tokens intact ("is", "as" are untouched only by
/// virtue of the stopword list; "gas" stays "ga"-free via the length guard).
pub fn stem(token: &str) -> String {
    let n = token.len();
    if n > 4 && token.ends_with("ing") {
        return token[..n - 3].to_string();
    }
    if n > 3 && token.ends_with("ed") {
        return token[..n - 2].to_string();
    }
    if n > 3 && token.ends_with("es") {
        return token[..n - 2].to_string();
    }
    if n > 3 && token.ends_with('s') && !token.ends_with("ss") {
        return token[..n - 1].to_string();
    }
    token.to_string()
}

/// Stemmed content tokens of a phrase as a set: lowercased, punctuation
/// split, stopwords removed, suffix-stripped. The unit of lexical overlap.
pub fn content_token_set(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(&t.surface))
        .map(|t| stem(&t.surface))
        .collect()
}

/// Stemmed forms of all tokens, stopwords retained, in order. Used for corpus
/// statistics where window distances matter.
pub fn stemmed_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| stem(&t.surface)).collect()
}
