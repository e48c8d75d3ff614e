//! Sentence corpus with token and windowed pair counts, the backing store
//! for pointwise mutual information and sentence retrieval.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::stemmed_tokens;

use super::KbError;

/// One line of input = one sentence. Tokens are lowercased and stemmed;
/// stopwords are retained so window distances reflect the original text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Vec<String>>,
    /// Max token distance for a co-occurrence, within one sentence.
    pub window: usize,
    pub token_counts: BTreeMap<String, u64>,
    /// Keyed by the lexicographically sorted token pair.
    pub pair_counts: BTreeMap<(String, String), u64>,
    pub total_tokens: u64,
}

impl Corpus {
    pub fn token_count(&self, token: &str) -> u64 {
        self.token_counts.get(token).copied().unwrap_or(0)
    }

    /// Symmetric lookup: `pair_count(a, b) == pair_count(b, a)`.
    pub fn pair_count(&self, a: &str, b: &str) -> u64 {
        let key = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.pair_counts.get(&key).copied().unwrap_or(0)
    }
}

/// Builds the corpus from raw text, one sentence per line. `window` must be
/// at least 1; each ordered position pair within the window adds one count
/// to its unordered token pair.
pub fn build_corpus(text: &str, window: usize) -> Result<Corpus, KbError> {
    if window == 0 {
        return Err(KbError::InvalidWindow);
    }
    let mut sentences = Vec::new();
    let mut token_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
    let mut total_tokens = 0u64;
    for line in text.lines() {
        let tokens = stemmed_tokens(line);
        if tokens.is_empty() {
            continue;
        }
        for t in &tokens {
            *token_counts.entry(t.clone()).or_insert(0) += 1;
            total_tokens += 1;
        }
        for i in 0..tokens.len() {
            for j in (i + 1)..tokens.len().min(i + window + 1) {
                let (a, b) = (&tokens[i], &tokens[j]);
                let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                *pair_counts.entry(key).or_insert(0) += 1;
            }
        }
        sentences.push(tokens);
    }
    Ok(Corpus { sentences, window, token_counts, pair_counts, total_tokens })
}

pub fn load_corpus(path: &Path, window: usize) -> Result<Corpus, KbError> {
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    build_corpus(&text, window)
}
