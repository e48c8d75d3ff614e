//! Multiple-choice questions from JSON lines, one object per line:
//! `{"id": "...", "text": "...", "options": ["..."], "constituents": [...],
//! "gold": 0}` where `constituents` and `gold` are optional.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::text::{is_stopword, tokenize};

use super::KbError;

/// A content-bearing question chunk. `position` is the chunk's index among
/// the raw tokens of the question (stopwords counted), so proximity
/// constraints can measure the original distance between chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub text: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionInstance {
    pub id: String,
    pub text: String,
    pub constituents: Vec<Constituent>,
    /// At least two options; `gold`, when present, indexes into them.
    pub options: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<usize>,
}

/// Splits question text into content constituents: lowercased tokens split
/// on whitespace and punctuation, stopwords removed, original positions
/// retained. Errors when nothing survives.
pub fn chunk_question(text: &str) -> Result<Vec<Constituent>, KbError> {
    let out: Vec<Constituent> = tokenize(text)
        .into_iter()
        .filter(|t| !is_stopword(&t.surface))
        .map(|t| Constituent { text: t.surface, position: t.position })
        .collect();
    if out.is_empty() {
        return Err(KbError::NoContentConstituents);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RawQuestion {
    id: String,
    text: String,
    options: Vec<String>,
    #[serde(default)]
    constituents: Option<Vec<String>>,
    #[serde(default)]
    gold: Option<usize>,
}

/// Loads questions from a JSONL file. Pre-chunked `constituents` are taken
/// verbatim with consecutive positions; otherwise the text is chunked here.
pub fn load_questions(path: &Path) -> Result<Vec<QuestionInstance>, KbError> {
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_questions(&text)
}

pub(crate) fn parse_questions(text: &str) -> Result<Vec<QuestionInstance>, KbError> {
    let mut out: Vec<QuestionInstance> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawQuestion =
            serde_json::from_str(line).map_err(|e| KbError::MalformedQuestion {
                line: line_no,
                message: e.to_string(),
            })?;
        if raw.options.len() < 2 {
            return Err(KbError::TooFewOptions { id: raw.id });
        }
        if let Some(gold) = raw.gold {
            if gold >= raw.options.len() {
                return Err(KbError::GoldOutOfRange {
                    id: raw.id,
                    gold,
                    n: raw.options.len(),
                });
            }
        }
        if out.iter().any(|q| q.id == raw.id) {
            return Err(KbError::DuplicateQuestionId { id: raw.id });
        }
        let constituents = match raw.constituents {
            Some(chunks) => chunks
                .into_iter()
                .enumerate()
                .map(|(position, text)| Constituent { text: text.to_lowercase(), position })
                .collect(),
            None => chunk_question(&raw.text).map_err(|_| KbError::MalformedQuestion {
                line: line_no,
                message: format!("question '{}': no content constituents", raw.id),
            })?,
        };
        out.push(QuestionInstance {
            id: raw.id,
            text: raw.text,
            constituents,
            options: raw.options,
            gold: raw.gold,
        });
    }
    Ok(out)
}
