//! Titled-grid tables loaded from a tab-separated format:
//!
//! ```text
//! * Animal responses
//! animal<TAB>response
//! dog<TAB>pants
//! # comment lines start with '#'
//! @rel 0 1 responds by|reacts with
//! ```
//!
//! A `*` line starts a new table, so one file can carry several tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KbError;

/// A declared semantic relation between two columns, with the phrases that
/// signal it in question text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDecl {
    pub col_a: usize,
    pub col_b: usize,
    pub triggers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    /// Slug of the title; stable across reloads of the same content.
    pub id: String,
    pub title: String,
    pub headers: Vec<String>,
    /// Every row has exactly `headers.len()` cells.
    pub rows: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<RelationDecl>,
}

impl Table {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.headers.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &str {
        &self.rows[row][col]
    }
}

fn slug(title: &str) -> String {
    let mut out = String::new();
    let mut last_dash = true;
    for c in title.to_lowercase().chars() {
        if c.is_alphanumeric() {
            out.push(c);
            last_dash = false;
        } else if !last_dash {
            out.push('-');
            last_dash = true;
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

/// Parses every table in the file. Rejects ragged rows, duplicate ids (two
/// identical titles), out-of-range relation columns, and rows appearing
/// before the first title line.
pub fn load_tables(path: &Path) -> Result<Vec<Table>, KbError> {
    let text = fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tables(&text)
}

pub(crate) fn parse_tables(text: &str) -> Result<Vec<Table>, KbError> {
    struct Partial {
        title: String,
        headers: Option<Vec<String>>,
        rows: Vec<Vec<String>>,
        relations: Vec<RelationDecl>,
    }

    fn finish(p: Partial, out: &mut Vec<Table>) -> Result<(), KbError> {
        let id = slug(&p.title);
        let headers = p.headers.ok_or(KbError::MissingHeader { id: id.clone() })?;
        let ncols = headers.len();
        for rel in &p.relations {
            for col in [rel.col_a, rel.col_b] {
                if col >= ncols {
                    return Err(KbError::RelationColumnOutOfRange { id, col, ncols });
                }
            }
        }
        if out.iter().any(|t: &Table| t.id == id) {
            return Err(KbError::DuplicateTableId { id });
        }
        out.push(Table { id, title: p.title, headers, rows: p.rows, relations: p.relations });
        Ok(())
    }

    let mut tables = Vec::new();
    let mut current: Option<Partial> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(title) = trimmed.strip_prefix('*') {
            if let Some(p) = current.take() {
                finish(p, &mut tables)?;
            }
            current = Some(Partial {
                title: title.trim().to_string(),
                headers: None,
                rows: Vec::new(),
                relations: Vec::new(),
            });
            continue;
        }
        let Some(p) = current.as_mut() else {
            return Err(KbError::RowOutsideTable { line: line_no });
        };
        if let Some(rest) = trimmed.strip_prefix("@rel") {
            let id = slug(&p.title);
            let malformed = || KbError::MalformedRelation { id: id.clone(), line: line_no };
            let mut parts = rest.split_whitespace();
            let col_a = parts
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(malformed)?;
            let col_b = parts
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .ok_or_else(malformed)?;
            let phrase_text = parts.collect::<Vec<_>>().join(" ");
            let triggers: Vec<String> = phrase_text
                .split('|')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if triggers.is_empty() {
                return Err(malformed());
            }
            p.relations.push(RelationDecl { col_a, col_b, triggers });
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(|c| c.trim().to_string()).collect();
        match &p.headers {
            None => p.headers = Some(cells),
            Some(headers) => {
                if cells.len() != headers.len() {
                    return Err(KbError::RaggedRow {
                        id: slug(&p.title),
                        row: p.rows.len() + 1,
                        expected: headers.len(),
                        found: cells.len(),
                    });
                }
                p.rows.push(cells);
            }
        }
    }
    if let Some(p) = current.take() {
        finish(p, &mut tables)?;
    }
    Ok(tables)
}
