//! Knowledge inputs: titled tables, multiple-choice questions, and a plain
//! text corpus with windowed co-occurrence counts.

mod corpus;
mod question;
mod table;

pub use corpus::{build_corpus, load_corpus, Corpus};
pub use question::{chunk_question, load_questions, Constituent, QuestionInstance};
pub use table::{load_tables, RelationDecl, Table};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: table row before any '*' title line")]
    RowOutsideTable { line: usize },
    #[error("table '{id}': missing header line")]
    MissingHeader { id: String },
    #[error("table '{id}' row {row}: expected {expected} cells, found {found}")]
    RaggedRow { id: String, row: usize, expected: usize, found: usize },
    #[error("duplicate table id '{id}'")]
    DuplicateTableId { id: String },
    #[error("table '{id}': relation references column {col} but the table has {ncols} columns")]
    RelationColumnOutOfRange { id: String, col: usize, ncols: usize },
    #[error("table '{id}': malformed @rel line {line}")]
    MalformedRelation { id: String, line: usize },
    #[error("question line {line}: {message}")]
    MalformedQuestion { line: usize, message: String },
    #[error("question '{id}': fewer than 2 answer options")]
    TooFewOptions { id: String },
    #[error("question '{id}': gold index {gold} out of range for {n} options")]
    GoldOutOfRange { id: String, gold: usize, n: usize },
    #[error("duplicate question id '{id}'")]
    DuplicateQuestionId { id: String },
    #[error("no content constituents after stopword removal")]
    NoContentConstituents,
    #[error("corpus window must be at least 1")]
    InvalidWindow,
}
