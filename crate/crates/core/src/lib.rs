//! Table-grounded multiple-choice question answering. A question and a set
//! of curated tables are compiled into a 0/1 integer linear program whose
//! optimal support graph simultaneously selects an answer option and the
//! table rows, columns, and alignments that justify it. The crate bundles
//! the lexical alignment layer, the program builder, an exact
//! branch-and-bound solver with LP-relaxation bounds, essential-term
//! scoring with its forcing cascade, and a feature-based combiner for
//! mixing this solver with other answer sources.

pub mod align;
pub mod config;
pub mod ensemble;
pub mod essential;
pub mod kb;
pub mod model;
pub mod reason;
pub mod solver;
pub mod synthetic;
pub mod text;
