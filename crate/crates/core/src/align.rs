//! Lexical alignment between knowledge elements and question parts. Every
//! sufficiently similar pair becomes a candidate edge; the ILP later decides
//! which candidates to keep.

use serde::{Deserialize, Serialize};

use crate::kb::{QuestionInstance, Table};
use crate::text::content_token_set;

/// Per-edge-kind score thresholds. "Title" thresholds gate both column-header
/// and table-title edges; the two QChoiceCons and the title-title thresholds
/// are carried for configurability even though no default edge kind uses them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentConfig {
    pub min_cell_cell_alignment: f64,
    pub min_title_title_alignment: f64,
    pub min_cell_q_cons_alignment: f64,
    pub min_title_q_cons_alignment: f64,
    pub min_cell_q_choice_alignment: f64,
    pub min_title_q_choice_alignment: f64,
    pub min_cell_q_choice_cons_alignment: f64,
    pub min_title_q_choice_cons_alignment: f64,
    pub min_active_cell_aggr_alignment: f64,
    pub min_active_title_aggr_alignment: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            min_cell_cell_alignment: 0.6,
            min_title_title_alignment: 0.0,
            min_cell_q_cons_alignment: 0.1,
            min_title_q_cons_alignment: 0.1,
            min_cell_q_choice_alignment: 0.2,
            min_title_q_choice_alignment: 0.2,
            min_cell_q_choice_cons_alignment: 0.4,
            min_title_q_choice_cons_alignment: 0.4,
            min_active_cell_aggr_alignment: 0.1,
            min_active_title_aggr_alignment: 0.1,
        }
    }
}

/// One endpoint of a candidate edge. Indices refer to positions in the table
/// list, the table's own grid, the question's constituent list, or the
/// question's option list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElementRef {
    Cell { table: usize, row: usize, col: usize },
    Header { table: usize, col: usize },
    Title { table: usize },
    Constituent { index: usize },
    Option { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Cells of two different tables.
    CellCellInter,
    /// Cells of distinct rows of one table.
    CellCellIntra,
    CellQCons,
    HeaderQCons,
    CellQOption,
    HeaderQOption,
    TitleQCons,
    TitleQOption,
}

/// A candidate alignment. `weight` is the raw lexical score even where the
/// objective later adjusts it (intra-table cell pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub kind: EdgeKind,
    pub a: ElementRef,
    pub b: ElementRef,
    pub weight: f64,
}

/// Pluggable phrase-pair scorer. Implementations must be symmetric and map
/// into [0, 1].
pub trait Scorer {
    fn score(&self, x: &str, y: &str) -> f64;
}

/// Jaccard-style overlap on stemmed content tokens, normalized by the larger
/// set. Either side empty scores 0.
#[derive(Debug, Default, Clone, Copy)]
pub struct TokenOverlapScorer;

impl Scorer for TokenOverlapScorer {
    fn score(&self, x: &str, y: &str) -> f64 {
        let tx = content_token_set(x);
        let ty = content_token_set(y);
        if tx.is_empty() || ty.is_empty() {
            return 0.0;
        }
        let shared = tx.intersection(&ty).count();
        shared as f64 / tx.len().max(ty.len()) as f64
    }
}

/// Scores two phrases with the default token-overlap scorer.
pub fn score(x: &str, y: &str) -> f64 {
    TokenOverlapScorer.score(x, y)
}

/// Enumerates all candidate edges between the tables and the question whose
/// score meets the kind's threshold. Output is in canonical order: by kind,
/// then by endpoint indices ascending, so identical inputs always produce an
/// identical edge list.
pub fn build_candidate_edges(
    tables: &[Table],
    question: &QuestionInstance,
    cfg: &AlignmentConfig,
    scorer: &dyn Scorer,
) -> Vec<ScoredEdge> {
    let mut edges = Vec::new();
    let mut push = |kind: EdgeKind, a: ElementRef, b: ElementRef, w: f64, min: f64| {
        if w >= min {
            edges.push(ScoredEdge { kind, a, b, weight: w });
        }
    };

    // Cell-cell across tables.
    for i in 0..tables.len() {
        for i2 in (i + 1)..tables.len() {
            for j in 0..tables[i].n_rows() {
                for k in 0..tables[i].n_cols() {
                    for j2 in 0..tables[i2].n_rows() {
                        for k2 in 0..tables[i2].n_cols() {
                            let w = scorer.score(tables[i].cell(j, k), tables[i2].cell(j2, k2));
                            push(
                                EdgeKind::CellCellInter,
                                ElementRef::Cell { table: i, row: j, col: k },
                                ElementRef::Cell { table: i2, row: j2, col: k2 },
                                w,
                                cfg.min_cell_cell_alignment,
                            );
                        }
                    }
                }
            }
        }
    }
    // Cell-cell between distinct rows of one table.
    for (i, t) in tables.iter().enumerate() {
        for j in 0..t.n_rows() {
            for j2 in (j + 1)..t.n_rows() {
                for k in 0..t.n_cols() {
                    for k2 in 0..t.n_cols() {
                        let w = scorer.score(t.cell(j, k), t.cell(j2, k2));
                        push(
                            EdgeKind::CellCellIntra,
                            ElementRef::Cell { table: i, row: j, col: k },
                            ElementRef::Cell { table: i, row: j2, col: k2 },
                            w,
                            cfg.min_cell_cell_alignment,
                        );
                    }
                }
            }
        }
    }
    // Cells and headers against question constituents.
    for (i, t) in tables.iter().enumerate() {
        for j in 0..t.n_rows() {
            for k in 0..t.n_cols() {
                for (l, c) in question.constituents.iter().enumerate() {
                    let w = scorer.score(t.cell(j, k), &c.text);
                    push(
                        EdgeKind::CellQCons,
                        ElementRef::Cell { table: i, row: j, col: k },
                        ElementRef::Constituent { index: l },
                        w,
                        cfg.min_cell_q_cons_alignment,
                    );
                }
            }
        }
    }
    for (i, t) in tables.iter().enumerate() {
        for k in 0..t.n_cols() {
            for (l, c) in question.constituents.iter().enumerate() {
                let w = scorer.score(&t.headers[k], &c.text);
                push(
                    EdgeKind::HeaderQCons,
                    ElementRef::Header { table: i, col: k },
                    ElementRef::Constituent { index: l },
                    w,
                    cfg.min_title_q_cons_alignment,
                );
            }
        }
    }
    // Cells and headers against answer options.
    for (i, t) in tables.iter().enumerate() {
        for j in 0..t.n_rows() {
            for k in 0..t.n_cols() {
                for (m, o) in question.options.iter().enumerate() {
                    let w = scorer.score(t.cell(j, k), o);
                    push(
                        EdgeKind::CellQOption,
                        ElementRef::Cell { table: i, row: j, col: k },
                        ElementRef::Option { index: m },
                        w,
                        cfg.min_cell_q_choice_alignment,
                    );
                }
            }
        }
    }
    for (i, t) in tables.iter().enumerate() {
        for k in 0..t.n_cols() {
            for (m, o) in question.options.iter().enumerate() {
                let w = scorer.score(&t.headers[k], o);
                push(
                    EdgeKind::HeaderQOption,
                    ElementRef::Header { table: i, col: k },
                    ElementRef::Option { index: m },
                    w,
                    cfg.min_title_q_choice_alignment,
                );
            }
        }
    }
    // Table titles against constituents and options.
    for (i, t) in tables.iter().enumerate() {
        for (l, c) in question.constituents.iter().enumerate() {
            let w = scorer.score(&t.title, &c.text);
            push(
                EdgeKind::TitleQCons,
                ElementRef::Title { table: i },
                ElementRef::Constituent { index: l },
                w,
                cfg.min_title_q_cons_alignment,
            );
        }
        for (m, o) in question.options.iter().enumerate() {
            let w = scorer.score(&t.title, o);
            push(
                EdgeKind::TitleQOption,
                ElementRef::Title { table: i },
                ElementRef::Option { index: m },
                w,
                cfg.min_title_q_choice_alignment,
            );
        }
    }

    edges.sort_by(|x, y| (x.kind, x.a, x.b).partial_cmp(&(y.kind, y.a, y.b)).unwrap());
    edges
}

/// Convenience wrapper using [`TokenOverlapScorer`].
pub fn candidate_edges(
    tables: &[Table],
    question: &QuestionInstance,
    cfg: &AlignmentConfig,
) -> Vec<ScoredEdge> {
    build_candidate_edges(tables, question, cfg, &TokenOverlapScorer)
}
