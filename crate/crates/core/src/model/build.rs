//! Turns candidate alignment edges into the full integer program: unary
//! activity variables, pairwise edge variables, column/table-choice link
//! variables, auxiliary boosts, and every constraint family.

use std::collections::{BTreeMap, BTreeSet};

use crate::align::{EdgeKind, ElementRef, Scorer, ScoredEdge, TokenOverlapScorer};
use crate::kb::{QuestionInstance, Table};
use crate::text::{content_token_set, tokenize};

use super::ilp::{ConstraintTag, IlpProblem, Sense, VarId, VarKind};
use super::{ModelConfig, VariableWeights};

/// Edge-index sets keyed by the elements they touch, the raw material of the
/// constraint families. `row_nonchoice` holds a row's cell-cell and
/// cell-constituent edges, `row_nonquestion` its cell-cell and cell-option
/// edges, `table_nonchoice` the table-level non-option analogue,
/// `column_choice` the per-(table, column, option) cell/header-option edges.
/// Title edges join no set: the set definitions cover cell and header pairs
/// only.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IncidenceSets {
    pub header: BTreeMap<(usize, usize), Vec<usize>>,
    pub cell: BTreeMap<(usize, usize, usize), Vec<usize>>,
    pub column: BTreeMap<(usize, usize), Vec<usize>>,
    pub row: BTreeMap<(usize, usize), Vec<usize>>,
    pub row_nonchoice: BTreeMap<(usize, usize), Vec<usize>>,
    pub row_nonquestion: BTreeMap<(usize, usize), Vec<usize>>,
    pub table: BTreeMap<usize, Vec<usize>>,
    pub table_nonchoice: BTreeMap<usize, Vec<usize>>,
    pub constituent: BTreeMap<usize, Vec<usize>>,
    pub choice: BTreeMap<usize, Vec<usize>>,
    pub column_choice: BTreeMap<(usize, usize, usize), Vec<usize>>,
}

pub fn build_incidence_sets(edges: &[ScoredEdge]) -> IncidenceSets {
    fn push<K: Ord + Copy>(map: &mut BTreeMap<K, Vec<usize>>, key: K, idx: usize) {
        map.entry(key).or_default().push(idx);
    }
    let mut s = IncidenceSets::default();
    for (idx, e) in edges.iter().enumerate() {
        match (e.a, e.b) {
            (
                ElementRef::Cell { table, row, col },
                ElementRef::Cell { table: t2, row: r2, col: c2 },
            ) => {
                for (i, j, k) in [(table, row, col), (t2, r2, c2)] {
                    push(&mut s.cell, (i, j, k), idx);
                    push(&mut s.row, (i, j), idx);
                    push(&mut s.column, (i, k), idx);
                    push(&mut s.table, i, idx);
                    push(&mut s.row_nonchoice, (i, j), idx);
                    push(&mut s.row_nonquestion, (i, j), idx);
                    push(&mut s.table_nonchoice, i, idx);
                }
            }
            (ElementRef::Cell { table, row, col }, ElementRef::Constituent { index }) => {
                push(&mut s.cell, (table, row, col), idx);
                push(&mut s.row, (table, row), idx);
                push(&mut s.column, (table, col), idx);
                push(&mut s.table, table, idx);
                push(&mut s.row_nonchoice, (table, row), idx);
                push(&mut s.table_nonchoice, table, idx);
                push(&mut s.constituent, index, idx);
            }
            (ElementRef::Cell { table, row, col }, ElementRef::Option { index }) => {
                push(&mut s.cell, (table, row, col), idx);
                push(&mut s.row, (table, row), idx);
                push(&mut s.column, (table, col), idx);
                push(&mut s.table, table, idx);
                push(&mut s.row_nonquestion, (table, row), idx);
                push(&mut s.choice, index, idx);
                push(&mut s.column_choice, (table, col, index), idx);
            }
            (ElementRef::Header { table, col }, ElementRef::Constituent { index }) => {
                push(&mut s.header, (table, col), idx);
                push(&mut s.column, (table, col), idx);
                push(&mut s.table, table, idx);
                push(&mut s.table_nonchoice, table, idx);
                push(&mut s.constituent, index, idx);
            }
            (ElementRef::Header { table, col }, ElementRef::Option { index }) => {
                push(&mut s.header, (table, col), idx);
                push(&mut s.column, (table, col), idx);
                push(&mut s.table, table, idx);
                push(&mut s.choice, index, idx);
                push(&mut s.column_choice, (table, col, index), idx);
            }
            (ElementRef::Title { .. }, _) => {}
            other => unreachable!("unexpected edge endpoints {other:?}"),
        }
    }
    // A cell pair within one column or one table lands in the same set from
    // both endpoints; dedup keeps each set a set.
    fn dedup<K: Ord>(map: &mut BTreeMap<K, Vec<usize>>) {
        for v in map.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
    }
    dedup(&mut s.header);
    dedup(&mut s.cell);
    dedup(&mut s.column);
    dedup(&mut s.row);
    dedup(&mut s.row_nonchoice);
    dedup(&mut s.row_nonquestion);
    dedup(&mut s.table);
    dedup(&mut s.table_nonchoice);
    dedup(&mut s.constituent);
    dedup(&mut s.choice);
    dedup(&mut s.column_choice);
    s
}

fn elem_code(e: ElementRef) -> String {
    match e {
        ElementRef::Cell { table, row, col } => format!("t{table}_{row}_{col}"),
        ElementRef::Header { table, col } => format!("h{table}_{col}"),
        ElementRef::Title { table } => format!("T{table}"),
        ElementRef::Constituent { index } => format!("q{index}"),
        ElementRef::Option { index } => format!("a{index}"),
    }
}

/// Lookup maps from model element to variable id, rebuilt from the kinds
/// recorded on the problem's variables.
#[derive(Debug, Default, Clone)]
pub(crate) struct ModelVars {
    pub table: BTreeMap<usize, VarId>,
    pub row: BTreeMap<(usize, usize), VarId>,
    pub column: BTreeMap<(usize, usize), VarId>,
    pub header: BTreeMap<(usize, usize), VarId>,
    pub cell: BTreeMap<(usize, usize, usize), VarId>,
    pub constituent: BTreeMap<usize, VarId>,
    pub choice: BTreeMap<usize, VarId>,
    /// Pairwise variable ids in candidate-edge order.
    pub pair: Vec<VarId>,
    pub column_choice: BTreeMap<(usize, usize, usize), VarId>,
    pub table_choice: BTreeMap<(usize, usize), VarId>,
}

impl ModelVars {
    pub fn from_problem(p: &IlpProblem) -> ModelVars {
        let mut m = ModelVars::default();
        for (idx, v) in p.vars.iter().enumerate() {
            let id = VarId(idx);
            match v.kind {
                Some(VarKind::Table { table }) => {
                    m.table.insert(table, id);
                }
                Some(VarKind::Row { table, row }) => {
                    m.row.insert((table, row), id);
                }
                Some(VarKind::Column { table, col }) => {
                    m.column.insert((table, col), id);
                }
                Some(VarKind::Header { table, col }) => {
                    m.header.insert((table, col), id);
                }
                Some(VarKind::Cell { table, row, col }) => {
                    m.cell.insert((table, row, col), id);
                }
                Some(VarKind::Constituent { index }) => {
                    m.constituent.insert(index, id);
                }
                Some(VarKind::Choice { index }) => {
                    m.choice.insert(index, id);
                }
                Some(VarKind::Pair { .. }) => m.pair.push(id),
                Some(VarKind::ColumnChoice { table, col, choice }) => {
                    m.column_choice.insert((table, col, choice), id);
                }
                Some(VarKind::TableChoice { table, choice }) => {
                    m.table_choice.insert((table, choice), id);
                }
                _ => {}
            }
        }
        m
    }
}

/// Registers one pairwise variable per candidate edge plus unary variables
/// for every element an edge touches, including the structural ancestors of
/// cell and header endpoints (row, column, table). Objective weights follow
/// [`VariableWeights`]: pairwise variables carry their edge score, with a
/// constant weight for cross-table cell pairs and the intra-table adjustment
/// for within-table pairs.
pub fn build_variables(
    question: &QuestionInstance,
    edges: &[ScoredEdge],
    weights: &VariableWeights,
) -> IlpProblem {
    let mut tables: BTreeSet<usize> = BTreeSet::new();
    let mut rows: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut cols: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut headers: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut cells: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    let mut cons: BTreeSet<usize> = BTreeSet::new();
    let mut choices: BTreeSet<usize> = BTreeSet::new();
    let mut touch = |e: ElementRef| match e {
        ElementRef::Cell { table, row, col } => {
            tables.insert(table);
            rows.insert((table, row));
            cols.insert((table, col));
            cells.insert((table, row, col));
        }
        ElementRef::Header { table, col } => {
            tables.insert(table);
            cols.insert((table, col));
            headers.insert((table, col));
        }
        ElementRef::Title { table } => {
            tables.insert(table);
        }
        ElementRef::Constituent { index } => {
            cons.insert(index);
        }
        ElementRef::Option { index } => {
            choices.insert(index);
        }
    };
    for e in edges {
        touch(e.a);
        touch(e.b);
    }

    let mut p = IlpProblem::new(question.id.clone());
    for &i in &tables {
        p.add_var(format!("xT{i}"), weights.table_active, Some(VarKind::Table { table: i }));
    }
    for &(i, j) in &rows {
        p.add_var(format!("xr{i}_{j}"), weights.row_active, Some(VarKind::Row { table: i, row: j }));
    }
    for &(i, k) in &cols {
        p.add_var(
            format!("xl{i}_{k}"),
            weights.column_active,
            Some(VarKind::Column { table: i, col: k }),
        );
    }
    for &(i, k) in &headers {
        p.add_var(
            format!("xh{i}_{k}"),
            weights.header_active,
            Some(VarKind::Header { table: i, col: k }),
        );
    }
    for &(i, j, k) in &cells {
        p.add_var(
            format!("xt{i}_{j}_{k}"),
            weights.cell_active,
            Some(VarKind::Cell { table: i, row: j, col: k }),
        );
    }
    for &l in &cons {
        p.add_var(format!("xq{l}"), weights.constituent_active, Some(VarKind::Constituent { index: l }));
    }
    for &m in &choices {
        p.add_var(format!("xa{m}"), weights.choice_active, Some(VarKind::Choice { index: m }));
    }
    for e in edges {
        let weight = match e.kind {
            EdgeKind::CellCellInter => weights.cell_cell_inter,
            EdgeKind::CellCellIntra => e.weight + weights.intra_table_adjust,
            _ => e.weight,
        };
        p.add_var(
            format!("y_{}__{}", elem_code(e.a), elem_code(e.b)),
            weight,
            Some(VarKind::Pair { kind: e.kind, a: e.a, b: e.b, raw_weight: e.weight }),
        );
    }
    p
}

fn sum(ids: impl IntoIterator<Item = VarId>) -> Vec<(VarId, f64)> {
    ids.into_iter().map(|id| (id, 1.0)).collect()
}

/// The text on the knowledge side of a cell- or header-to-option edge.
fn table_side_text<'t>(tables: &'t [Table], e: &ScoredEdge) -> Option<&'t str> {
    match e.a {
        ElementRef::Cell { table, row, col } => Some(tables[table].cell(row, col)),
        ElementRef::Header { table, col } => Some(&tables[table].headers[col]),
        _ => None,
    }
}

/// Appends every constraint family to a problem produced by
/// [`build_variables`] over the same edge list, creating the column-choice,
/// table-choice, and auxiliary variables along the way.
pub fn build_constraints(
    p: &mut IlpProblem,
    tables: &[Table],
    question: &QuestionInstance,
    edges: &[ScoredEdge],
    sets: &IncidenceSets,
    cfg: &ModelConfig,
) {
    let consts = &cfg.constants;
    let mut vars = ModelVars::from_problem(p);
    let pair = |vars: &ModelVars, idx: usize| vars.pair[idx];

    // Column-choice and table-choice link variables.
    for &(i, k, m) in sets.column_choice.keys() {
        let id = p.add_var(
            format!("yca{i}_{k}_{m}"),
            0.0,
            Some(VarKind::ColumnChoice { table: i, col: k, choice: m }),
        );
        vars.column_choice.insert((i, k, m), id);
    }
    let table_choice_keys: BTreeSet<(usize, usize)> =
        sets.column_choice.keys().map(|&(i, _, m)| (i, m)).collect();
    for &(i, m) in &table_choice_keys {
        let id = p.add_var(
            format!("yta{i}_{m}"),
            0.0,
            Some(VarKind::TableChoice { table: i, choice: m }),
        );
        vars.table_choice.insert((i, m), id);
    }

    // Which-term boosts. Detection runs on the raw question tokens so the
    // stopword list cannot hide the trigger.
    let raw_tokens = tokenize(&question.text);
    let which_pos = raw_tokens.iter().find(|t| t.surface == "which").map(|t| t.position);
    let mut which_active_var = None;
    let mut which_aligned_var = None;
    let mut qualifying: Vec<VarId> = Vec::new();
    if let Some(wp) = which_pos {
        which_active_var = Some(p.add_var(
            "aux_which_active",
            cfg.weights.which_term_active,
            Some(VarKind::WhichTermActive),
        ));
        let span_cons: Vec<&str> = question
            .constituents
            .iter()
            .filter(|c| c.position > wp && c.position <= wp + consts.which_term_span)
            .map(|c| c.text.as_str())
            .collect();
        let scorer = TokenOverlapScorer;
        for (idx, e) in edges.iter().enumerate() {
            if !matches!(e.kind, EdgeKind::CellQOption | EdgeKind::HeaderQOption) {
                continue;
            }
            let Some(text) = table_side_text(tables, e) else { continue };
            if span_cons.iter().any(|c| scorer.score(text, c) > consts.min_alignment_which_term) {
                qualifying.push(pair(&vars, idx));
            }
        }
        if !qualifying.is_empty() {
            which_aligned_var = Some(p.add_var(
                "aux_which_aligned",
                cfg.weights.which_term_aligned,
                Some(VarKind::WhichTermAligned),
            ));
        }
    }

    // Proximity boosts and far-pair exclusions over cell-constituent edges.
    let mut cons_edges_by_cell: BTreeMap<(usize, usize, usize), Vec<(usize, usize)>> =
        BTreeMap::new();
    for (idx, e) in edges.iter().enumerate() {
        if e.kind == EdgeKind::CellQCons {
            if let (ElementRef::Cell { table, row, col }, ElementRef::Constituent { index }) =
                (e.a, e.b)
            {
                cons_edges_by_cell.entry((table, row, col)).or_default().push((index, idx));
            }
        }
    }
    let dist = |l: usize, l2: usize| {
        question.constituents[l].position.abs_diff(question.constituents[l2].position)
    };
    let mut boosts: Vec<(VarId, VarId, VarId)> = Vec::new();
    let mut far_pairs: Vec<(VarId, VarId)> = Vec::new();
    for (&(i, j, k), le) in &cons_edges_by_cell {
        for a in 0..le.len() {
            for b in (a + 1)..le.len() {
                let (l, e1) = le[a];
                let (l2, e2) = le[b];
                let d = dist(l, l2);
                if d > consts.q_cons_coalign_max_dist {
                    far_pairs.push((pair(&vars, e1), pair(&vars, e2)));
                } else {
                    let id = p.add_var(
                        format!("prox{i}_{j}_{k}_q{l}_q{l2}"),
                        1.0 / (d as f64 + 1.0),
                        Some(VarKind::ProximityBoost { table: i, row: j, col: k, l, l2 }),
                    );
                    boosts.push((id, pair(&vars, e1), pair(&vars, e2)));
                }
            }
        }
    }

    // Relation-match variables, opt-in.
    struct RelVar {
        id: VarId,
        table: usize,
        col_a: usize,
        col_b: usize,
        l: usize,
    }
    let mut rel_vars: Vec<RelVar> = Vec::new();
    if cfg.enable_relation_matches {
        // Columns lexically associated with each constituent.
        let mut assoc: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
        for e in edges {
            match (e.kind, e.a, e.b) {
                (EdgeKind::CellQCons, ElementRef::Cell { table, col, .. }, ElementRef::Constituent { index })
                | (EdgeKind::HeaderQCons, ElementRef::Header { table, col }, ElementRef::Constituent { index }) => {
                    assoc.insert((table, col, index));
                }
                _ => {}
            }
        }
        let surfaces: Vec<&str> = raw_tokens.iter().map(|t| t.surface.as_str()).collect();
        for (i, t) in tables.iter().enumerate() {
            for rel in &t.relations {
                for l in 0..question.constituents.len() {
                    for l2 in 0..question.constituents.len() {
                        let (pl, pl2) =
                            (question.constituents[l].position, question.constituents[l2].position);
                        if pl >= pl2
                            || !assoc.contains(&(i, rel.col_a, l))
                            || !assoc.contains(&(i, rel.col_b, l2))
                        {
                            continue;
                        }
                        let between: Vec<&str> = raw_tokens
                            .iter()
                            .filter(|tk| tk.position > pl && tk.position < pl2)
                            .map(|tk| tk.surface.as_str())
                            .collect();
                        let _ = &surfaces;
                        let triggered = rel.triggers.iter().any(|phrase| {
                            let ptoks: Vec<String> =
                                tokenize(phrase).into_iter().map(|t| t.surface).collect();
                            !ptoks.is_empty()
                                && between
                                    .windows(ptoks.len())
                                    .any(|w| w.iter().zip(&ptoks).all(|(a, b)| *a == b))
                        });
                        let weight = if triggered {
                            consts.relation_match_coeff
                        } else if between.is_empty() {
                            consts.empty_relation_match_coeff
                        } else {
                            consts.no_relation_match_coeff
                        };
                        let id = p.add_var(
                            format!("rel{i}_c{}_c{}_q{l}_q{l2}", rel.col_a, rel.col_b),
                            weight,
                            Some(VarKind::RelationMatch {
                                table: i,
                                col_a: rel.col_a,
                                col_b: rel.col_b,
                                l,
                                l2,
                            }),
                        );
                        rel_vars.push(RelVar { id, table: i, col_a: rel.col_a, col_b: rel.col_b, l });
                    }
                }
            }
        }
    }

    // Constraint families, in a fixed order. Sums run over materialized
    // variables; an element with no variable can never be active, which is
    // exactly how the independent audit treats it.

    // Any cell edge in a row activates the row; an active row needs an edge.
    for (&(i, j), idxs) in &sets.row {
        let r = vars.row[&(i, j)];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::RowActiveForCellEdge,
                vec![(r, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&(i, j), idxs) in &sets.row {
        let r = vars.row[&(i, j)];
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((r, -1.0));
        p.add_constraint(ConstraintTag::ActiveRowNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Header linking.
    for (&(i, k), idxs) in &sets.header {
        let h = vars.header[&(i, k)];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::HeaderActiveForEdge,
                vec![(h, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&(i, k), idxs) in &sets.header {
        let h = vars.header[&(i, k)];
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((h, -1.0));
        p.add_constraint(ConstraintTag::ActiveHeaderNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Column linking over cell and header edges of the column.
    for (&(i, k), idxs) in &sets.column {
        let c = vars.column[&(i, k)];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::ColumnActiveForEdge,
                vec![(c, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&(i, k), idxs) in &sets.column {
        let c = vars.column[&(i, k)];
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((c, -1.0));
        p.add_constraint(ConstraintTag::ActiveColumnNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Table linking. A table variable created only by title edges has an
    // empty set here and is pinned inactive, matching the raw set formulas.
    for (&i, idxs) in &sets.table {
        let t = vars.table[&i];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::TableActiveForEdge,
                vec![(t, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&i, t) in &vars.table {
        let idxs = sets.table.get(&i).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((*t, -1.0));
        p.add_constraint(ConstraintTag::ActiveTableNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Option linking.
    for (&m, idxs) in &sets.choice {
        let a = vars.choice[&m];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::ChoiceActiveForEdge,
                vec![(a, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&m, a) in &vars.choice {
        let idxs = sets.choice.get(&m).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((*a, -1.0));
        p.add_constraint(ConstraintTag::ActiveChoiceNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Constituent linking.
    for (&l, idxs) in &sets.constituent {
        let q = vars.constituent[&l];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::ConstituentActiveForEdge,
                vec![(q, 1.0), (pair(&vars, e), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
    }
    for (&l, q) in &vars.constituent {
        let idxs = sets.constituent.get(&l).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((*q, -1.0));
        p.add_constraint(ConstraintTag::ActiveConstituentNeedsEdge, terms, Sense::Ge, 0.0);
    }
    // Exactly one option.
    let choice_sum = sum(vars.choice.values().copied());
    p.add_constraint(ConstraintTag::ChooseOnlySingleOption, choice_sum.clone(), Sense::Le, 1.0);
    p.add_constraint(ConstraintTag::ChooseOnlySingleOption, choice_sum, Sense::Ge, 1.0);
    // Table, row, and constituent cardinality.
    if !vars.table.is_empty() {
        p.add_constraint(
            ConstraintTag::MaxTablesToChain,
            sum(vars.table.values().copied()),
            Sense::Le,
            consts.max_tables_to_chain as f64,
        );
    }
    for &i in vars.table.keys() {
        let rows: Vec<VarId> =
            vars.row.iter().filter(|(&(ti, _), _)| ti == i).map(|(_, &v)| v).collect();
        if !rows.is_empty() {
            p.add_constraint(
                ConstraintTag::MaxRowsPerTable,
                sum(rows),
                Sense::Le,
                consts.max_rows_per_table as f64,
            );
        }
    }
    p.add_constraint(
        ConstraintTag::MinActiveQCons,
        sum(vars.constituent.values().copied()),
        Sense::Ge,
        consts.min_active_q_cons as f64,
    );
    // Aggregate alignment floors for active cells and headers.
    for (&(i, j, k), idxs) in &sets.cell {
        let t = vars.cell[&(i, j, k)];
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((t, -cfg.alignment.min_active_cell_aggr_alignment));
        p.add_constraint(ConstraintTag::MinActiveCellAggrAlignment, terms, Sense::Ge, 0.0);
    }
    for (&(i, k), idxs) in &sets.header {
        let h = vars.header[&(i, k)];
        let mut terms = sum(idxs.iter().map(|&e| pair(&vars, e)));
        terms.push((h, -cfg.alignment.min_active_title_aggr_alignment));
        p.add_constraint(ConstraintTag::MinActiveTitleAggrAlignment, terms, Sense::Ge, 0.0);
    }
    // An active column carries an active cell; columns tie to their table.
    for (&(i, k), c) in &vars.column {
        let mut terms: Vec<(VarId, f64)> = vars
            .cell
            .iter()
            .filter(|(&(ti, _, tk), _)| ti == i && tk == k)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        terms.push((*c, -1.0));
        p.add_constraint(ConstraintTag::ActiveColumnNeedsActiveCell, terms, Sense::Ge, 0.0);
    }
    // Per-option column-choice cardinality, both declared caps.
    let im_keys: BTreeSet<(usize, usize)> =
        vars.column_choice.keys().map(|&(i, _, m)| (i, m)).collect();
    for &(i, m) in &im_keys {
        let cols: Vec<VarId> = vars
            .column_choice
            .iter()
            .filter(|(&(ti, _, tm), _)| ti == i && tm == m)
            .map(|(_, &v)| v)
            .collect();
        p.add_constraint(
            ConstraintTag::MaxActiveColumnChoiceAlignments,
            sum(cols),
            Sense::Le,
            consts.max_active_column_choice_alignments as f64,
        );
    }
    for (&(i, _k), c) in &vars.column {
        p.add_constraint(
            ConstraintTag::ActiveColumnImpliesTable,
            vec![(*c, 1.0), (vars.table[&i], -1.0)],
            Sense::Le,
            0.0,
        );
    }
    for (&i, t) in &vars.table {
        let mut terms: Vec<(VarId, f64)> = vars
            .column
            .iter()
            .filter(|(&(ti, _), _)| ti == i)
            .map(|(_, &v)| (v, -1.0))
            .collect();
        terms.insert(0, (*t, 1.0));
        p.add_constraint(ConstraintTag::ActiveTableNeedsActiveColumn, terms, Sense::Le, 0.0);
    }
    // A table aligned to a choice needs non-choice alignment, and each choice
    // aligns to a bounded number of tables.
    for (&(i, m), tc) in &vars.table_choice {
        let _ = m;
        let idxs = sets.table_nonchoice.get(&i).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = vec![(*tc, 1.0)];
        terms.extend(idxs.iter().map(|&e| (pair(&vars, e), -1.0)));
        p.add_constraint(ConstraintTag::TableChoiceNeedsNonChoiceAlignment, terms, Sense::Le, 0.0);
    }
    let tc_options: BTreeSet<usize> = vars.table_choice.keys().map(|&(_, m)| m).collect();
    for &m in &tc_options {
        let tcs: Vec<VarId> = vars
            .table_choice
            .iter()
            .filter(|(&(_, tm), _)| tm == m)
            .map(|(_, &v)| v)
            .collect();
        p.add_constraint(
            ConstraintTag::MaxActiveTableChoiceAlignments,
            sum(tcs),
            Sense::Le,
            consts.max_active_table_choice_alignments as f64,
        );
    }
    // Cell/header-option edges tie to their column-choice variable.
    for (&(i, k, m), idxs) in &sets.column_choice {
        let cc = vars.column_choice[&(i, k, m)];
        for &e in idxs {
            p.add_constraint(
                ConstraintTag::CellChoiceActivatesColumnChoice,
                vec![(pair(&vars, e), 1.0), (cc, -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    for (&(i, k, m), idxs) in &sets.column_choice {
        let cc = vars.column_choice[&(i, k, m)];
        let mut terms = vec![(cc, 1.0)];
        terms.extend(idxs.iter().map(|&e| (pair(&vars, e), -1.0)));
        p.add_constraint(ConstraintTag::ColumnChoiceNeedsCellChoice, terms, Sense::Le, 0.0);
    }
    for &(i, m) in &im_keys {
        let cols: Vec<VarId> = vars
            .column_choice
            .iter()
            .filter(|(&(ti, _, tm), _)| ti == i && tm == m)
            .map(|(_, &v)| v)
            .collect();
        p.add_constraint(
            ConstraintTag::MaxActiveChoiceColumnVars,
            sum(cols),
            Sense::Le,
            consts.max_active_choice_column_vars as f64,
        );
    }
    for (&(i, _k, m), cc) in &vars.column_choice {
        p.add_constraint(
            ConstraintTag::ColumnChoiceImpliesTableChoice,
            vec![(*cc, 1.0), (vars.table_choice[&(i, m)], -1.0)],
            Sense::Le,
            0.0,
        );
    }
    for (&(i, m), tc) in &vars.table_choice {
        let mut terms = vec![(*tc, 1.0)];
        terms.extend(
            vars.column_choice
                .iter()
                .filter(|(&(ti, _, tm), _)| ti == i && tm == m)
                .map(|(_, &v)| (v, -1.0)),
        );
        p.add_constraint(ConstraintTag::TableChoiceNeedsColumnChoice, terms, Sense::Le, 0.0);
    }
    // Which-term boosts.
    if let Some(wa) = which_active_var {
        p.add_constraint(ConstraintTag::WhichTermActive, vec![(wa, 1.0)], Sense::Ge, 1.0);
    }
    if let Some(wl) = which_aligned_var {
        let mut terms = vec![(wl, 1.0)];
        terms.extend(qualifying.iter().map(|&v| (v, -1.0)));
        p.add_constraint(ConstraintTag::WhichTermAligned, terms, Sense::Le, 0.0);
    }
    // Per-constituent alignment cap.
    for (&l, idxs) in &sets.constituent {
        let _ = l;
        p.add_constraint(
            ConstraintTag::MaxAlignmentsPerQCons,
            sum(idxs.iter().map(|&e| pair(&vars, e))),
            Sense::Le,
            consts.max_alignments_per_q_cons as f64,
        );
    }
    // Far constituent pairs exclude each other on one cell; near pairs earn
    // a proximity reward.
    for (e1, e2) in &far_pairs {
        p.add_constraint(
            ConstraintTag::QConsCoalignMaxDist,
            vec![(*e1, 1.0), (*e2, 1.0)],
            Sense::Le,
            1.0,
        );
    }
    for (aux, e1, e2) in &boosts {
        p.add_constraint(
            ConstraintTag::CellProximityBoost,
            vec![(*aux, 1.0), (*e1, -1.0)],
            Sense::Le,
            0.0,
        );
        p.add_constraint(
            ConstraintTag::CellProximityBoost,
            vec![(*aux, 1.0), (*e2, -1.0)],
            Sense::Le,
            0.0,
        );
    }
    // Relation-match rows.
    for rv in &rel_vars {
        for col in [rv.col_a, rv.col_b] {
            let mut terms = vec![(rv.id, 1.0)];
            if let Some(c) = vars.column.get(&(rv.table, col)) {
                terms.push((*c, -1.0));
            }
            p.add_constraint(ConstraintTag::RelationMatchImpliesColumns, terms, Sense::Le, 0.0);
        }
    }
    if !rel_vars.is_empty() {
        let mut touching: BTreeMap<(usize, usize), Vec<VarId>> = BTreeMap::new();
        for rv in &rel_vars {
            touching.entry((rv.table, rv.col_a)).or_default().push(rv.id);
            touching.entry((rv.table, rv.col_b)).or_default().push(rv.id);
        }
        for (&(i, k), rels) in &touching {
            if let Some(c) = vars.column.get(&(i, k)) {
                let mut terms = vec![(*c, 1.0)];
                terms.extend(rels.iter().map(|&r| (r, -1.0)));
                p.add_constraint(
                    ConstraintTag::ActiveColumnNeedsRelationMatch,
                    terms,
                    Sense::Le,
                    0.0,
                );
            }
        }
        for rv in &rel_vars {
            let pl = question.constituents[rv.l].position;
            for (idx, e) in edges.iter().enumerate() {
                if e.kind != EdgeKind::CellQCons {
                    continue;
                }
                if let (ElementRef::Cell { table, col, .. }, ElementRef::Constituent { index }) =
                    (e.a, e.b)
                {
                    if table == rv.table
                        && col == rv.col_a
                        && question.constituents[index].position <= pl
                    {
                        p.add_constraint(
                            ConstraintTag::RelationMatchPosition,
                            vec![(rv.id, 1.0), (pair(&vars, idx), 1.0)],
                            Sense::Le,
                            1.0,
                        );
                    }
                }
            }
        }
    }
    // Row structure: minimum active cells, both-side alignment, and the
    // parallel-evidence shape of active row pairs.
    for (&(i, j), r) in &vars.row {
        let mut terms: Vec<(VarId, f64)> = vars
            .cell
            .iter()
            .filter(|(&(ti, tj, _), _)| ti == i && tj == j)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        terms.push((*r, -(consts.min_active_cells_per_row as f64)));
        p.add_constraint(ConstraintTag::MinActiveCellsPerRow, terms, Sense::Ge, 0.0);
    }
    for (&(i, j), r) in &vars.row {
        let idxs = sets.row_nonchoice.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = vec![(*r, 1.0)];
        terms.extend(idxs.iter().map(|&e| (pair(&vars, e), -1.0)));
        p.add_constraint(ConstraintTag::ActiveRowNeedsNonChoiceAlignment, terms, Sense::Le, 0.0);
    }
    for (&(i, j), r) in &vars.row {
        let idxs = sets.row_nonquestion.get(&(i, j)).map(Vec::as_slice).unwrap_or(&[]);
        let mut terms = vec![(*r, 1.0)];
        terms.extend(idxs.iter().map(|&e| (pair(&vars, e), -1.0)));
        p.add_constraint(ConstraintTag::ActiveRowNeedsNonQuestionAlignment, terms, Sense::Le, 0.0);
    }
    // Active row pairs must activate the same columns...
    for &i in vars.table.keys() {
        let rows_i: Vec<usize> =
            vars.row.keys().filter(|&&(ti, _)| ti == i).map(|&(_, j)| j).collect();
        for &j in &rows_i {
            for &j2 in &rows_i {
                if j == j2 {
                    continue;
                }
                for k in 0..tables[i].n_cols() {
                    let Some(&tjk) = vars.cell.get(&(i, j, k)) else { continue };
                    let mut terms = vec![
                        (vars.row[&(i, j)], 1.0),
                        (vars.row[&(i, j2)], 1.0),
                        (tjk, 1.0),
                    ];
                    if let Some(&tj2k) = vars.cell.get(&(i, j2, k)) {
                        terms.push((tj2k, -1.0));
                    }
                    p.add_constraint(ConstraintTag::ActiveRowPairSignature, terms, Sense::Le, 2.0);
                }
            }
        }
    }
    // ...and differ in at least one active column's content.
    for &i in vars.table.keys() {
        let rows_i: Vec<usize> =
            vars.row.keys().filter(|&&(ti, _)| ti == i).map(|&(_, j)| j).collect();
        for a in 0..rows_i.len() {
            for b in (a + 1)..rows_i.len() {
                let (j, j2) = (rows_i[a], rows_i[b]);
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                for k in 0..tables[i].n_cols() {
                    if content_token_set(tables[i].cell(j, k))
                        != content_token_set(tables[i].cell(j2, k))
                    {
                        if let Some(&c) = vars.column.get(&(i, k)) {
                            terms.push((c, 1.0));
                        }
                    }
                }
                terms.push((vars.row[&(i, j)], -1.0));
                terms.push((vars.row[&(i, j2)], -1.0));
                p.add_constraint(ConstraintTag::ActiveRowPairMustDiffer, terms, Sense::Ge, -1.0);
            }
        }
    }
    // Two active tables must be chained by an inter-table cell alignment.
    let table_ids: Vec<usize> = vars.table.keys().copied().collect();
    for a in 0..table_ids.len() {
        for b in (a + 1)..table_ids.len() {
            let (i, i2) = (table_ids[a], table_ids[b]);
            let mut terms = vec![(vars.table[&i], 1.0), (vars.table[&i2], 1.0)];
            for (idx, e) in edges.iter().enumerate() {
                if e.kind == EdgeKind::CellCellInter {
                    if let (ElementRef::Cell { table: ta, .. }, ElementRef::Cell { table: tb, .. }) =
                        (e.a, e.b)
                    {
                        if (ta, tb) == (i, i2) {
                            terms.push((pair(&vars, idx), -1.0));
                        }
                    }
                }
            }
            p.add_constraint(ConstraintTag::InterTableChainNeedsAlignment, terms, Sense::Le, 1.0);
        }
    }
}

/// Variables plus constraints in one call.
pub fn build_model(
    tables: &[Table],
    question: &QuestionInstance,
    edges: &[ScoredEdge],
    cfg: &ModelConfig,
) -> IlpProblem {
    let mut p = build_variables(question, edges, &cfg.weights);
    let sets = build_incidence_sets(edges);
    build_constraints(&mut p, tables, question, edges, &sets, cfg);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{candidate_edges, AlignmentConfig};
    use crate::kb::Constituent;

    fn table(title: &str, headers: &[&str], rows: &[&[&str]]) -> Table {
        Table {
            id: title.to_lowercase().replace(' ', "-"),
            title: title.into(),
            headers: headers.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            relations: Vec::new(),
        }
    }

    fn question(text: &str, constituents: &[&str], options: &[&str]) -> QuestionInstance {
        QuestionInstance {
            id: "q".into(),
            text: text.into(),
            constituents: constituents
                .iter()
                .enumerate()
                .map(|(position, text)| Constituent { text: text.to_string(), position })
                .collect(),
            options: options.iter().map(|s| s.to_string()).collect(),
            gold: None,
        }
    }

    #[test]
    fn no_edges_no_variables() {
        let q = question("x", &["x"], &["y", "z"]);
        let p = build_variables(&q, &[], &VariableWeights::default());
        assert_eq!(p.n_vars(), 0);
        assert!(build_incidence_sets(&[]).cell.is_empty());
    }

    #[test]
    fn single_cell_option_edge_materializes_ancestors() {
        let q = question("x", &["x"], &["dog", "cat"]);
        let edges = vec![ScoredEdge {
            kind: EdgeKind::CellQOption,
            a: ElementRef::Cell { table: 0, row: 0, col: 0 },
            b: ElementRef::Option { index: 0 },
            weight: 0.8,
        }];
        let p = build_variables(&q, &edges, &VariableWeights::default());
        let names: Vec<&str> = p.vars.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["xT0", "xr0_0", "xl0_0", "xt0_0_0", "xa0", "y_t0_0_0__a0"]);
        let w: BTreeMap<&str, f64> = p.vars.iter().map(|v| (v.name.as_str(), v.weight)).collect();
        assert_eq!(w["y_t0_0_0__a0"], 0.8);
        assert_eq!(w["xt0_0_0"], 0.0);
        assert_eq!(w["xT0"], 1.0);
        assert_eq!(w["xl0_0"], 1.0);
        assert_eq!(w["xa0"], 0.0);
    }

    #[test]
    fn intra_table_pair_weight_is_adjusted_in_objective_only() {
        let q = question("x", &["x"], &["a", "b"]);
        let edges = vec![ScoredEdge {
            kind: EdgeKind::CellCellIntra,
            a: ElementRef::Cell { table: 0, row: 0, col: 0 },
            b: ElementRef::Cell { table: 0, row: 1, col: 0 },
            weight: 0.7,
        }];
        let p = build_variables(&q, &edges, &VariableWeights::default());
        let v = &p.vars[p.n_vars() - 1];
        assert!((v.weight - 0.6).abs() < 1e-12);
        match v.kind {
            Some(VarKind::Pair { raw_weight, .. }) => assert_eq!(raw_weight, 0.7),
            ref other => panic!("unexpected kind {other:?}"),
        }
    }

    #[test]
    fn incidence_set_membership_follows_definitions() {
        // A lone cell-constituent edge joins the row set but not the row's
        // non-question set.
        let e1 = ScoredEdge {
            kind: EdgeKind::CellQCons,
            a: ElementRef::Cell { table: 0, row: 1, col: 0 },
            b: ElementRef::Constituent { index: 2 },
            weight: 0.5,
        };
        let s = build_incidence_sets(&[e1]);
        assert_eq!(s.row[&(0, 1)], vec![0]);
        assert_eq!(s.row_nonchoice[&(0, 1)], vec![0]);
        assert!(!s.row_nonquestion.contains_key(&(0, 1)));
        assert_eq!(s.constituent[&2], vec![0]);

        // A header-option edge appears in the header, choice, and
        // column-choice sets.
        let e2 = ScoredEdge {
            kind: EdgeKind::HeaderQOption,
            a: ElementRef::Header { table: 1, col: 3 },
            b: ElementRef::Option { index: 1 },
            weight: 0.9,
        };
        let s = build_incidence_sets(&[e2]);
        assert_eq!(s.header[&(1, 3)], vec![0]);
        assert_eq!(s.choice[&1], vec![0]);
        assert_eq!(s.column_choice[&(1, 3, 1)], vec![0]);
        assert_eq!(s.table[&1], vec![0]);
        assert!(!s.table_nonchoice.contains_key(&1));
    }

    /// Fully-connected 1-table instance: every text is the same token, so
    /// every candidate pair scores 1.0 and every edge kind materializes.
    fn tiny_full() -> (Vec<Table>, QuestionInstance, Vec<ScoredEdge>) {
        let t = table("z", &["z", "z"], &[&["z", "z"], &["z", "z"]]);
        let q = question("z z", &["z", "z"], &["z", "z"]);
        let edges = candidate_edges(std::slice::from_ref(&t), &q, &AlignmentConfig::default());
        (vec![t], q, edges)
    }

    #[test]
    fn tiny_instance_edge_inventory() {
        let (_, _, edges) = tiny_full();
        let count = |k: EdgeKind| edges.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EdgeKind::CellCellInter), 0);
        assert_eq!(count(EdgeKind::CellCellIntra), 4);
        assert_eq!(count(EdgeKind::CellQCons), 8);
        assert_eq!(count(EdgeKind::HeaderQCons), 4);
        assert_eq!(count(EdgeKind::CellQOption), 8);
        assert_eq!(count(EdgeKind::HeaderQOption), 4);
        assert_eq!(count(EdgeKind::TitleQCons), 2);
        assert_eq!(count(EdgeKind::TitleQOption), 2);
        assert_eq!(edges.len(), 32);
    }

    #[test]
    fn tiny_instance_constraint_census_matches_hand_enumeration() {
        let (tables, q, edges) = tiny_full();
        let p = build_model(&tables, &q, &edges, &ModelConfig::default());

        // 15 unary + 32 pairwise + 4 column-choice + 2 table-choice + 4
        // proximity boosts; no which-term (no "which" in the text).
        assert_eq!(p.n_vars(), 57);

        let mut by_tag: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &p.constraints {
            *by_tag.entry(c.tag.name()).or_insert(0) += 1;
        }
        // Hand enumeration. Per row: 12 incident edges (4 intra + 4 cons +
        // 4 option); per header: 4; per column: 15 (3 intra + 4 cons + 4
        // option + 4 header); table set: 28 (all but the 4 title edges);
        // per option and per constituent: 6.
        let expected: &[(&str, usize)] = &[
            ("RowActiveForCellEdge", 24),
            ("ActiveRowNeedsEdge", 2),
            ("HeaderActiveForEdge", 8),
            ("ActiveHeaderNeedsEdge", 2),
            ("ColumnActiveForEdge", 30),
            ("ActiveColumnNeedsEdge", 2),
            ("TableActiveForEdge", 28),
            ("ActiveTableNeedsEdge", 1),
            ("ChoiceActiveForEdge", 12),
            ("ActiveChoiceNeedsEdge", 2),
            ("ConstituentActiveForEdge", 12),
            ("ActiveConstituentNeedsEdge", 2),
            ("ChooseOnlySingleOption", 2),
            ("MaxTablesToChain", 1),
            ("MaxRowsPerTable", 1),
            ("MinActiveQCons", 1),
            ("MinActiveCellAggrAlignment", 4),
            ("MinActiveTitleAggrAlignment", 2),
            ("ActiveColumnNeedsActiveCell", 2),
            ("MaxActiveColumnChoiceAlignments", 2),
            ("ActiveColumnImpliesTable", 2),
            ("ActiveTableNeedsActiveColumn", 1),
            ("TableChoiceNeedsNonChoiceAlignment", 2),
            ("MaxActiveTableChoiceAlignments", 2),
            ("CellChoiceActivatesColumnChoice", 12),
            ("ColumnChoiceNeedsCellChoice", 4),
            ("MaxActiveChoiceColumnVars", 2),
            ("ColumnChoiceImpliesTableChoice", 4),
            ("TableChoiceNeedsColumnChoice", 2),
            ("MaxAlignmentsPerQCons", 2),
            ("CellProximityBoost", 8),
            ("MinActiveCellsPerRow", 2),
            ("ActiveRowNeedsNonChoiceAlignment", 2),
            ("ActiveRowNeedsNonQuestionAlignment", 2),
            ("ActiveRowPairSignature", 4),
            ("ActiveRowPairMustDiffer", 1),
        ];
        for (tag, n) in expected {
            assert_eq!(by_tag.get(tag), Some(n), "count mismatch for {tag}");
        }
        let total: usize = expected.iter().map(|(_, n)| n).sum();
        assert_eq!(p.n_constraints(), total);
        assert_eq!(total, 192);
        p.validate().unwrap();
    }

    #[test]
    fn six_tables_cap_constraint_present() {
        let tables: Vec<Table> = (0..6)
            .map(|i| {
                let mut t = table("w", &["w", "x"], &[&["w", "x"]]);
                t.id = format!("t{i}");
                t
            })
            .collect();
        let q = question("w x", &["w", "x"], &["x", "zz"]);
        let edges = candidate_edges(&tables, &q, &AlignmentConfig::default());
        let p = build_model(&tables, &q, &edges, &ModelConfig::default());
        let cap = p
            .constraints
            .iter()
            .find(|c| c.tag == ConstraintTag::MaxTablesToChain)
            .expect("table cap emitted");
        assert_eq!(cap.terms.len(), 6);
        assert_eq!(cap.sense, Sense::Le);
        assert_eq!(cap.rhs, 4.0);
    }

    #[test]
    fn which_term_vars_created_on_trigger() {
        let t = table("animal facts", &["animal", "response"], &[
            &["dog", "pants"],
            &["snake", "hibernates"],
        ]);
        let q = QuestionInstance {
            id: "q".into(),
            text: "Which animal pants".into(),
            constituents: crate::kb::chunk_question("Which animal pants").unwrap(),
            options: vec!["dog".into(), "snake".into()],
            gold: None,
        };
        let edges = candidate_edges(std::slice::from_ref(&t), &q, &AlignmentConfig::default());
        let p = build_model(&[t], &q, &edges, &ModelConfig::default());
        assert!(p.var_of_kind(&VarKind::WhichTermActive).is_some());
        assert!(p
            .constraints
            .iter()
            .any(|c| c.tag == ConstraintTag::WhichTermActive && c.sense == Sense::Ge));
        // "dog" and "snake" cells align to option texts with score 1.0 > 0.6
        // against span constituents? The span after "which" covers "animal"
        // (pos 1) and "pants" (pos 2); cell "dog" scores 0 against both, so
        // only edges whose cell matches a span constituent qualify.
        let aligned = p.var_of_kind(&VarKind::WhichTermAligned);
        assert!(aligned.is_none());
    }
}
