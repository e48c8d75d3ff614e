//! End-to-end answering: align, build the program, solve, read the support
//! graph back out, and double-check it against the structural rules without
//! going through the solver.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{candidate_edges, EdgeKind, ElementRef, ScoredEdge};
use crate::kb::{QuestionInstance, Table};
use crate::model::{
    build_incidence_sets, build_model, ConstraintTag, IlpProblem, ModelConfig, Sense, VarKind,
};
use crate::solver::{solve_with, SolveStats, SolveStatus, Solution, SolverConfig};
use crate::text::content_token_set;

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("support extraction needs an optimal solution, got {status:?}")]
    NonOptimal { status: SolveStatus },
    #[error("assignment has {found} values for {expected} variables")]
    AssignmentMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone)]
pub struct ReasonOptions {
    pub model: ModelConfig,
    /// Objectives at or below this abstain.
    pub abstain_threshold: f64,
    /// Relative tolerance for counting a runner-up as tied.
    pub tie_tolerance: f64,
    pub solver: SolverConfig,
}

impl Default for ReasonOptions {
    fn default() -> Self {
        ReasonOptions {
            model: ModelConfig::default(),
            abstain_threshold: 0.0,
            tie_tolerance: 1e-6,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstainReason {
    /// No candidate edge touches any answer option.
    NoChoiceAlignment,
    Infeasible,
    BelowThreshold,
    /// Solver hit a resource limit before proving anything.
    ResourceLimit,
}

/// An edge of the winning support graph, with its raw alignment weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveEdge {
    pub kind: EdgeKind,
    pub a: ElementRef,
    pub b: ElementRef,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportGraph {
    pub active_tables: Vec<usize>,
    pub active_rows: Vec<(usize, usize)>,
    pub active_columns: Vec<(usize, usize)>,
    pub active_headers: Vec<(usize, usize)>,
    pub active_cells: Vec<(usize, usize, usize)>,
    pub active_constituents: Vec<usize>,
    pub active_choices: Vec<usize>,
    pub active_edges: Vec<ActiveEdge>,
    pub active_column_choices: Vec<(usize, usize, usize)>,
    pub active_table_choices: Vec<(usize, usize)>,
    pub objective: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnswerResult {
    pub question_id: String,
    /// Selected option index; `None` means abstention.
    pub answer: Option<usize>,
    pub answer_text: Option<String>,
    pub objective: Option<f64>,
    /// All options whose solutions tie the winner, winner included; sorted.
    pub ties: Vec<usize>,
    /// Per-option objective when that option is forced; `None` if forcing it
    /// is infeasible.
    pub confidences: Vec<Option<f64>>,
    pub abstain_reason: Option<AbstainReason>,
    pub gold: Option<usize>,
    pub support: Option<SupportGraph>,
    pub stats: SolveStats,
}

/// Reads the active elements out of a 0/1 assignment in the problem's
/// canonical variable order.
pub fn support_from_assignment(
    p: &IlpProblem,
    assignment: &[bool],
) -> Result<SupportGraph, ReasonError> {
    if assignment.len() != p.n_vars() {
        return Err(ReasonError::AssignmentMismatch {
            expected: p.n_vars(),
            found: assignment.len(),
        });
    }
    let mut g = SupportGraph { objective: p.objective_value(assignment), ..Default::default() };
    for (v, var) in p.vars.iter().enumerate() {
        if !assignment[v] {
            continue;
        }
        match var.kind {
            Some(VarKind::Table { table }) => g.active_tables.push(table),
            Some(VarKind::Row { table, row }) => g.active_rows.push((table, row)),
            Some(VarKind::Column { table, col }) => g.active_columns.push((table, col)),
            Some(VarKind::Header { table, col }) => g.active_headers.push((table, col)),
            Some(VarKind::Cell { table, row, col }) => g.active_cells.push((table, row, col)),
            Some(VarKind::Constituent { index }) => g.active_constituents.push(index),
            Some(VarKind::Choice { index }) => g.active_choices.push(index),
            Some(VarKind::Pair { kind, a, b, raw_weight }) => {
                g.active_edges.push(ActiveEdge { kind, a, b, weight: raw_weight });
            }
            Some(VarKind::ColumnChoice { table, col, choice }) => {
                g.active_column_choices.push((table, col, choice));
            }
            Some(VarKind::TableChoice { table, choice }) => {
                g.active_table_choices.push((table, choice));
            }
            _ => {}
        }
    }
    Ok(g)
}

pub fn extract_support_graph(
    p: &IlpProblem,
    solution: &Solution,
) -> Result<SupportGraph, ReasonError> {
    if solution.status != SolveStatus::Optimal {
        return Err(ReasonError::NonOptimal { status: solution.status });
    }
    support_from_assignment(p, &solution.assignment)
}

fn with_choice_row(p: &IlpProblem, var: crate::model::VarId, on: bool) -> IlpProblem {
    let mut q = p.clone();
    let tag = if on { ConstraintTag::ChoiceForced } else { ConstraintTag::ChoiceDisabled };
    q.add_constraint(tag, vec![(var, 1.0)], Sense::Eq, if on { 1.0 } else { 0.0 });
    q
}

fn chosen_option(p: &IlpProblem, assignment: &[bool]) -> Option<usize> {
    p.vars.iter().enumerate().find_map(|(v, var)| match var.kind {
        Some(VarKind::Choice { index }) if assignment[v] => Some(index),
        _ => None,
    })
}

fn abstain(
    question: &QuestionInstance,
    reason: AbstainReason,
    stats: SolveStats,
) -> AnswerResult {
    AnswerResult {
        question_id: question.id.clone(),
        answer: None,
        answer_text: None,
        objective: None,
        ties: Vec::new(),
        confidences: vec![None; question.options.len()],
        abstain_reason: Some(reason),
        gold: question.gold,
        support: None,
        stats,
    }
}

/// Runs the full pipeline for one question over a fixed table set.
pub fn answer(tables: &[Table], question: &QuestionInstance, opts: &ReasonOptions) -> AnswerResult {
    let edges = candidate_edges(tables, question, &opts.model.alignment);
    answer_with_edges(tables, question, &edges, opts)
}

/// Same as [`answer`] but over a caller-supplied candidate edge list, which
/// the essential-term cascade uses to avoid re-aligning per stage.
pub fn answer_with_edges(
    tables: &[Table],
    question: &QuestionInstance,
    edges: &[ScoredEdge],
    opts: &ReasonOptions,
) -> AnswerResult {
    let touches_option = edges
        .iter()
        .any(|e| matches!(e.b, ElementRef::Option { .. }) || matches!(e.a, ElementRef::Option { .. }));
    if !touches_option {
        return abstain(question, AbstainReason::NoChoiceAlignment, SolveStats::default());
    }
    let p = build_model(tables, question, edges, &opts.model);
    answer_on_problem(&p, question, opts)
}

/// Solves an already-built program (possibly carrying forcing rows) and
/// assembles the result.
pub fn answer_on_problem(
    p: &IlpProblem,
    question: &QuestionInstance,
    opts: &ReasonOptions,
) -> AnswerResult {
    let sol = solve_with(p, &opts.solver);
    let mut stats = sol.stats;
    match sol.status {
        SolveStatus::Infeasible => return abstain(question, AbstainReason::Infeasible, stats),
        SolveStatus::TimedOut => return abstain(question, AbstainReason::ResourceLimit, stats),
        SolveStatus::Optimal => {}
    }
    if sol.objective <= opts.abstain_threshold {
        return abstain(question, AbstainReason::BelowThreshold, stats);
    }
    let best = chosen_option(p, &sol.assignment)
        .expect("an optimal solution satisfies the single-option row");

    // Tie sweep: disable the winner, re-solve, and repeat while the optimum
    // stays within relative tolerance.
    let tie_eps = |o: f64| opts.tie_tolerance * o.abs().max(1e-12);
    let mut ties = vec![best];
    let mut disabled = p.clone();
    loop {
        let last = *ties.last().unwrap();
        let Some(var) = disabled.var_of_kind(&VarKind::Choice { index: last }) else { break };
        disabled = with_choice_row(&disabled, var, false);
        let next = solve_with(&disabled, &opts.solver);
        stats.nodes += next.stats.nodes;
        stats.lp_iterations += next.stats.lp_iterations;
        if next.status != SolveStatus::Optimal
            || (sol.objective - next.objective).abs() > tie_eps(sol.objective)
        {
            break;
        }
        match chosen_option(&disabled, &next.assignment) {
            Some(m) => ties.push(m),
            None => break,
        }
    }
    ties.sort_unstable();

    // Per-option confidence: the optimum when that option is forced on.
    let confidences: Vec<Option<f64>> = (0..question.options.len())
        .map(|m| {
            let var = p.var_of_kind(&VarKind::Choice { index: m })?;
            let forced = solve_with(&with_choice_row(p, var, true), &opts.solver);
            stats.nodes += forced.stats.nodes;
            stats.lp_iterations += forced.stats.lp_iterations;
            (forced.status == SolveStatus::Optimal).then_some(forced.objective)
        })
        .collect();

    let support = support_from_assignment(p, &sol.assignment).ok();
    AnswerResult {
        question_id: question.id.clone(),
        answer: Some(best),
        answer_text: question.options.get(best).cloned(),
        objective: Some(sol.objective),
        ties,
        confidences,
        abstain_reason: None,
        gold: question.gold,
        support,
        stats,
    }
}

/// Exam score for one result: 1 for a unique correct answer, 1/k when the
/// gold option is among a k-way tie, 0 otherwise (abstentions score 0).
/// `None` when the question has no gold label.
pub fn eval_score(r: &AnswerResult) -> Option<f64> {
    let gold = r.gold?;
    Some(match (&r.answer, r.ties.contains(&gold)) {
        (Some(_), true) => 1.0 / r.ties.len() as f64,
        _ => 0.0,
    })
}

/// Structural audit of a support graph against the rule families, coded as
/// direct set logic rather than through the solver. Elements missing from
/// the graph count as inactive. Returns human-readable violations; empty
/// means the graph is sound.
pub fn audit(
    tables: &[Table],
    question: &QuestionInstance,
    edges: &[ScoredEdge],
    g: &SupportGraph,
    cfg: &ModelConfig,
) -> Vec<String> {
    let mut bad: Vec<String> = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            bad.push(msg);
        }
    };
    let sets = build_incidence_sets(edges);
    let active_pairs: BTreeSet<(ElementRef, ElementRef)> =
        g.active_edges.iter().map(|e| (e.a, e.b)).collect();
    let active_idx: Vec<bool> =
        edges.iter().map(|e| active_pairs.contains(&(e.a, e.b))).collect();
    let on = |idxs: &[usize]| idxs.iter().filter(|&&e| active_idx[e]).count();

    let tables_on: BTreeSet<usize> = g.active_tables.iter().copied().collect();
    let rows_on: BTreeSet<(usize, usize)> = g.active_rows.iter().copied().collect();
    let cols_on: BTreeSet<(usize, usize)> = g.active_columns.iter().copied().collect();
    let headers_on: BTreeSet<(usize, usize)> = g.active_headers.iter().copied().collect();
    let cells_on: BTreeSet<(usize, usize, usize)> = g.active_cells.iter().copied().collect();
    let cons_on: BTreeSet<usize> = g.active_constituents.iter().copied().collect();
    let choices_on: BTreeSet<usize> = g.active_choices.iter().copied().collect();
    let cc_on: BTreeSet<(usize, usize, usize)> =
        g.active_column_choices.iter().copied().collect();
    let tc_on: BTreeSet<(usize, usize)> = g.active_table_choices.iter().copied().collect();
    let kc = &cfg.constants;

    // Unary-pairwise linking. An active edge activates its containers; an
    // active element needs at least one active edge in its set.
    for (&(i, j), idxs) in &sets.row {
        check(
            !(on(idxs) > 0 && !rows_on.contains(&(i, j))),
            format!("row {i}/{j} carries an active edge but is inactive"),
        );
    }
    for &(i, j) in &rows_on {
        check(
            sets.row.get(&(i, j)).map_or(0, |s| on(s)) > 0,
            format!("active row {i}/{j} has no active edge"),
        );
    }
    for (&(i, k), idxs) in &sets.header {
        check(
            !(on(idxs) > 0 && !headers_on.contains(&(i, k))),
            format!("header {i}/{k} carries an active edge but is inactive"),
        );
    }
    for &(i, k) in &headers_on {
        check(
            sets.header.get(&(i, k)).map_or(0, |s| on(s)) > 0,
            format!("active header {i}/{k} has no active edge"),
        );
    }
    for (&(i, k), idxs) in &sets.column {
        check(
            !(on(idxs) > 0 && !cols_on.contains(&(i, k))),
            format!("column {i}/{k} carries an active edge but is inactive"),
        );
    }
    for &(i, k) in &cols_on {
        check(
            sets.column.get(&(i, k)).map_or(0, |s| on(s)) > 0,
            format!("active column {i}/{k} has no active edge"),
        );
    }
    for (&i, idxs) in &sets.table {
        check(
            !(on(idxs) > 0 && !tables_on.contains(&i)),
            format!("table {i} carries an active edge but is inactive"),
        );
    }
    for &i in &tables_on {
        check(
            sets.table.get(&i).map_or(0, |s| on(s)) > 0,
            format!("active table {i} has no active edge"),
        );
    }
    for (&m, idxs) in &sets.choice {
        check(
            !(on(idxs) > 0 && !choices_on.contains(&m)),
            format!("option {m} carries an active edge but is inactive"),
        );
    }
    for &m in &choices_on {
        check(
            sets.choice.get(&m).map_or(0, |s| on(s)) > 0,
            format!("active option {m} has no active edge"),
        );
    }
    for (&l, idxs) in &sets.constituent {
        check(
            !(on(idxs) > 0 && !cons_on.contains(&l)),
            format!("constituent {l} carries an active edge but is inactive"),
        );
    }
    for &l in &cons_on {
        check(
            sets.constituent.get(&l).map_or(0, |s| on(s)) > 0,
            format!("active constituent {l} has no active edge"),
        );
    }
    // Cardinality rules.
    check(choices_on.len() == 1, format!("{} active options, want exactly 1", choices_on.len()));
    check(
        tables_on.len() <= kc.max_tables_to_chain,
        format!("{} active tables exceed the chain cap", tables_on.len()),
    );
    for &i in &tables_on {
        let nrows = rows_on.iter().filter(|&&(ti, _)| ti == i).count();
        check(
            nrows <= kc.max_rows_per_table,
            format!("table {i} has {nrows} active rows, cap {}", kc.max_rows_per_table),
        );
    }
    check(
        cons_on.len() >= kc.min_active_q_cons,
        format!("{} active constituents, need {}", cons_on.len(), kc.min_active_q_cons),
    );
    // Aggregate alignment floors.
    for &(i, j, k) in &cells_on {
        let n = sets.cell.get(&(i, j, k)).map_or(0, |s| on(s));
        check(
            n as f64 >= cfg.alignment.min_active_cell_aggr_alignment,
            format!("active cell {i}/{j}/{k} falls below the alignment floor"),
        );
    }
    for &(i, k) in &headers_on {
        let n = sets.header.get(&(i, k)).map_or(0, |s| on(s));
        check(
            n as f64 >= cfg.alignment.min_active_title_aggr_alignment,
            format!("active header {i}/{k} falls below the alignment floor"),
        );
    }
    // Column and table structure.
    for &(i, k) in &cols_on {
        check(
            cells_on.iter().any(|&(ti, _, tk)| (ti, tk) == (i, k)),
            format!("active column {i}/{k} has no active cell"),
        );
        check(tables_on.contains(&i), format!("active column {i}/{k} in inactive table"));
    }
    for &i in &tables_on {
        check(
            cols_on.iter().any(|&(ti, _)| ti == i),
            format!("active table {i} has no active column"),
        );
    }
    // Option linking through columns and tables.
    let im_on: BTreeSet<(usize, usize)> = cc_on.iter().map(|&(i, _, m)| (i, m)).collect();
    for &(i, m) in &im_on {
        let n = cc_on.iter().filter(|&&(ti, _, tm)| (ti, tm) == (i, m)).count();
        check(
            n <= kc.max_active_column_choice_alignments,
            format!("table {i} aligns {n} columns to option {m}, cap {}",
                kc.max_active_column_choice_alignments),
        );
        check(
            n <= kc.max_active_choice_column_vars,
            format!("table {i} option {m}: {n} column links exceed the hard cap"),
        );
    }
    for &(i, m) in &tc_on {
        let n = sets.table_nonchoice.get(&i).map_or(0, |s| on(s));
        check(
            n > 0,
            format!("table {i} aligned to option {m} without non-option support"),
        );
        check(
            cc_on.iter().any(|&(ti, _, tm)| (ti, tm) == (i, m)),
            format!("table-option link {i}/{m} without a column-option link"),
        );
    }
    let options_linked: BTreeSet<usize> = tc_on.iter().map(|&(_, m)| m).collect();
    for &m in &options_linked {
        let n = tc_on.iter().filter(|&&(_, tm)| tm == m).count();
        check(
            n <= kc.max_active_table_choice_alignments,
            format!("option {m} linked to {n} tables, cap {}",
                kc.max_active_table_choice_alignments),
        );
    }
    for (&(i, k, m), idxs) in &sets.column_choice {
        let n = on(idxs);
        check(
            !(n > 0 && !cc_on.contains(&(i, k, m))),
            format!("column {i}/{k} aligns to option {m} without a column-option link"),
        );
        check(
            !(cc_on.contains(&(i, k, m)) && n == 0),
            format!("column-option link {i}/{k}/{m} has no active edge"),
        );
    }
    for &(i, _k, m) in &cc_on {
        check(
            tc_on.contains(&(i, m)),
            format!("column-option link in table {i} lacks the table-option link for {m}"),
        );
    }
    // Per-constituent caps and co-alignment distance.
    for (&l, idxs) in &sets.constituent {
        let n = on(idxs);
        check(
            n <= kc.max_alignments_per_q_cons,
            format!("constituent {l} has {n} alignments, cap {}", kc.max_alignments_per_q_cons),
        );
    }
    for idxs in sets.cell.values() {
        let active_cons: Vec<usize> = idxs
            .iter()
            .filter(|&&e| active_idx[e] && edges[e].kind == EdgeKind::CellQCons)
            .filter_map(|&e| match edges[e].b {
                ElementRef::Constituent { index } => Some(index),
                _ => None,
            })
            .collect();
        for a in 0..active_cons.len() {
            for b in (a + 1)..active_cons.len() {
                let d = question.constituents[active_cons[a]]
                    .position
                    .abs_diff(question.constituents[active_cons[b]].position);
                check(
                    d <= kc.q_cons_coalign_max_dist,
                    format!(
                        "constituents {} and {} co-align to one cell {d} words apart",
                        active_cons[a], active_cons[b]
                    ),
                );
            }
        }
    }
    // Row structure.
    for &(i, j) in &rows_on {
        let ncells = cells_on.iter().filter(|&&(ti, tj, _)| (ti, tj) == (i, j)).count();
        check(
            ncells >= kc.min_active_cells_per_row,
            format!("active row {i}/{j} has {ncells} active cells, need {}",
                kc.min_active_cells_per_row),
        );
        check(
            sets.row_nonchoice.get(&(i, j)).map_or(0, |s| on(s)) > 0,
            format!("active row {i}/{j} has no question-side or chaining alignment"),
        );
        check(
            sets.row_nonquestion.get(&(i, j)).map_or(0, |s| on(s)) > 0,
            format!("active row {i}/{j} has no option-side or chaining alignment"),
        );
    }
    let row_list: Vec<(usize, usize)> = rows_on.iter().copied().collect();
    for a in 0..row_list.len() {
        for b in (a + 1)..row_list.len() {
            let (i, j) = row_list[a];
            let (i2, j2) = row_list[b];
            if i != i2 {
                continue;
            }
            for k in 0..tables[i].n_cols() {
                check(
                    cells_on.contains(&(i, j, k)) == cells_on.contains(&(i2, j2, k)),
                    format!("active rows {j} and {j2} of table {i} differ at column {k}"),
                );
            }
            let differs = (0..tables[i].n_cols()).any(|k| {
                cols_on.contains(&(i, k))
                    && content_token_set(tables[i].cell(j, k))
                        != content_token_set(tables[i].cell(j2, k))
            });
            check(
                differs,
                format!("active rows {j} and {j2} of table {i} agree on every active column"),
            );
        }
    }
    // Chained tables need an inter-table alignment.
    let table_list: Vec<usize> = tables_on.iter().copied().collect();
    for a in 0..table_list.len() {
        for b in (a + 1)..table_list.len() {
            let (i, i2) = (table_list[a], table_list[b]);
            let linked = edges.iter().enumerate().any(|(e, edge)| {
                active_idx[e]
                    && edge.kind == EdgeKind::CellCellInter
                    && matches!(
                        (edge.a, edge.b),
                        (ElementRef::Cell { table: ta, .. }, ElementRef::Cell { table: tb, .. })
                            if (ta, tb) == (i, i2)
                    )
            });
            check(linked, format!("active tables {i} and {i2} have no chaining alignment"));
        }
    }
    bad
}
