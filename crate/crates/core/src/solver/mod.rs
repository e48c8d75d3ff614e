//! Exact 0/1 maximization by best-first branch and bound over the LP
//! relaxation, plus an exhaustive oracle for cross-checking small programs.
//! Both paths share the problem's own feasibility check and objective
//! evaluation, so their verdicts are directly comparable.

mod simplex;

pub use simplex::{LpResult, LpStatus};

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{IlpProblem, Sense, VarId};

/// Constraint satisfaction slack accepted on 0/1 assignments.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Two objective values within this are considered equal.
pub const OBJECTIVE_TOL: f64 = 1e-9;
/// An LP value this close to an integer counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Safety margin subtracted from the incumbent before pruning on bounds.
const PRUNE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// A time or iteration budget expired; the solution carries the best
    /// incumbent found, which may be none.
    TimedOut,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Search nodes whose relaxation was solved (or assignments evaluated,
    /// for the exhaustive oracle).
    pub nodes: u64,
    pub lp_iterations: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub status: SolveStatus,
    /// One value per variable in canonical order; empty unless an incumbent
    /// exists.
    pub assignment: Vec<bool>,
    /// Meaningful only when an incumbent exists.
    pub objective: f64,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolverConfig {
    pub time_limit: Option<Duration>,
}

/// Every constraint as `a . x <= b`; `Ge` rows negate, `Eq` rows split.
pub(crate) fn normalized_rows(p: &IlpProblem) -> Vec<(Vec<(usize, f64)>, f64)> {
    let mut rows = Vec::new();
    for c in &p.constraints {
        let fwd: Vec<(usize, f64)> = c.terms.iter().map(|&(VarId(v), w)| (v, w)).collect();
        let bwd: Vec<(usize, f64)> = fwd.iter().map(|&(v, w)| (v, -w)).collect();
        match c.sense {
            Sense::Le => rows.push((fwd, c.rhs)),
            Sense::Ge => rows.push((bwd, -c.rhs)),
            Sense::Eq => {
                rows.push((fwd, c.rhs));
                rows.push((bwd, -c.rhs));
            }
        }
    }
    rows
}

/// Solves the LP relaxation over the unit box, no integrality.
pub fn lp_relax(p: &IlpProblem) -> LpResult {
    let costs: Vec<f64> = p.vars.iter().map(|v| v.weight).collect();
    let n = costs.len();
    simplex::solve_lp(&normalized_rows(p), &costs, &vec![0.0; n], &vec![1.0; n])
}

struct Node {
    id: u64,
    bound: f64,
    fixings: Vec<(usize, bool)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl Eq for Node {}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // Highest bound first; among equal bounds the earliest-created node,
        // which makes the zero-branch explore before the one-branch.
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn lex_less(a: &[bool], b: &[bool]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return !x;
        }
    }
    false
}

/// Admits `cand` as incumbent if feasible and better, where equal objectives
/// prefer the lexicographically smaller assignment.
fn try_incumbent(p: &IlpProblem, cand: Vec<bool>, incumbent: &mut Option<(Vec<bool>, f64)>) {
    if !p.is_feasible(&cand, FEASIBILITY_TOL) {
        return;
    }
    let obj = p.objective_value(&cand);
    let take = match incumbent {
        None => true,
        Some((best, bobj)) => {
            obj > *bobj + OBJECTIVE_TOL
                || ((obj - *bobj).abs() <= OBJECTIVE_TOL && lex_less(&cand, best))
        }
    };
    if take {
        *incumbent = Some((cand, obj));
    }
}

/// Index of the variable closest to one half, ties to the lowest index;
/// `None` when the point is integral.
fn most_fractional(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if (v - v.round()).abs() <= INTEGRALITY_TOL {
            continue;
        }
        let d = (v - 0.5).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

pub fn solve(p: &IlpProblem) -> Solution {
    solve_with(p, &SolverConfig::default())
}

pub fn solve_with(p: &IlpProblem, cfg: &SolverConfig) -> Solution {
    let n = p.n_vars();
    let rows = normalized_rows(p);
    let mut stats = SolveStats::default();
    if n == 0 {
        let feasible = rows.iter().all(|(_, b)| *b >= -FEASIBILITY_TOL);
        return Solution {
            status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            assignment: Vec::new(),
            objective: 0.0,
            stats,
        };
    }
    let costs: Vec<f64> = p.vars.iter().map(|v| v.weight).collect();
    let deadline = cfg.time_limit.map(|d| Instant::now() + d);

    let mut incumbent: Option<(Vec<bool>, f64)> = None;
    let mut heap = BinaryHeap::new();
    heap.push(Node { id: 0, bound: f64::INFINITY, fixings: Vec::new() });
    let mut next_id = 1u64;
    let mut timed_out = false;

    while let Some(node) = heap.pop() {
        if let Some((_, inc)) = &incumbent {
            // Popped bounds only decrease, so the whole frontier is pruned.
            if node.bound < *inc - PRUNE_EPS {
                break;
            }
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            timed_out = true;
            break;
        }
        let mut lb = vec![0.0; n];
        let mut ub = vec![1.0; n];
        for &(v, val) in &node.fixings {
            if val {
                lb[v] = 1.0;
            } else {
                ub[v] = 0.0;
            }
        }
        let lp = simplex::solve_lp(&rows, &costs, &lb, &ub);
        stats.nodes += 1;
        stats.lp_iterations += lp.iterations;
        match lp.status {
            LpStatus::Infeasible => continue,
            LpStatus::Aborted => {
                timed_out = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        if let Some((_, inc)) = &incumbent {
            if lp.value < *inc - PRUNE_EPS {
                continue;
            }
        }
        if node.id == 0 {
            // Greedy rounding of the root relaxation seeds the incumbent.
            let cand: Vec<bool> = lp.values.iter().map(|&v| v >= 0.5).collect();
            try_incumbent(p, cand, &mut incumbent);
        }
        match most_fractional(&lp.values) {
            None => {
                let cand: Vec<bool> = lp.values.iter().map(|&v| v >= 0.5).collect();
                try_incumbent(p, cand, &mut incumbent);
            }
            Some(v) => {
                for val in [false, true] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((v, val));
                    heap.push(Node { id: next_id, bound: lp.value, fixings });
                    next_id += 1;
                }
            }
        }
    }

    match incumbent {
        Some((assignment, objective)) => Solution {
            status: if timed_out { SolveStatus::TimedOut } else { SolveStatus::Optimal },
            assignment,
            objective,
            stats,
        },
        None => Solution {
            status: if timed_out { SolveStatus::TimedOut } else { SolveStatus::Infeasible },
            assignment: Vec::new(),
            objective: 0.0,
            stats,
        },
    }
}

/// Exhaustive oracle: enumerates assignments in lexicographic order
/// (variable 0 as the most significant bit) and keeps the first maximum,
/// i.e. the lexicographically smallest optimum. Capped at 24 variables.
pub fn brute_force(p: &IlpProblem) -> Solution {
    let n = p.n_vars();
    assert!(n <= 24, "exhaustive search capped at 24 variables, got {n}");
    let mut best: Option<(Vec<bool>, f64)> = None;
    let mut assignment = vec![false; n];
    let total: u64 = 1 << n;
    for mask in 0..total {
        for (i, slot) in assignment.iter_mut().enumerate() {
            *slot = (mask >> (n - 1 - i)) & 1 == 1;
        }
        if !p.is_feasible(&assignment, FEASIBILITY_TOL) {
            continue;
        }
        let obj = p.objective_value(&assignment);
        if best.as_ref().is_none_or(|(_, b)| obj > *b) {
            best = Some((assignment.clone(), obj));
        }
    }
    let stats = SolveStats { nodes: total, lp_iterations: 0 };
    match best {
        Some((assignment, objective)) => {
            Solution { status: SolveStatus::Optimal, assignment, objective, stats }
        }
        None => Solution {
            status: SolveStatus::Infeasible,
            assignment: Vec::new(),
            objective: 0.0,
            stats,
        },
    }
}
