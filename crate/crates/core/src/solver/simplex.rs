//! Dense bounded-variable primal simplex in dictionary form. Structural
//! variables live in boxes (normally [0, 1], possibly pinned by branching),
//! slacks in [0, inf). The dictionary holds the basic rows over the nonbasic
//! columns only, so a pivot swaps one column label instead of growing the
//! tableau. Bland's smallest-index rule picks both the entering and, on
//! ratio ties, the leaving variable, which makes every solve deterministic
//! and terminating.

/// Eligibility threshold on reduced costs.
const EPS_RC: f64 = 1e-9;
/// Minimum usable pivot magnitude.
const EPS_PIV: f64 = 1e-9;
/// Residual infeasibility accepted after phase one.
const F_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// Iteration cap hit; treated as a resource failure by callers.
    Aborted,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Objective at the optimum, meaningful only for [`LpStatus::Optimal`].
    pub value: f64,
    /// One value per structural variable.
    pub values: Vec<f64>,
    pub iterations: u64,
}

/// Maximizes `costs . x` over `rows` (all of the form `a . x <= b`) with
/// per-variable boxes `[lb, ub]`. Row coefficient lists may repeat a
/// variable; entries are summed.
pub fn solve_lp(
    rows: &[(Vec<(usize, f64)>, f64)],
    costs: &[f64],
    lb: &[f64],
    ub: &[f64],
) -> LpResult {
    let ns = costs.len();
    let m = rows.len();

    // Global variable layout: structurals, then one slack per row, then
    // artificials for rows whose slack basis starts infeasible.
    let mut glo_lb: Vec<f64> = lb.to_vec();
    let mut glo_ub: Vec<f64> = ub.to_vec();
    glo_lb.extend(std::iter::repeat_n(0.0, m));
    glo_ub.extend(std::iter::repeat_n(f64::INFINITY, m));

    // Dense aggregated row coefficients over structurals.
    let mut a = vec![0.0; m * ns];
    for (i, (terms, _)) in rows.iter().enumerate() {
        for &(v, c) in terms {
            a[i * ns + v] += c;
        }
    }

    // Nonbasic start: every structural at its lower bound.
    let mut xb: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, (_, b))| b - (0..ns).map(|j| a[i * ns + j] * glo_lb[j]).sum::<f64>())
        .collect();

    let art_rows: Vec<usize> =
        (0..m).filter(|&i| xb[i] < -F_TOL).collect();
    let n_art = art_rows.len();
    let ncols = ns + n_art;

    let mut d = vec![0.0; m * ncols];
    let mut cols: Vec<usize> = (0..ns).collect();
    let at_upper = vec![false; ncols];
    let mut basics: Vec<usize> = (0..m).map(|i| ns + i).collect();

    // Rows that start infeasible flip sign so their artificial basic
    // variable starts positive.
    for i in 0..m {
        let sign = if xb[i] < -F_TOL { -1.0 } else { 1.0 };
        for j in 0..ns {
            d[i * ncols + j] = sign * a[i * ns + j];
        }
    }
    for (t, &i) in art_rows.iter().enumerate() {
        // The artificial replaces the slack in the basis; the slack becomes
        // a nonbasic column with dictionary entry -1 in its own row.
        let art = ns + m + t;
        glo_lb.push(0.0);
        glo_ub.push(f64::INFINITY);
        basics[i] = art;
        cols.push(ns + i);
        d[i * ncols + ns + t] = -1.0;
        xb[i] = -xb[i];
    }

    let mut s = Simplex {
        m,
        ncols,
        d,
        cols,
        at_upper,
        basics,
        xb,
        z: vec![0.0; ncols],
        lb: glo_lb,
        ub: glo_ub,
        iterations: 0,
        cap: 2_000 + 60 * (m as u64 + ncols as u64),
    };

    if n_art > 0 {
        // Phase one: maximize minus the sum of artificials.
        let mut cost = vec![0.0; ns + m + n_art];
        for t in 0..n_art {
            cost[ns + m + t] = -1.0;
        }
        s.reset_reduced_costs(&cost);
        if !s.optimize() {
            return s.aborted();
        }
        let infeas: f64 = (0..s.m)
            .filter(|&i| s.basics[i] >= ns + m)
            .map(|i| s.xb[i].max(0.0))
            .sum();
        if infeas > F_TOL {
            return LpResult {
                status: LpStatus::Infeasible,
                value: 0.0,
                values: Vec::new(),
                iterations: s.iterations,
            };
        }
        // Freeze artificials at zero for phase two.
        for t in 0..n_art {
            s.lb[ns + m + t] = 0.0;
            s.ub[ns + m + t] = 0.0;
        }
    }

    let mut cost = vec![0.0; s.lb.len()];
    cost[..ns].copy_from_slice(costs);
    s.reset_reduced_costs(&cost);
    if !s.optimize() {
        return s.aborted();
    }

    let mut values = vec![0.0; ns];
    for (q, &v) in s.cols.iter().enumerate() {
        if v < ns {
            values[v] = if s.at_upper[q] { s.ub[v] } else { s.lb[v] };
        }
    }
    for (i, &v) in s.basics.iter().enumerate() {
        if v < ns {
            values[v] = s.xb[i].clamp(s.lb[v], s.ub[v]);
        }
    }
    let value = (0..ns).map(|j| costs[j] * values[j]).sum();
    LpResult { status: LpStatus::Optimal, value, values, iterations: s.iterations }
}

struct Simplex {
    m: usize,
    ncols: usize,
    /// Row-major m x ncols dictionary: basic value i = start - sum_j
    /// d[i][j] * nonbasic j.
    d: Vec<f64>,
    /// Global variable index per column.
    cols: Vec<usize>,
    at_upper: Vec<bool>,
    /// Global variable index per row.
    basics: Vec<usize>,
    /// Current value of each basic variable.
    xb: Vec<f64>,
    /// Reduced costs per column.
    z: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    iterations: u64,
    cap: u64,
}

impl Simplex {
    fn reset_reduced_costs(&mut self, cost: &[f64]) {
        for q in 0..self.ncols {
            let mut z = cost[self.cols[q]];
            for i in 0..self.m {
                let cb = cost[self.basics[i]];
                if cb != 0.0 {
                    z -= cb * self.d[i * self.ncols + q];
                }
            }
            self.z[q] = z;
        }
    }

    fn aborted(&self) -> LpResult {
        LpResult {
            status: LpStatus::Aborted,
            value: 0.0,
            values: Vec::new(),
            iterations: self.iterations,
        }
    }

    /// Runs the pivot loop to optimality. Returns false on the iteration
    /// cap, which only a cycling bug should ever reach.
    fn optimize(&mut self) -> bool {
        loop {
            if self.iterations >= self.cap {
                return false;
            }
            // Entering variable: smallest global index with an improving
            // reduced cost.
            let mut enter: Option<usize> = None;
            for q in 0..self.ncols {
                let v = self.cols[q];
                if self.ub[v] - self.lb[v] <= 0.0 {
                    continue;
                }
                let improving = if self.at_upper[q] {
                    self.z[q] < -EPS_RC
                } else {
                    self.z[q] > EPS_RC
                };
                if improving && enter.is_none_or(|e| v < self.cols[e]) {
                    enter = Some(q);
                }
            }
            let Some(e) = enter else { return true };
            let ve = self.cols[e];
            let t = if self.at_upper[e] { -1.0 } else { 1.0 };

            // Ratio test: the entering variable moves by delta in direction
            // t until it hits its own far bound or drives a basic variable
            // to one of its bounds.
            let mut delta = self.ub[ve] - self.lb[ve];
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
            for i in 0..self.m {
                let coef = self.d[i * self.ncols + e];
                if coef.abs() <= EPS_PIV {
                    continue;
                }
                let bi = self.basics[i];
                let rate = coef * t;
                let (limit, to_upper) = if rate > 0.0 {
                    ((self.xb[i] - self.lb[bi]) / rate, false)
                } else {
                    if self.ub[bi].is_infinite() {
                        continue;
                    }
                    ((self.ub[bi] - self.xb[i]) / -rate, true)
                };
                let limit = limit.max(0.0);
                let replace = match leave {
                    _ if limit < delta - 1e-12 => true,
                    Some((r, _)) if limit < delta + 1e-12 && bi < self.basics[r] => true,
                    None if limit < delta + 1e-12 => true,
                    _ => false,
                };
                if replace {
                    delta = delta.min(limit).max(0.0);
                    leave = Some((i, to_upper));
                }
            }
            if delta.is_infinite() {
                // A bounded objective cannot produce this; bail out rather
                // than loop.
                return false;
            }

            self.iterations += 1;
            let step = t * delta;
            match leave {
                None => {
                    // Bound flip: the entering variable crosses its box.
                    for i in 0..self.m {
                        let coef = self.d[i * self.ncols + e];
                        if coef != 0.0 {
                            self.xb[i] -= coef * step;
                        }
                    }
                    self.at_upper[e] = !self.at_upper[e];
                }
                Some((r, to_upper)) => {
                    let enter_val =
                        if self.at_upper[e] { self.ub[ve] } else { self.lb[ve] } + step;
                    for i in 0..self.m {
                        let coef = self.d[i * self.ncols + e];
                        if coef != 0.0 {
                            self.xb[i] -= coef * step;
                        }
                    }
                    let leaving = self.basics[r];
                    self.pivot(r, e);
                    self.basics[r] = ve;
                    self.xb[r] = enter_val;
                    self.cols[e] = leaving;
                    self.at_upper[e] = to_upper;
                    // Snap the leaving variable's recorded value exactly to
                    // its bound via the column state; nothing else to store.
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let n = self.ncols;
        let piv = self.d[r * n + e];
        let inv = 1.0 / piv;
        for j in 0..n {
            self.d[r * n + j] *= inv;
        }
        self.d[r * n + e] = inv;
        let (before, rest) = self.d.split_at_mut(r * n);
        let (row_r, after) = rest.split_at_mut(n);
        let apply = |chunk: &mut [f64]| {
            for row in chunk.chunks_exact_mut(n) {
                let f = row[e];
                if f != 0.0 {
                    row[e] = 0.0;
                    for (x, &rr) in row.iter_mut().zip(row_r.iter()) {
                        *x -= f * rr;
                    }
                }
            }
        };
        apply(before);
        apply(after);
        let fz = self.z[e];
        if fz != 0.0 {
            self.z[e] = 0.0;
            for (x, &rr) in self.z.iter_mut().zip(row_r.iter()) {
                *x -= fz * rr;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxes(n: usize) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; n], vec![1.0; n])
    }

    #[test]
    fn unconstrained_goes_to_profitable_bounds() {
        let (lb, ub) = boxes(3);
        let r = solve_lp(&[], &[2.0, -1.0, 0.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.values, vec![1.0, 0.0, 0.0]);
        assert!((r.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn knapsack_relaxation_is_fractional() {
        // max 3a + 2b, a + b <= 1.5 -> a = 1, b = 0.5.
        let (lb, ub) = boxes(2);
        let rows = vec![(vec![(0, 1.0), (1, 1.0)], 1.5)];
        let r = solve_lp(&rows, &[3.0, 2.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value - 4.0).abs() < 1e-9);
        assert!((r.values[0] - 1.0).abs() < 1e-9);
        assert!((r.values[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn phase_one_restores_feasibility() {
        // max -a - b with a + b >= 1 (as -a - b <= -1).
        let (lb, ub) = boxes(2);
        let rows = vec![(vec![(0, -1.0), (1, -1.0)], -1.0)];
        let r = solve_lp(&rows, &[-1.0, -1.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value + 1.0).abs() < 1e-9);
        assert!((r.values[0] + r.values[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        // a >= 1 and a <= 0.2.
        let (lb, ub) = boxes(1);
        let rows = vec![(vec![(0, -1.0)], -1.0), (vec![(0, 1.0)], 0.2)];
        let r = solve_lp(&rows, &[1.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn empty_row_with_negative_rhs_is_infeasible() {
        let (lb, ub) = boxes(1);
        let rows = vec![(vec![], -1.0)];
        let r = solve_lp(&rows, &[1.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Infeasible);
    }

    #[test]
    fn fixed_boxes_pin_variables() {
        let rows = vec![(vec![(0, 1.0), (1, 1.0)], 2.0)];
        let r = solve_lp(&rows, &[5.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.values, vec![0.0, 1.0]);
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duplicate_terms_are_summed() {
        // 0.5a + 0.5a <= 0.6 -> a <= 0.6.
        let (lb, ub) = boxes(1);
        let rows = vec![(vec![(0, 0.5), (0, 0.5)], 0.6)];
        let r = solve_lp(&rows, &[1.0], &lb, &ub);
        assert!((r.value - 0.6).abs() < 1e-9);
    }

    #[test]
    fn degenerate_equality_pair_solves() {
        // a + b <= 1 and a + b >= 1 with max a.
        let (lb, ub) = boxes(2);
        let rows = vec![
            (vec![(0, 1.0), (1, 1.0)], 1.0),
            (vec![(0, -1.0), (1, -1.0)], -1.0),
        ];
        let r = solve_lp(&rows, &[1.0, 0.0], &lb, &ub);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-9);
        assert!((r.values[0] - 1.0).abs() < 1e-9);
    }
}
