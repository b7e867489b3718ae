//! Inequality-form LP representation and a dense primal simplex solver.
//!
//! Instances are `maximize c^T x subject to A x <= b` with free variables.
//! Internally we split `x = x+ - x-`, add slacks, and run the full-tableau
//! simplex method. Rows with negative right-hand sides get artificial
//! variables and a phase-1 pass; projected and translated instances have
//! `b >= 0` and skip it.

use serde::{Deserialize, Serialize};

use crate::densela::{dot, inf_norm, DenseMatrix};
use crate::error::{Error, Result};

/// One inequality-form LP: maximize `c^T x` subject to `A x <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpInstance {
    pub c: Vec<f64>,
    pub a: DenseMatrix,
    pub b: Vec<f64>,
    pub id: String,
}

impl LpInstance {
    pub fn new(c: Vec<f64>, a: DenseMatrix, b: Vec<f64>, id: impl Into<String>) -> Self {
        assert_eq!(a.cols(), c.len(), "objective length must match columns");
        assert_eq!(a.rows(), b.len(), "rhs length must match rows");
        Self { c, a, b, id: id.into() }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.a.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a solve. Primal, dual, and objective are present iff Optimal.
/// The brute-force oracle produces no dual certificate.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: SolveStatus,
    pub x: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub objective: Option<f64>,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self { status: SolveStatus::Infeasible, x: None, lambda: None, objective: None }
    }

    fn unbounded() -> Self {
        Self { status: SolveStatus::Unbounded, x: None, lambda: None, objective: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub feas_tol: f64,
    pub dual_tol: f64,
    pub max_pivots: usize,
    /// Non-improving pivots tolerated before switching to Bland's rule.
    pub bland_trigger_factor: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            dual_tol: 1e-6,
            max_pivots: 200_000,
            bland_trigger_factor: 3,
        }
    }
}

/// `A x <= b + tol` elementwise.
pub fn check_feasible(inst: &LpInstance, x: &[f64], tol: f64) -> bool {
    assert_eq!(x.len(), inst.num_vars());
    let ax = inst.a.matvec(x);
    ax.iter().zip(&inst.b).all(|(lhs, rhs)| *lhs <= rhs + tol)
}

/// Dense full-tableau primal simplex on the split standard form.
pub fn solve_lp(inst: &LpInstance, cfg: &SolverConfig) -> Result<LpSolution> {
    assert!(inst.is_finite(), "instance entries must be finite");
    let n = inst.num_vars();
    let m = inst.num_constraints();

    if m == 0 {
        // No constraints: bounded only for c = 0.
        if inst.c.iter().all(|v| *v == 0.0) {
            return Ok(LpSolution {
                status: SolveStatus::Optimal,
                x: Some(vec![0.0; n]),
                lambda: Some(vec![]),
                objective: Some(0.0),
            });
        }
        return Ok(LpSolution::unbounded());
    }

    // Columns: x+ (n), x- (n), slack (m), artificials for negative-b rows.
    let ns = 2 * n + m;
    let art_rows: Vec<usize> = (0..m).filter(|&i| inst.b[i] < 0.0).collect();
    let ncols = ns + art_rows.len();

    let mut tab = Tableau::build(inst, &art_rows, ncols);

    if !art_rows.is_empty() {
        // Phase 1: maximize minus the sum of artificials.
        let mut cost = vec![0.0; ncols];
        for j in ns..ncols {
            cost[j] = -1.0;
        }
        tab.reset_objective(&cost);
        tab.run(cfg, &cost, ns)?;
        if tab.objective_value < -cfg.feas_tol {
            return Ok(LpSolution::infeasible());
        }
        tab.pivot_out_artificials(ns, cfg);
    }

    // Phase 2 with the real costs; artificials are barred from entering.
    let mut cost = vec![0.0; ncols];
    for j in 0..n {
        cost[j] = inst.c[j];
        cost[n + j] = -inst.c[j];
    }
    tab.reset_objective(&cost);
    let bounded = tab.run(cfg, &cost, ns)?;
    if !bounded {
        return Ok(LpSolution::unbounded());
    }

    // Primal from the basis, dual from slack reduced costs.
    let mut x = vec![0.0; n];
    for (row, &col) in tab.basis.iter().enumerate() {
        let v = tab.rhs(row);
        if col < n {
            x[col] += v;
        } else if col < 2 * n {
            x[col - n] -= v;
        }
    }
    let lambda: Vec<f64> = (0..m)
        .map(|i| (-tab.obj[2 * n + i]).max(0.0))
        .collect();
    let objective = dot(&inst.c, &x);
    Ok(LpSolution {
        status: SolveStatus::Optimal,
        x: Some(x),
        lambda: Some(lambda),
        objective: Some(objective),
    })
}

struct Tableau {
    // m rows of length ncols + 1 (rhs last).
    rows: Vec<Vec<f64>>,
    // reduced costs, length ncols
    obj: Vec<f64>,
    objective_value: f64,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
}

impl Tableau {
    fn build(inst: &LpInstance, art_rows: &[usize], ncols: usize) -> Self {
        let n = inst.num_vars();
        let m = inst.num_constraints();
        let mut rows = Vec::with_capacity(m);
        let mut basis = vec![0usize; m];
        for i in 0..m {
            let neg = inst.b[i] < 0.0;
            let sign = if neg { -1.0 } else { 1.0 };
            let mut row = vec![0.0; ncols + 1];
            let arow = inst.a.row(i);
            for j in 0..n {
                row[j] = sign * arow[j];
                row[n + j] = -sign * arow[j];
            }
            row[2 * n + i] = sign;
            row[ncols] = sign * inst.b[i];
            if neg {
                let art_idx = art_rows.iter().position(|&r| r == i).unwrap();
                // artificial column is -e_i before scaling, +e_i after
                row[2 * n + m + art_idx] = 1.0;
                basis[i] = 2 * n + m + art_idx;
            } else {
                basis[i] = 2 * n + i;
            }
            rows.push(row);
        }
        Self {
            rows,
            obj: vec![0.0; ncols],
            objective_value: 0.0,
            basis,
            m,
            ncols,
        }
    }

    fn rhs(&self, row: usize) -> f64 {
        self.rows[row][self.ncols]
    }

    fn reset_objective(&mut self, cost: &[f64]) {
        let ncols = self.ncols;
        let mut obj = cost.to_vec();
        let mut value = 0.0;
        for (row, &bcol) in self.basis.iter().enumerate() {
            let cb = cost[bcol];
            if cb == 0.0 {
                continue;
            }
            for j in 0..ncols {
                obj[j] -= cb * self.rows[row][j];
            }
            value += cb * self.rows[row][ncols];
        }
        // basic columns are exactly zero by construction
        for &bcol in &self.basis {
            obj[bcol] = 0.0;
        }
        self.obj = obj;
        self.objective_value = value;
    }

    /// Run pivots until optimal or unbounded. Returns false on unboundedness.
    /// Columns at `bar_from` and beyond (artificials) never enter.
    fn run(&mut self, cfg: &SolverConfig, cost: &[f64], bar_from: usize) -> Result<bool> {
        let tol = 1e-9;
        let bland_trigger = cfg.bland_trigger_factor * (self.m + self.ncols);
        let mut non_improving = 0usize;
        let mut use_bland = false;
        for _pivot in 0..cfg.max_pivots {
            let entering = if use_bland {
                (0..bar_from).find(|&j| self.obj[j] > tol)
            } else {
                let mut best = None;
                let mut best_val = tol;
                for j in 0..bar_from {
                    if self.obj[j] > best_val {
                        best_val = self.obj[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(e) = entering else {
                return Ok(true);
            };

            // Ratio test; Bland ties break to the smallest basic index.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let coef = self.rows[i][e];
                if coef > tol {
                    let ratio = self.rhs(i) / coef;
                    let better = ratio < best_ratio - 1e-12
                        || (ratio < best_ratio + 1e-12
                            && leave.map_or(false, |l| {
                                use_bland && self.basis[i] < self.basis[l]
                            }));
                    if better {
                        best_ratio = ratio;
                        leave = Some(i);
                    }
                }
            }
            let Some(l) = leave else {
                return Ok(false); // unbounded direction
            };

            let before = self.objective_value;
            self.pivot(l, e);
            if self.objective_value <= before + 1e-12 {
                non_improving += 1;
                if non_improving > bland_trigger {
                    use_bland = true;
                }
            } else {
                non_improving = 0;
            }
            let _ = cost;
        }
        Err(Error::NumericalFailure(format!(
            "pivot cap {} exceeded",
            cfg.max_pivots
        )))
    }

    fn pivot(&mut self, leave_row: usize, enter_col: usize) {
        let ncols = self.ncols;
        let pivot_val = self.rows[leave_row][enter_col];
        let inv = 1.0 / pivot_val;
        for v in self.rows[leave_row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[leave_row].clone();
        for i in 0..self.m {
            if i == leave_row {
                continue;
            }
            let f = self.rows[i][enter_col];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.rows[i];
            for j in 0..=ncols {
                row[j] -= f * pivot_row[j];
            }
            row[enter_col] = 0.0;
        }
        let f = self.obj[enter_col];
        if f != 0.0 {
            for j in 0..ncols {
                self.obj[j] -= f * pivot_row[j];
            }
            self.objective_value += f * pivot_row[ncols];
            self.obj[enter_col] = 0.0;
        }
        self.basis[leave_row] = enter_col;
    }

    /// Drive basic artificials (all at zero level after a feasible phase 1)
    /// out of the basis where a non-artificial pivot exists.
    fn pivot_out_artificials(&mut self, art_from: usize, _cfg: &SolverConfig) {
        for row in 0..self.m {
            if self.basis[row] < art_from {
                continue;
            }
            let enter = (0..art_from).find(|&j| self.rows[row][j].abs() > 1e-9);
            if let Some(e) = enter {
                self.pivot(row, e);
            }
            // Otherwise the row is redundant; the artificial stays basic at
            // zero and is barred from entering elsewhere.
        }
    }
}

/// Exhaustive basic-solution enumeration on the split form, for testing.
///
/// Every vertex of `{z >= 0 : [A, -A] z <= b}` is the solution of a square
/// subsystem of the stacked rows `[[A, -A]; [-I]]`. Unboundedness is
/// decided over the recession polytope `{d : A d <= 0, |d|_inf <= 1}`,
/// whose vertices carry the extreme-ray directions.
pub fn brute_force_solve(inst: &LpInstance) -> Result<LpSolution> {
    let n = inst.num_vars();
    let m = inst.num_constraints();
    if n > 8 || m > 16 {
        return Err(Error::OracleTooLarge);
    }
    let k = 2 * n;
    let rows_total = m + k;
    // Stacked system A' z <= b' with A' = [[A, -A]; [-I_{2n}]].
    let mut ap = DenseMatrix::zeros(rows_total, k);
    let mut bp = vec![0.0; rows_total];
    for i in 0..m {
        let arow = inst.a.row(i);
        for j in 0..n {
            ap.set(i, j, arow[j]);
            ap.set(i, n + j, -arow[j]);
        }
        bp[i] = inst.b[i];
    }
    for j in 0..k {
        ap.set(m + j, j, -1.0);
    }
    let cp: Vec<f64> = inst
        .c
        .iter()
        .copied()
        .chain(inst.c.iter().map(|v| -v))
        .collect();

    let feas_tol = 1e-7;
    let mut best: Option<(f64, Vec<f64>)> = None;

    // Vertices: all size-2n row subsets with nonsingular submatrix.
    for subset in Combinations::new(rows_total, k) {
        let mut sub = DenseMatrix::zeros(k, k);
        let mut rhs = vec![0.0; k];
        for (r, &idx) in subset.iter().enumerate() {
            for j in 0..k {
                sub.set(r, j, ap.get(idx, j));
            }
            rhs[r] = bp[idx];
        }
        let Ok(z) = crate::densela::solve_linear_system(&sub, &rhs) else {
            continue;
        };
        let az = ap.matvec(&z);
        let scale = inf_norm(&z).max(1.0);
        if az.iter().zip(&bp).all(|(l, r)| *l <= r + feas_tol * scale) {
            let val = dot(&cp, &z);
            if best.as_ref().map_or(true, |(bv, _)| val > *bv) {
                best = Some((val, z));
            }
        }
    }

    let Some((val, z)) = best else {
        return Ok(LpSolution::infeasible());
    };

    if recession_improves(&inst.a, &inst.c) {
        return Ok(LpSolution::unbounded());
    }

    let x: Vec<f64> = (0..n).map(|j| z[j] - z[n + j]).collect();
    Ok(LpSolution {
        status: SolveStatus::Optimal,
        x: Some(x),
        lambda: None,
        objective: Some(val),
    })
}

/// True iff some recession direction `d` with `A d <= 0` has `c^T d > 0`.
/// Enumerates vertices of the bounded polytope `{A d <= 0, |d|_inf <= 1}`,
/// where the maximum of `c^T d` is attained.
fn recession_improves(a: &DenseMatrix, c: &[f64]) -> bool {
    let n = a.cols();
    let m = a.rows();
    let rows_total = m + 2 * n;
    let mut rp = DenseMatrix::zeros(rows_total, n);
    let mut rb = vec![0.0; rows_total];
    for i in 0..m {
        for j in 0..n {
            rp.set(i, j, a.get(i, j));
        }
    }
    for j in 0..n {
        rp.set(m + 2 * j, j, 1.0);
        rb[m + 2 * j] = 1.0;
        rp.set(m + 2 * j + 1, j, -1.0);
        rb[m + 2 * j + 1] = 1.0;
    }
    for subset in Combinations::new(rows_total, n) {
        let mut sub = DenseMatrix::zeros(n, n);
        let mut rhs = vec![0.0; n];
        for (r, &idx) in subset.iter().enumerate() {
            for j in 0..n {
                sub.set(r, j, rp.get(idx, j));
            }
            rhs[r] = rb[idx];
        }
        let Ok(d) = crate::densela::solve_linear_system(&sub, &rhs) else {
            continue;
        };
        let rd = rp.matvec(&d);
        if rd.iter().zip(&rb).all(|(l, r)| *l <= r + 1e-9) && dot(c, &d) > 1e-9 {
            return true;
        }
    }
    false
}

/// Lexicographic k-subsets of 0..n.
struct Combinations {
    n: usize,
    state: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        let state = if k <= n { Some((0..k).collect()) } else { None };
        Self { n, state }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.state.clone()?;
        let k = current.len();
        let mut next = current.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.state = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - (k - i) {
                next[i] += 1;
                for j in (i + 1)..k {
                    next[j] = next[j - 1] + 1;
                }
                self.state = Some(next);
                break;
            }
        }
        Some(current)
    }
}

/// Verify the optimality certificates of a solve_lp result.
/// Panics with a description when a certificate fails.
pub fn assert_certificates(inst: &LpInstance, sol: &LpSolution, cfg: &SolverConfig) {
    assert_eq!(sol.status, SolveStatus::Optimal);
    let x = sol.x.as_ref().expect("primal");
    let lambda = sol.lambda.as_ref().expect("dual");
    let obj = sol.objective.expect("objective");
    assert!(check_feasible(inst, x, cfg.feas_tol), "primal infeasible");
    assert!(lambda.iter().all(|l| *l >= -cfg.feas_tol), "negative dual");
    let atl = inst.a.matvec_t(lambda);
    let resid: Vec<f64> = atl.iter().zip(&inst.c).map(|(u, v)| u - v).collect();
    let scale = inf_norm(&inst.c).max(1.0);
    assert!(
        inf_norm(&resid) <= cfg.dual_tol * scale,
        "dual infeasibility {} > {}",
        inf_norm(&resid),
        cfg.dual_tol * scale
    );
    let dual_obj = dot(&inst.b, lambda);
    assert!(
        (obj - dual_obj).abs() <= cfg.dual_tol * obj.abs().max(1.0) * 10.0,
        "duality gap {} vs {}",
        obj,
        dual_obj
    );
    let slack = inst.a.matvec(x);
    for i in 0..inst.num_constraints() {
        let cs = lambda[i] * (inst.b[i] - slack[i]);
        assert!(
            cs.abs() <= cfg.dual_tol * obj.abs().max(1.0) * 10.0,
            "complementary slackness violated at row {i}: {cs}"
        );
    }
}
