//! Reduction of LPs with equality constraints and bounds to the pure
//! inequality form with a feasible origin.
//!
//! A known feasible point `x0` is translated to the origin and the equality
//! rows are eliminated by substituting `z = Q x + x0` with the orthogonal
//! null-space projector `Q = I - Aeq^+ Aeq`. The resulting instance has
//! `c = Q^T w`, `A = Aineq Q`, `b = bineq - Aineq x0`, and `b >= 0`.

use serde::{Deserialize, Serialize};

use crate::densela::{dot, pseudo_inverse, DenseMatrix, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpInstance, SolveStatus, SolverConfig};

/// An LP with inequalities, equalities, and per-variable bounds, as parsed
/// from MPS. Objective is maximization of `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralLp {
    pub w: Vec<f64>,
    pub a_ineq: DenseMatrix,
    pub b_ineq: Vec<f64>,
    pub a_eq: DenseMatrix,
    pub b_eq: Vec<f64>,
    /// (lower, upper) per variable; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
    pub id: String,
}

impl GeneralLp {
    pub fn num_vars(&self) -> usize {
        self.w.len()
    }

    /// Fold finite variable bounds into extra inequality rows, leaving the
    /// bounds list trivial. The Appendix-style reduction wants every
    /// restriction as a row of `a_ineq`.
    pub fn fold_bounds(&self) -> GeneralLp {
        let n = self.num_vars();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for i in 0..self.a_ineq.rows() {
            rows.push(self.a_ineq.row(i).to_vec());
            rhs.push(self.b_ineq[i]);
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if hi.is_finite() {
                let mut r = vec![0.0; n];
                r[j] = 1.0;
                rows.push(r);
                rhs.push(hi);
            }
            if lo.is_finite() {
                let mut r = vec![0.0; n];
                r[j] = -1.0;
                rows.push(r);
                rhs.push(-lo);
            }
        }
        GeneralLp {
            w: self.w.clone(),
            a_ineq: DenseMatrix::from_rows(&rows),
            b_ineq: rhs,
            a_eq: self.a_eq.clone(),
            b_eq: self.b_eq.clone(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            id: self.id.clone(),
        }
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let n = self.num_vars();
        assert_eq!(x.len(), n);
        let ax = self.a_ineq.matvec(x);
        if ax.iter().zip(&self.b_ineq).any(|(l, r)| *l > r + tol) {
            return false;
        }
        if self.a_eq.rows() > 0 {
            let ae = self.a_eq.matvec(x);
            if ae.iter().zip(&self.b_eq).any(|(l, r)| (l - r).abs() > tol) {
                return false;
            }
        }
        self.bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol)
    }
}

/// Inequality-form instance plus everything needed to map solutions back.
#[derive(Debug, Clone)]
pub struct Reformulation {
    pub instance: LpInstance,
    /// `I - Aeq^+ Aeq`, identity when there are no equality rows.
    pub projector: DenseMatrix,
    pub x0: Vec<f64>,
    pub objective_offset: f64,
}

const ANCHOR_TOL: f64 = 1e-6;

/// Eliminate equalities and translate `x0` to the origin.
/// Bounds are folded into inequality rows first.
pub fn remove_equalities(g: &GeneralLp, x0: &[f64]) -> Result<Reformulation> {
    let g = g.fold_bounds();
    let n = g.num_vars();
    assert_eq!(x0.len(), n);
    if !g.is_feasible(x0, ANCHOR_TOL) {
        return Err(Error::AnchorInfeasible(format!(
            "anchor is not feasible for '{}'",
            g.id
        )));
    }

    let projector = if g.a_eq.rows() == 0 {
        DenseMatrix::identity(n)
    } else {
        let pinv = pseudo_inverse(&g.a_eq, DEFAULT_RANK_TOL)?;
        DenseMatrix::identity(n).sub(&pinv.matmul(&g.a_eq))
    };

    let c = projector.matvec_t(&g.w); // Q symmetric, but keep the transpose form
    let a = g.a_ineq.matmul(&projector);
    let shift = g.a_ineq.matvec(x0);
    let b: Vec<f64> = g
        .b_ineq
        .iter()
        .zip(&shift)
        .map(|(bi, si)| bi - si)
        .collect();
    let instance = LpInstance::new(c, a, b, g.id.clone());
    Ok(Reformulation {
        instance,
        projector,
        x0: x0.to_vec(),
        objective_offset: dot(&g.w, x0),
    })
}

/// Map a point of the reformulated instance back: `z = Q x + x0`.
pub fn recover_original(r: &Reformulation, x: &[f64]) -> Vec<f64> {
    let qx = r.projector.matvec(x);
    qx.iter().zip(&r.x0).map(|(a, b)| a + b).collect()
}

/// A well-centered feasible point: maximize the uniform margin `t` of the
/// row-normalized inequalities subject to the equalities, `t <= 1`.
///
/// The margin LP itself carries equality rows, so it is solved in two
/// passes: a phase-1 feasibility LP supplies an anchor, then the margin LP
/// is reformulated around that anchor and solved.
pub fn find_interior_point(g: &GeneralLp) -> Result<Vec<f64>> {
    let g = g.fold_bounds();
    let n = g.num_vars();
    let anchor = find_feasible_point(&g)?;

    // Margin LP over (x, t): maximize t subject to
    //   (a_i / |a_i|) x + t <= b_i / |a_i|,  A_eq x = b_eq,  t <= 1.
    let mi = g.a_ineq.rows();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(mi + 1);
    let mut rhs: Vec<f64> = Vec::with_capacity(mi + 1);
    for i in 0..mi {
        let norm = crate::densela::norm2(g.a_ineq.row(i));
        if norm == 0.0 {
            continue; // vacuous row (b >= 0 guaranteed by feasibility)
        }
        let mut r: Vec<f64> = g.a_ineq.row(i).iter().map(|v| v / norm).collect();
        r.push(1.0);
        rows.push(r);
        rhs.push(g.b_ineq[i] / norm);
    }
    let mut cap = vec![0.0; n];
    cap.push(1.0);
    rows.push(cap);
    rhs.push(1.0);

    let mut a_eq = DenseMatrix::zeros(g.a_eq.rows(), n + 1);
    for i in 0..g.a_eq.rows() {
        for j in 0..n {
            a_eq.set(i, j, g.a_eq.get(i, j));
        }
    }
    let mut w = vec![0.0; n + 1];
    w[n] = 1.0;
    let margin_lp = GeneralLp {
        w,
        a_ineq: DenseMatrix::from_rows(&rows),
        b_ineq: rhs,
        a_eq,
        b_eq: g.b_eq.clone(),
        bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n + 1],
        id: format!("{}|margin", g.id),
    };
    let mut margin_anchor = anchor;
    margin_anchor.push(0.0); // t = 0 is always a valid margin at a feasible point

    let reform = remove_equalities(&margin_lp, &margin_anchor)?;
    let cfg = SolverConfig::default();
    let sol = solve_lp(&reform.instance, &cfg)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::NumericalFailure(format!(
            "margin LP ended with status {:?}",
            sol.status
        )));
    }
    let full = recover_original(&reform, sol.x.as_ref().unwrap());
    let x0 = full[..n].to_vec();
    if !g.is_feasible(&x0, 1e-7) {
        return Err(Error::NumericalFailure(
            "margin LP produced an infeasible point".into(),
        ));
    }
    Ok(x0)
}

/// Phase-1 LP: minimize the worst violation `v` of all constraints.
/// Always feasible; the original system is feasible iff the optimum
/// reaches `v <= tol`.
fn find_feasible_point(g: &GeneralLp) -> Result<Vec<f64>> {
    let n = g.num_vars();
    let mi = g.a_ineq.rows();
    let me = g.a_eq.rows();
    // Variables (x, v), maximize -v subject to v >= 0 and
    //   A_ineq x - v <= b_ineq, A_eq x - v <= b_eq, -A_eq x - v <= -b_eq.
    // The optimum is 0 exactly when the original system is feasible.
    let rows_total = mi + 2 * me + 1;
    let mut a = DenseMatrix::zeros(rows_total, n + 1);
    let mut b = vec![0.0; rows_total];
    a.set(rows_total - 1, n, -1.0); // -v <= 0
    for i in 0..mi {
        for j in 0..n {
            a.set(i, j, g.a_ineq.get(i, j));
        }
        a.set(i, n, -1.0);
        b[i] = g.b_ineq[i];
    }
    for i in 0..me {
        for j in 0..n {
            a.set(mi + 2 * i, j, g.a_eq.get(i, j));
            a.set(mi + 2 * i + 1, j, -g.a_eq.get(i, j));
        }
        a.set(mi + 2 * i, n, -1.0);
        a.set(mi + 2 * i + 1, n, -1.0);
        b[mi + 2 * i] = g.b_eq[i];
        b[mi + 2 * i + 1] = -g.b_eq[i];
    }
    let mut c = vec![0.0; n + 1];
    c[n] = -1.0;
    let inst = LpInstance::new(c, a, b, format!("{}|phase1", g.id));
    let cfg = SolverConfig::default();
    let sol = solve_lp(&inst, &cfg)?;
    if sol.status != SolveStatus::Optimal {
        // the phase-1 LP is feasible by construction; Unbounded cannot
        // happen because v is bounded below by the best violation
        return Err(Error::NumericalFailure(format!(
            "phase-1 LP status {:?}",
            sol.status
        )));
    }
    let x = sol.x.unwrap();
    if x[n] > ANCHOR_TOL {
        return Err(Error::Infeasible);
    }
    Ok(x[..n].to_vec())
}

/// Check a reformulation's structural invariants (test helper).
pub fn projector_defect(r: &Reformulation) -> f64 {
    let q = &r.projector;
    let idem = q.matmul(q).sub(q).frobenius_norm();
    let sym = q.sub(&q.transpose()).frobenius_norm();
    idem.max(sym)
}
