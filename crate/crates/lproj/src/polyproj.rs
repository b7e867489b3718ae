//! Euclidean projection onto a polyhedron `{x : A x <= b}` via Dykstra's
//! cyclic alternating projections over the halfspaces.
//!
//! Dykstra's corrections make the iterates converge to the exact nearest
//! point of the intersection, not merely to some feasible point, which is
//! what the column-projection step of the gradient learner needs.

use crate::densela::{dot, DenseMatrix};
use crate::error::{Error, Result};
use crate::project::ProjectionMatrix;

#[derive(Debug, Clone)]
pub struct ProjectionConfig {
    /// Stop when both the iterate movement over a full cycle and the worst
    /// constraint violation drop to `tol`.
    pub tol: f64,
    pub max_cycles: usize,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self { tol: 1e-7, max_cycles: 10_000 }
    }
}

/// Nearest point of `{x : A x <= b}` to `p`.
pub fn project_point(
    a: &DenseMatrix,
    b: &[f64],
    p: &[f64],
    cfg: &ProjectionConfig,
) -> Result<Vec<f64>> {
    check_zero_rows(a, b)?;
    project_point_impl(a, b, p, cfg).map_err(|best| Error::ConvergenceFailure { column: 0, best })
}

/// A zero row with a negative rhs makes the polytope empty.
fn check_zero_rows(a: &DenseMatrix, b: &[f64]) -> Result<()> {
    for i in 0..a.rows() {
        if b[i] < 0.0 && a.row(i).iter().all(|v| *v == 0.0) {
            return Err(Error::Infeasible);
        }
    }
    Ok(())
}

fn project_point_impl(
    a: &DenseMatrix,
    b: &[f64],
    p: &[f64],
    cfg: &ProjectionConfig,
) -> std::result::Result<Vec<f64>, Vec<f64>> {
    let m = a.rows();
    let n = a.cols();
    assert_eq!(b.len(), m);
    assert_eq!(p.len(), n);

    let row_norm_sq: Vec<f64> = (0..m).map(|i| dot(a.row(i), a.row(i))).collect();
    let mut x = p.to_vec();
    // a halfspace correction is always a multiple of the row normal, so one
    // scalar per row suffices
    let mut corrections = vec![0.0; m];
    let mut next_polish = 16;
    for cycle in 0..cfg.max_cycles {
        let mut movement: f64 = 0.0;
        for i in 0..m {
            if row_norm_sq[i] == 0.0 {
                continue;
            }
            let row = a.row(i);
            // z = x + mu_i a_i, then project z onto the halfspace
            let viol = dot(row, &x) + corrections[i] * row_norm_sq[i] - b[i];
            let step = if viol > 0.0 { viol / row_norm_sq[i] } else { 0.0 };
            let delta = corrections[i] - step;
            if delta != 0.0 {
                for j in 0..n {
                    x[j] += delta * row[j];
                }
                movement += delta * delta * row_norm_sq[i];
            }
            corrections[i] = step;
        }
        let worst = worst_violation(a, b, &x);
        if movement.sqrt().max(worst) <= cfg.tol {
            return Ok(x);
        }
        // Dykstra can crawl near degenerate vertices; its corrections
        // estimate the active set, so periodically try to finish the job
        // with an equality-constrained least squares and a KKT check
        if cycle + 1 >= next_polish {
            next_polish *= 2;
            if let Some(exact) = try_active_set_polish(a, b, p, &corrections) {
                return Ok(exact);
            }
            // thousands of nearly parallel rows (stacked training regions)
            // defeat both the cyclic sweep and the cheap polish; solve the
            // dual non-negative least squares problem exactly instead
            if cycle + 1 >= 256 {
                if let Some(exact) = nnls_projection(a, b, p) {
                    return Ok(exact);
                }
            }
        }
    }
    if let Some(exact) = nnls_projection(a, b, p) {
        return Ok(exact);
    }
    Err(x)
}

/// Exact projection via the dual: `min_{lambda >= 0} 1/2 |A' lambda - 0|^2
/// - lambda' (A p - b)` solved with Lawson-Hanson NNLS, then
/// `x = p - A' lambda`. The active set grows one row per outer step, so the
/// passive gram stays well-posed where the polish's bulk estimate does not.
/// Returns the point only when the KKT conditions certify it.
fn nnls_projection(a: &DenseMatrix, b: &[f64], p: &[f64]) -> Option<Vec<f64>> {
    let m = a.rows();
    let n = a.cols();
    let scale = 1.0 + b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let feas_tol = 1e-9 * scale;
    let mut passive: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new(); // aligned with `passive`
    let mut x = p.to_vec();

    let solve_passive = |passive: &[usize]| -> Option<Vec<f64>> {
        let s = passive.len();
        let mut asub = DenseMatrix::zeros(s, n);
        let mut resid = vec![0.0; s];
        for (r, &i) in passive.iter().enumerate() {
            for j in 0..n {
                asub.set(r, j, a.get(i, j));
            }
            resid[r] = dot(a.row(i), p) - b[i];
        }
        let mut gram = asub.matmul(&asub.transpose());
        match crate::densela::solve_linear_system(&gram, &resid) {
            Ok(z) => Some(z),
            Err(_) => {
                let diag_max = (0..s).fold(0.0_f64, |acc, i| acc.max(gram.get(i, i)));
                let eps = 1e-12 * (1.0 + diag_max);
                for i in 0..s {
                    gram.set(i, i, gram.get(i, i) + eps);
                }
                crate::densela::solve_linear_system(&gram, &resid).ok()
            }
        }
    };
    let rebuild_x = |passive: &[usize], lambda: &[f64]| -> Vec<f64> {
        let mut x = p.to_vec();
        for (&i, &l) in passive.iter().zip(lambda) {
            let row = a.row(i);
            for j in 0..n {
                x[j] -= l * row[j];
            }
        }
        x
    };

    for _outer in 0..(4 * n.max(8) + m.min(512)) {
        // most violated constraint outside the passive set
        let mut best = (feas_tol, None);
        for i in 0..m {
            if passive.contains(&i) {
                continue;
            }
            let w = dot(a.row(i), &x) - b[i];
            if w > best.0 {
                best = (w, Some(i));
            }
        }
        let enter = match best.1 {
            Some(i) => i,
            None => {
                // primal feasible, multipliers non-negative, passive rows
                // tight by the solve: KKT-certified
                let tight = passive
                    .iter()
                    .zip(&lambda)
                    .all(|(&i, &l)| l <= feas_tol || (dot(a.row(i), &x) - b[i]).abs() <= 1e-7 * scale);
                return if tight { Some(x) } else { None };
            }
        };
        passive.push(enter);
        lambda.push(0.0);

        // inner loop: re-solve on the passive set, interpolating back to
        // the last non-negative multiplier vector when the solve goes
        // negative, and dropping the rows that hit zero
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > passive.len() + 2 {
                return None;
            }
            let z = solve_passive(&passive)?;
            let zmax = z.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let ztol = 1e-12 * (1.0 + zmax);
            if z.iter().all(|v| *v > ztol) {
                lambda = z;
                break;
            }
            let mut alpha = 1.0_f64;
            for (j, &zj) in z.iter().enumerate() {
                if zj <= ztol {
                    let denom = lambda[j] - zj;
                    if denom > 0.0 {
                        alpha = alpha.min(lambda[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for (lj, &zj) in lambda.iter_mut().zip(&z) {
                *lj += alpha * (zj - *lj);
                *lj = lj.max(0.0);
            }
            let drop_tol = 1e-12 * (1.0 + lambda.iter().fold(0.0_f64, |acc, v| acc.max(*v)));
            let mut r = 0;
            let mut dropped = false;
            while r < passive.len() {
                if lambda[r] <= drop_tol {
                    passive.swap_remove(r);
                    lambda.swap_remove(r);
                    dropped = true;
                } else {
                    r += 1;
                }
            }
            if !dropped {
                // numerical stall: nothing left the passive set
                return None;
            }
            if passive.is_empty() {
                lambda.clear();
                break;
            }
        }
        x = rebuild_x(&passive, &lambda);
    }
    None
}

/// Candidate exact projection from the active set suggested by Dykstra's
/// correction multipliers. Returns the point only when the KKT conditions
/// certify it: multipliers non-negative, all constraints satisfied.
fn try_active_set_polish(
    a: &DenseMatrix,
    b: &[f64],
    p: &[f64],
    corrections: &[f64],
) -> Option<Vec<f64>> {
    let m = a.rows();
    let n = a.cols();
    // stacked training regions repeat rows verbatim (e.g. sign constraints
    // shared by every instance); duplicates add nothing to the candidate
    // system and inflate it past any sensible size bound
    let dedup = |idx: Vec<usize>, existing: &[usize]| -> Vec<usize> {
        let mut kept: Vec<usize> = Vec::with_capacity(idx.len());
        for &i in &idx {
            let duplicate = existing
                .iter()
                .chain(kept.iter())
                .any(|&j| b[j] == b[i] && a.row(j) == a.row(i));
            if !duplicate {
                kept.push(i);
            }
        }
        kept
    };
    let mut active: Vec<usize> =
        dedup((0..m).filter(|&i| corrections[i] > 0.0).collect(), &[]);
    if active.is_empty() {
        return None;
    }
    let scale = 1.0 + b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    // refine the estimate: drop rows with negative multipliers, add rows
    // the candidate still violates
    for _pass in 0..40 {
        if active.is_empty() {
            return None;
        }
        let s = active.len();
        let mut asub = DenseMatrix::zeros(s, n);
        let mut resid = vec![0.0; s];
        for (r, &i) in active.iter().enumerate() {
            for j in 0..n {
                asub.set(r, j, a.get(i, j));
            }
            resid[r] = dot(a.row(i), p) - b[i];
        }
        // x = p - A_S^T lambda with (A_S A_S^T) lambda = A_S p - b_S.
        // Near-duplicate rows (stacked training regions) make the gram
        // singular, so fall back to a tiny ridge term: it splits the
        // multiplier across the duplicates and costs one elimination,
        // unlike an SVD pseudo-inverse. The KKT check below still gates
        // acceptance, so the perturbation cannot produce a wrong answer.
        let mut gram = asub.matmul(&asub.transpose());
        let lambda = match crate::densela::solve_linear_system(&gram, &resid) {
            Ok(l) => l,
            Err(_) => {
                let diag_max = (0..s).fold(0.0_f64, |acc, i| acc.max(gram.get(i, i)));
                let eps = 1e-12 * (1.0 + diag_max);
                for i in 0..s {
                    gram.set(i, i, gram.get(i, i) + eps);
                }
                crate::densela::solve_linear_system(&gram, &resid).ok()?
            }
        };
        // a relative tolerance: an ill-conditioned gram leaves noise of
        // order |lambda|_max * eps in every multiplier, and treating that
        // noise as "negative" makes the drop/add loop oscillate
        let lam_max = lambda.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
        let lam_tol = 1e-9 * (1.0 + lam_max);
        if lambda.iter().any(|l| *l < -lam_tol) {
            active = active
                .iter()
                .zip(&lambda)
                .filter(|(_, l)| **l >= -lam_tol)
                .map(|(i, _)| *i)
                .collect();
            continue;
        }
        // clamp the within-tolerance negatives so the certificate below
        // checks a genuinely dual-feasible candidate
        let lambda: Vec<f64> = lambda.iter().map(|l| l.max(0.0)).collect();
        let corr = asub.matvec_t(&lambda);
        let x: Vec<f64> = p.iter().zip(&corr).map(|(u, v)| u - v).collect();
        // complementarity: rows carrying real multiplier weight must be
        // tight at the candidate, otherwise the solve was too inaccurate
        let slack_ok = active.iter().zip(&lambda).all(|(&i, &l)| {
            l <= lam_tol || (dot(a.row(i), &x) - b[i]).abs() <= 1e-7 * scale
        });
        if !slack_ok {
            return None;
        }
        let violated: Vec<usize> = dedup(
            (0..m)
                .filter(|&i| !active.contains(&i) && dot(a.row(i), &x) - b[i] > 1e-9 * scale)
                .collect(),
            &active,
        );
        if violated.is_empty() {
            return Some(x);
        }
        if active.len() + violated.len() > 2 * n + 16 {
            // runaway growth: give the cyclic iteration more time instead
            return None;
        }
        active.extend(violated);
        active.sort_unstable();
    }
    None
}

fn worst_violation(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    (0..a.rows())
        .map(|i| dot(a.row(i), x) - b[i])
        .fold(0.0_f64, f64::max)
}

/// Project every column of `p` independently.
pub fn project_columns(
    a: &DenseMatrix,
    b: &[f64],
    pm: &ProjectionMatrix,
    cfg: &ProjectionConfig,
) -> Result<ProjectionMatrix> {
    check_zero_rows(a, b)?;
    let mut out = pm.clone();
    for j in 0..pm.k {
        let col = pm.p.column(j);
        let projected = project_point_impl(a, b, &col, cfg)
            .map_err(|best| Error::ConvergenceFailure { column: j, best })?;
        out.p.set_column(j, &projected);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::norm2;
    use crate::project::MethodTag;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Active-set enumeration oracle: try every subset of constraints as
    /// equalities, solve the equality-constrained least-squares problem via
    /// the pseudo-inverse, keep the feasible minimizer.
    pub fn projection_oracle(a: &DenseMatrix, b: &[f64], p: &[f64]) -> Vec<f64> {
        let m = a.rows();
        let n = a.cols();
        assert!(m <= 12, "oracle is exponential in m");
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0..(1u32 << m) {
            let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let x = if idx.is_empty() {
                p.to_vec()
            } else {
                let mut asub = DenseMatrix::zeros(idx.len(), n);
                let mut resid = vec![0.0; idx.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for j in 0..n {
                        asub.set(r, j, a.get(i, j));
                    }
                    resid[r] = dot(a.row(i), p) - b[i];
                }
                // x = p - A_S^T (A_S A_S^T)^+ (A_S p - b_S)
                let gram = asub.matmul(&asub.transpose());
                let Ok(gram_pinv) = crate::densela::pseudo_inverse(&gram, 1e-10) else {
                    continue;
                };
                let mult = gram_pinv.matvec(&resid);
                let corr = asub.matvec_t(&mult);
                // reject if the equality system is inconsistent
                let check = asub.matvec(&corr);
                if check
                    .iter()
                    .zip(&resid)
                    .any(|(u, v)| (u - v).abs() > 1e-7 * v.abs().max(1.0))
                {
                    continue;
                }
                p.iter().zip(&corr).map(|(u, v)| u - v).collect()
            };
            let feasible = (0..m).all(|i| dot(a.row(i), &x) <= b[i] + 1e-8);
            if feasible {
                let dist: f64 = x.iter().zip(p).map(|(u, v)| (u - v) * (u - v)).sum();
                if best.as_ref().map_or(true, |(bd, _)| dist < *bd) {
                    best = Some((dist, x));
                }
            }
        }
        best.expect("non-empty polytope").1
    }

    fn random_polytope(rng: &mut impl Rng, m: usize, n: usize) -> (DenseMatrix, Vec<f64>) {
        // b >= 0 keeps the origin inside
        let mut a = DenseMatrix::zeros(m, n);
        let mut b = vec![0.0; m];
        for i in 0..m {
            for j in 0..n {
                a.set(i, j, rng.gen_range(-1.0..1.0));
            }
            b[i] = rng.gen_range(0.0..1.0);
        }
        (a, b)
    }

    #[test]
    fn single_halfspace_closed_form() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]);
        let x = project_point(&a, &[1.0], &[1.0, 1.0], &ProjectionConfig::default()).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-7 && (x[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn feasible_point_is_fixed() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let p = [0.25, -0.5];
        let x = project_point(&a, &[1.0, 1.0], &p, &ProjectionConfig::default()).unwrap();
        assert_eq!(x, p.to_vec());
    }

    #[test]
    fn box_with_diagonal_cut_matches_oracle() {
        // unit box plus x1 + x2 <= 1.2, project (1, 1)
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
            vec![1.0, 1.0],
        ]);
        let b = vec![1.0, 1.0, 0.0, 0.0, 1.2];
        let p = vec![1.0, 1.0];
        let x = project_point(&a, &b, &p, &ProjectionConfig::default()).unwrap();
        let oracle = projection_oracle(&a, &b, &p);
        let dist: f64 = x
            .iter()
            .zip(&oracle)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-5, "dykstra {:?} vs oracle {:?}", x, oracle);
    }

    #[test]
    fn matches_oracle_on_random_polytopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cfg = ProjectionConfig::default();
        for _ in 0..40 {
            let m = rng.gen_range(1..=5);
            let n = rng.gen_range(1..=3);
            let (a, b) = random_polytope(&mut rng, m, n);
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = project_point(&a, &b, &p, &cfg).unwrap();
            let oracle = projection_oracle(&a, &b, &p);
            let dist = norm2(
                &x.iter()
                    .zip(&oracle)
                    .map(|(u, v)| u - v)
                    .collect::<Vec<_>>(),
            );
            assert!(dist <= 1e-5, "distance to oracle {dist}");
        }
    }

    #[test]
    fn idempotent_and_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let cfg = ProjectionConfig::default();
        for _ in 0..20 {
            let (a, b) = random_polytope(&mut rng, 4, 3);
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x1 = project_point(&a, &b, &p, &cfg).unwrap();
            let x2 = project_point(&a, &b, &x1, &cfg).unwrap();
            let d = norm2(&x1.iter().zip(&x2).map(|(u, v)| u - v).collect::<Vec<_>>());
            assert!(d <= 2.0 * cfg.tol, "not idempotent: {d}");
            // q = 0 is feasible since b >= 0
            let proj_dist = norm2(&x1);
            let orig_dist = norm2(&p);
            assert!(proj_dist <= orig_dist + cfg.tol, "expansive");
        }
    }

    #[test]
    fn zero_row_with_nonneg_rhs_skipped() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        let x = project_point(&a, &[0.5, 1.0], &[2.0, 0.0], &ProjectionConfig::default()).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn column_independence() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0]]);
        let b = vec![1.0];
        let p = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![0.5, 2.0], vec![0.0, 0.3]]),
            MethodTag::Custom,
        );
        let out = project_columns(&a, &b, &p, &ProjectionConfig::default()).unwrap();
        // feasible column untouched, infeasible column clipped to the wall
        assert_eq!(out.p.column(0), vec![0.5, 0.0]);
        assert!((out.p.get(0, 1) - 1.0).abs() < 1e-7);
        assert!((out.p.get(1, 1) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn projected_columns_feasible_over_random_polytopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        let cfg = ProjectionConfig::default();
        for _ in 0..10 {
            let (a, b) = random_polytope(&mut rng, 5, 3);
            let mut pmat = DenseMatrix::zeros(3, 2);
            for j in 0..2 {
                let col: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                pmat.set_column(j, &col);
            }
            let pm = ProjectionMatrix::new(pmat, MethodTag::Custom);
            let out = project_columns(&a, &b, &pm, &cfg).unwrap();
            for j in 0..2 {
                let col = out.p.column(j);
                let worst = super::worst_violation(&a, &b, &col);
                assert!(worst <= cfg.tol, "column {j} violation {worst}");
            }
        }
    }
}
