//! The core projection pipeline: build the reduced LP over `y` with
//! `x = P y`, evaluate its optimal value, and recover full-dimensional
//! solutions.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpInstance, LpSolution, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Pca,
    Sga,
    Colrand,
    Custom,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::Pca => "pca",
            MethodTag::Sga => "sga",
            MethodTag::Colrand => "colrand",
            MethodTag::Custom => "custom",
        }
    }
}

/// Dense `n x k` projection matrix with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    pub p: DenseMatrix,
    pub method_tag: MethodTag,
    pub k: usize,
}

impl ProjectionMatrix {
    pub fn new(p: DenseMatrix, method_tag: MethodTag) -> Self {
        let k = p.cols();
        Self { p, method_tag, k }
    }

    pub fn n(&self) -> usize {
        self.p.rows()
    }

    /// First `k` columns, preserving the tag.
    pub fn prefix(&self, k: usize) -> ProjectionMatrix {
        assert!(k <= self.k);
        let mut p = DenseMatrix::zeros(self.n(), k);
        for j in 0..k {
            p.set_column(j, &self.p.column(j));
        }
        ProjectionMatrix::new(p, self.method_tag)
    }
}

/// One evaluation of a method on a test instance.
#[derive(Debug, Clone)]
pub struct EvalRecord {
    pub u_value: f64,
    pub full_value: Option<f64>,
    pub ratio: Option<f64>,
    pub solve_time: Duration,
    pub feasible: bool,
}

/// The projected LP: objective `P^T c`, constraints `(A P) y <= b`.
pub fn build_projected(inst: &LpInstance, pm: &ProjectionMatrix) -> Result<LpInstance> {
    if pm.p.rows() != inst.num_vars() {
        return Err(Error::ShapeError(format!(
            "projection has {} rows, instance has {} variables",
            pm.p.rows(),
            inst.num_vars()
        )));
    }
    let c_proj = pm.p.matvec_t(&inst.c);
    let a_proj = inst.a.matmul(&pm.p);
    Ok(LpInstance::new(
        c_proj,
        a_proj,
        inst.b.clone(),
        format!("{}|{}k{}", inst.id, pm.method_tag.as_str(), pm.k),
    ))
}

/// Optimal value (and certificates) of the projected LP.
pub fn evaluate_u(
    inst: &LpInstance,
    pm: &ProjectionMatrix,
    cfg: &SolverConfig,
) -> Result<LpSolution> {
    let projected = build_projected(inst, pm)?;
    solve_lp(&projected, cfg)
}

/// Recover the n-dimensional point `P y`.
pub fn recover(inst: &LpInstance, pm: &ProjectionMatrix, y: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), pm.k);
    assert_eq!(pm.p.rows(), inst.num_vars());
    pm.p.matvec(y)
}

pub const DEFAULT_RATIO_GUARD: f64 = 1e-9;

/// `u / full`, with the guard rule: both near zero means ratio 1, a
/// near-zero or negative full optimum otherwise leaves the ratio undefined.
pub fn objective_ratio(u_value: f64, full_value: f64, guard: f64) -> Option<f64> {
    assert!(guard > 0.0);
    if full_value > guard {
        Some(u_value / full_value)
    } else if full_value.abs() <= guard && u_value.abs() <= guard {
        Some(1.0)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{brute_force_solve, check_feasible, SolveStatus};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn simple_instance() -> LpInstance {
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        LpInstance::new(vec![1.0, 0.0], a, vec![1.0, 1.0], "simple")
    }

    #[test]
    fn identity_projection_is_noop() {
        let inst = simple_instance();
        let pm = ProjectionMatrix::new(DenseMatrix::identity(2), MethodTag::Custom);
        let proj = build_projected(&inst, &pm).unwrap();
        assert_eq!(proj.c, inst.c);
        assert_eq!(proj.b, inst.b);
        assert_eq!(proj.a, inst.a);
    }

    #[test]
    fn hand_built_k1_projection() {
        // c = (1, 0), rows x1 <= 1, x2 <= 1, P = (1, 2)^T:
        // projected LP is max y s.t. y <= 1, 2y <= 1, optimum 1/2.
        let inst = simple_instance();
        let pm = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]),
            MethodTag::Custom,
        );
        let proj = build_projected(&inst, &pm).unwrap();
        assert_eq!(proj.c, vec![1.0]);
        assert_eq!(proj.b, vec![1.0, 1.0]);
        assert_eq!(proj.a.column(0), vec![1.0, 2.0]);
        let bf = brute_force_solve(&proj).unwrap();
        assert_eq!(bf.status, SolveStatus::Optimal);
        assert!((bf.objective.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let inst = simple_instance();
        let pm = ProjectionMatrix::new(DenseMatrix::zeros(3, 1), MethodTag::Custom);
        assert!(matches!(
            build_projected(&inst, &pm),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn one_dim_u_is_scale_invariant() {
        // c = 1, A = [1], b = [1]: u = 1 for any positive scalar P.
        let inst = LpInstance::new(
            vec![1.0],
            DenseMatrix::from_rows(&[vec![1.0]]),
            vec![1.0],
            "1d",
        );
        let cfg = SolverConfig::default();
        for p in [0.5, 1.0, 2.0] {
            let pm = ProjectionMatrix::new(
                DenseMatrix::from_rows(&[vec![p]]),
                MethodTag::Custom,
            );
            let sol = evaluate_u(&inst, &pm, &cfg).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.objective.unwrap() - 1.0).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn zero_projection_gives_zero_value() {
        let inst = simple_instance();
        let pm = ProjectionMatrix::new(DenseMatrix::zeros(2, 1), MethodTag::Custom);
        let sol = evaluate_u(&inst, &pm, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective.unwrap().abs() < 1e-12);
    }

    #[test]
    fn recover_basics() {
        let inst = simple_instance();
        let pm = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]),
            MethodTag::Custom,
        );
        assert_eq!(recover(&inst, &pm, &[0.0]), vec![0.0, 0.0]);
        assert_eq!(recover(&inst, &pm, &[3.0]), vec![3.0, 0.0]);
    }

    #[test]
    fn ratio_rules() {
        assert_eq!(objective_ratio(3.0, 3.0, DEFAULT_RATIO_GUARD), Some(1.0));
        assert_eq!(objective_ratio(1.5, 3.0, DEFAULT_RATIO_GUARD), Some(0.5));
        assert_eq!(objective_ratio(0.0, 0.0, DEFAULT_RATIO_GUARD), Some(1.0));
        assert_eq!(objective_ratio(1.0, 0.0, DEFAULT_RATIO_GUARD), None);
        assert_eq!(objective_ratio(1.0, -2.0, DEFAULT_RATIO_GUARD), None);
    }

    fn random_pm(rng: &mut impl Rng, n: usize, k: usize) -> ProjectionMatrix {
        let mut p = DenseMatrix::zeros(n, k);
        for j in 0..k {
            let col: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            p.set_column(j, &col);
        }
        ProjectionMatrix::new(p, MethodTag::Custom)
    }

    #[test]
    fn recovered_solution_is_feasible_and_ratio_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = SolverConfig::default();
        for _ in 0..30 {
            let n = rng.gen_range(2..=4);
            let m = rng.gen_range(2..=8);
            let inst = crate::lp::testutil::random_bounded_instance(&mut rng, n, m);
            let k = rng.gen_range(1..n);
            let pm = random_pm(&mut rng, n, k);
            let sol = evaluate_u(&inst, &pm, &cfg).unwrap();
            if sol.status != SolveStatus::Optimal {
                continue; // projected LP can be unbounded for random P
            }
            let x = recover(&inst, &pm, sol.x.as_ref().unwrap());
            assert!(check_feasible(&inst, &x, 1e-6));
            let full = solve_lp(&inst, &cfg).unwrap();
            let full_val = full.objective.unwrap();
            if let Some(r) =
                objective_ratio(sol.objective.unwrap(), full_val, DEFAULT_RATIO_GUARD)
            {
                assert!(r >= -1e-9 && r <= 1.0 + 1e-6, "ratio {r}");
            }
        }
    }

    #[test]
    fn right_invertible_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = SolverConfig::default();
        let mut checked = 0;
        while checked < 15 {
            let n = 4;
            let m = 6;
            let inst = crate::lp::testutil::random_bounded_instance(&mut rng, n, m);
            let k = 2;
            let pm = random_pm(&mut rng, n, k);
            // random invertible M (diagonally dominated)
            let mut mm = DenseMatrix::zeros(k, k);
            for i in 0..k {
                for j in 0..k {
                    mm.set(i, j, rng.gen_range(-1.0..1.0));
                }
                mm.set(i, i, mm.get(i, i) + 2.0);
            }
            let pm2 = ProjectionMatrix::new(pm.p.matmul(&mm), pm.method_tag);
            let s1 = evaluate_u(&inst, &pm, &cfg).unwrap();
            let s2 = evaluate_u(&inst, &pm2, &cfg).unwrap();
            assert_eq!(s1.status, s2.status);
            if s1.status == SolveStatus::Optimal {
                let (u1, u2) = (s1.objective.unwrap(), s2.objective.unwrap());
                assert!((u1 - u2).abs() <= 1e-6 * u1.abs().max(1.0), "{u1} vs {u2}");
                checked += 1;
            }
        }
    }

    #[test]
    fn monotone_in_column_appending() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let cfg = SolverConfig::default();
        let mut checked = 0;
        while checked < 15 {
            let inst = crate::lp::testutil::random_bounded_instance(&mut rng, 4, 8);
            let pm = random_pm(&mut rng, 4, 2);
            let mut p_ext = DenseMatrix::zeros(4, 3);
            p_ext.set_column(0, &pm.p.column(0));
            p_ext.set_column(1, &pm.p.column(1));
            let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            p_ext.set_column(2, &q);
            let pm_ext = ProjectionMatrix::new(p_ext, MethodTag::Custom);
            let s1 = evaluate_u(&inst, &pm, &cfg).unwrap();
            let s2 = evaluate_u(&inst, &pm_ext, &cfg).unwrap();
            if s1.status == SolveStatus::Optimal && s2.status == SolveStatus::Optimal {
                assert!(s2.objective.unwrap() >= s1.objective.unwrap() - 1e-6);
                checked += 1;
            }
        }
    }
}
