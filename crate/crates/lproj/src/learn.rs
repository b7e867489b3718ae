//! Projection-matrix learners.
//!
//! Three constructors: PCA over training optima (mean column plus leading
//! right-singular vectors of the centered solution matrix), stochastic
//! gradient ascent on the projected optimal value, and the random
//! column-selection baseline. A final projection step pushes each column of
//! a learned matrix into the intersection of the training feasible regions.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpInstance, LpSolution, SolveStatus, SolverConfig};
use crate::polyproj::{project_columns, ProjectionConfig};
use crate::project::{evaluate_u, MethodTag, ProjectionMatrix};

/// Training instances with (optionally cached) optimal solutions.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub instances: Vec<LpInstance>,
    pub solutions: Option<Vec<Vec<f64>>>,
    /// All instances share the same constraint matrix, enabling the fast
    /// final-projection path with elementwise-min right-hand sides.
    pub identical_a: bool,
}

impl TrainingSet {
    pub fn new(instances: Vec<LpInstance>, identical_a: bool) -> Self {
        Self { instances, solutions: None, identical_a }
    }

    pub fn with_solutions(
        instances: Vec<LpInstance>,
        solutions: Vec<Vec<f64>>,
        identical_a: bool,
    ) -> Self {
        assert_eq!(instances.len(), solutions.len());
        Self { instances, solutions: Some(solutions), identical_a }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.instances.first().map_or(0, |i| i.num_vars())
    }

    /// Solve any missing training optima with the full solver and cache
    /// them. Instances that do not solve to optimality are an error: the
    /// pipeline premise is that training instances are bounded and feasible.
    pub fn ensure_solutions(&mut self, cfg: &SolverConfig) -> Result<()> {
        if self.solutions.is_some() {
            return Ok(());
        }
        let mut sols = Vec::with_capacity(self.instances.len());
        for inst in &self.instances {
            let sol = solve_lp(inst, cfg)?;
            if sol.status != SolveStatus::Optimal {
                return Err(Error::NumericalFailure(format!(
                    "training instance '{}' has status {:?}",
                    inst.id, sol.status
                )));
            }
            sols.push(sol.x.unwrap());
        }
        self.solutions = Some(sols);
        Ok(())
    }
}

/// PCA learner: column 1 is the mean optimum, columns 2..k are the leading
/// right-singular vectors of the centered solution matrix. Rank-deficient
/// data pads with zero columns so the prefix property survives.
pub fn learn_pca(ts: &TrainingSet, k: usize) -> Result<ProjectionMatrix> {
    let n = ts.num_vars();
    if k > n {
        return Err(Error::ShapeError(format!("k = {k} exceeds n = {n}")));
    }
    assert!(k >= 1);
    let sols = ts
        .solutions
        .as_ref()
        .expect("training solutions required; call ensure_solutions first");
    let count = sols.len() as f64;
    let mut mean = vec![0.0; n];
    for s in sols {
        for j in 0..n {
            mean[j] += s[j];
        }
    }
    for v in &mut mean {
        *v /= count;
    }

    let mut p = DenseMatrix::zeros(n, k);
    p.set_column(0, &mean);
    if k > 1 {
        let mut centered = DenseMatrix::zeros(sols.len(), n);
        for (i, s) in sols.iter().enumerate() {
            for j in 0..n {
                centered.set(i, j, s[j] - mean[j]);
            }
        }
        let svd = crate::densela::thin_svd(&centered)?;
        let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
        for col in 1..k {
            let idx = col - 1;
            if idx < svd.sigma.len() && svd.sigma[idx] > 1e-12 * sigma_max.max(1.0) {
                p.set_column(col, &svd.vt.row(idx).to_vec());
            }
            // else: zero column (centered data has lower rank)
        }
    }
    Ok(ProjectionMatrix::new(p, MethodTag::Pca))
}

/// Gradient of the projected optimal value with respect to `P`:
/// `c y*^T - A^T lambda* y*^T`.
pub fn grad_u(
    inst: &LpInstance,
    pm: &ProjectionMatrix,
    sol: &LpSolution,
) -> Result<DenseMatrix> {
    let y = sol.x.as_ref().ok_or(Error::MissingCertificate)?;
    let lambda = sol.lambda.as_ref().ok_or(Error::MissingCertificate)?;
    let n = inst.num_vars();
    let k = pm.k;
    assert_eq!(y.len(), k);
    let atl = inst.a.matvec_t(lambda);
    let mut g = DenseMatrix::zeros(n, k);
    for i in 0..n {
        let coef = inst.c[i] - atl[i];
        for j in 0..k {
            g.set(i, j, coef * y[j]);
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SgaInit {
    FromPca,
    RandomGaussian,
}

#[derive(Debug, Clone)]
pub struct SgaConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub init: SgaInit,
    pub seed: u64,
    pub projection_cfg: ProjectionConfig,
    pub solver_cfg: SolverConfig,
    /// Skip (rather than abort on) instances whose projected solve fails.
    pub skip_on_irregular: bool,
}

impl Default for SgaConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 1,
            init: SgaInit::FromPca,
            seed: 0,
            projection_cfg: ProjectionConfig::default(),
            solver_cfg: SolverConfig::default(),
            skip_on_irregular: true,
        }
    }
}

/// Stochastic gradient ascent on `u(P, pi)`, one pass per epoch in dataset
/// order. Before each gradient the columns of `P` are projected onto the
/// current instance's feasible region.
pub fn learn_sga(ts: &TrainingSet, k: usize, cfg: &SgaConfig) -> Result<ProjectionMatrix> {
    assert!(!ts.is_empty(), "training set must be non-empty");
    assert!(cfg.learning_rate > 0.0 && cfg.epochs >= 1);
    let n = ts.num_vars();
    let mut pm = match cfg.init {
        SgaInit::FromPca => {
            let base = learn_pca(ts, k)?;
            ProjectionMatrix::new(base.p, MethodTag::Sga)
        }
        SgaInit::RandomGaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let scale = 1.0 / (n as f64).sqrt();
            let mut p = DenseMatrix::zeros(n, k);
            for j in 0..k {
                let col: Vec<f64> = (0..n)
                    .map(|_| {
                        // Box-Muller; rand's StandardNormal lives in
                        // rand_distr, not worth the extra dependency here
                        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                        let u2: f64 = rng.gen_range(0.0..1.0);
                        scale
                            * (-2.0 * u1.ln()).sqrt()
                            * (2.0 * std::f64::consts::PI * u2).cos()
                    })
                    .collect();
                p.set_column(j, &col);
            }
            ProjectionMatrix::new(p, MethodTag::Sga)
        }
    };

    for _epoch in 0..cfg.epochs {
        for inst in &ts.instances {
            // an instance whose projection will not converge is as
            // irregular as one whose reduced solve fails: skip its update
            pm = match project_columns(&inst.a, &inst.b, &pm, &cfg.projection_cfg) {
                Ok(projected) => projected,
                Err(e) => {
                    if cfg.skip_on_irregular {
                        continue;
                    }
                    return Err(e);
                }
            };
            let sol = match evaluate_u(inst, &pm, &cfg.solver_cfg) {
                Ok(s) if s.status == SolveStatus::Optimal => s,
                Ok(s) => {
                    if cfg.skip_on_irregular {
                        continue;
                    }
                    return Err(Error::NumericalFailure(format!(
                        "projected solve on '{}' returned {:?}",
                        inst.id, s.status
                    )));
                }
                Err(e) => {
                    if cfg.skip_on_irregular {
                        continue;
                    }
                    return Err(e);
                }
            };
            // the gradient formula is only valid under the regularity
            // condition (at most k linearly independent active rows at the
            // projected optimum); degenerate vertices leave the dual
            // non-unique and the returned multipliers arbitrarily large
            if !reduced_solution_is_regular(inst, &pm, &sol) {
                if cfg.skip_on_irregular {
                    continue;
                }
                return Err(Error::NumericalFailure(format!(
                    "degenerate projected optimum on '{}'",
                    inst.id
                )));
            }
            let g = grad_u(inst, &pm, &sol)?;
            pm = ProjectionMatrix::new(
                pm.p.add(&g.scale(cfg.learning_rate)),
                MethodTag::Sga,
            );
        }
    }
    Ok(pm)
}

/// Regularity condition at the projected optimum: the active
/// rows of `A P y* <= b`, viewed in the reduced space, number at most `k`
/// and are linearly independent. Without it `u` is not differentiable and
/// the dual (hence the gradient) is not unique.
fn reduced_solution_is_regular(
    inst: &LpInstance,
    pm: &ProjectionMatrix,
    sol: &LpSolution,
) -> bool {
    let y = match &sol.x {
        Some(y) => y,
        None => return false,
    };
    let k = pm.k;
    let x = pm.p.matvec(y);
    let ax = inst.a.matvec(&x);
    let scale = 1.0 + crate::densela::inf_norm(&inst.b);
    let active: Vec<usize> = (0..inst.num_constraints())
        .filter(|&i| (ax[i] - inst.b[i]).abs() <= 1e-7 * scale)
        .collect();
    if active.len() > k {
        return false;
    }
    if active.is_empty() {
        return true;
    }
    // rows of (A P) restricted to the active set
    let mut reduced = DenseMatrix::zeros(active.len(), k);
    for (r, &i) in active.iter().enumerate() {
        for j in 0..k {
            let mut v = 0.0;
            for t in 0..pm.n() {
                v += inst.a.get(i, t) * pm.p.get(t, j);
            }
            reduced.set(r, j, v);
        }
    }
    match crate::densela::thin_svd(&reduced) {
        Ok(svd) => {
            let smax = svd.sigma.first().copied().unwrap_or(0.0);
            let smin = svd.sigma[..active.len().min(k)]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            smin > 1e-8 * smax.max(1e-12)
        }
        Err(_) => false,
    }
}

/// Project each column of `pm` onto the intersection of all training
/// feasible regions. With identical constraint matrices the stacked system
/// collapses to one matrix with elementwise-min right-hand sides.
pub fn final_projection(
    pm: &ProjectionMatrix,
    ts: &TrainingSet,
    cfg: &ProjectionConfig,
) -> Result<ProjectionMatrix> {
    assert!(!ts.is_empty());
    let (a, b) = stacked_constraints(ts);
    project_columns(&a, &b, pm, cfg)
}

/// The constraint system of the intersection of all training regions.
pub fn stacked_constraints(ts: &TrainingSet) -> (DenseMatrix, Vec<f64>) {
    if ts.identical_a {
        let a = ts.instances[0].a.clone();
        let mut b = ts.instances[0].b.clone();
        for inst in &ts.instances[1..] {
            for (bi, v) in b.iter_mut().zip(&inst.b) {
                *bi = bi.min(*v);
            }
        }
        (a, b)
    } else {
        let mut a = ts.instances[0].a.clone();
        let mut b = ts.instances[0].b.clone();
        for inst in &ts.instances[1..] {
            a = a.vstack(&inst.a);
            b.extend_from_slice(&inst.b);
        }
        (a, b)
    }
}

/// ColRand baseline: `k` distinct standard basis vectors drawn uniformly
/// without replacement.
pub fn learn_colrand(n: usize, k: usize, seed: u64) -> ProjectionMatrix {
    assert!(k < n, "colrand requires k < n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx.truncate(k);
    let mut p = DenseMatrix::zeros(n, k);
    for (j, &i) in idx.iter().enumerate() {
        p.set(i, j, 1.0);
    }
    ProjectionMatrix::new(p, MethodTag::Colrand)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::norm2;
    use crate::lp::check_feasible;
    use crate::project::objective_ratio;

    fn box_instance(id: &str, hi: f64, n: usize) -> LpInstance {
        // 0 <= x <= hi as inequality rows
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for j in 0..n {
            let mut r = vec![0.0; n];
            r[j] = 1.0;
            rows.push(r);
            b.push(hi);
            let mut r = vec![0.0; n];
            r[j] = -1.0;
            rows.push(r);
            b.push(0.0);
        }
        LpInstance::new(vec![1.0; n], DenseMatrix::from_rows(&rows), b, id)
    }

    #[test]
    fn pca_identical_solutions_collapse_to_mean() {
        let v = vec![1.0, 2.0, 3.0];
        let ts = TrainingSet::with_solutions(
            vec![box_instance("a", 5.0, 3), box_instance("b", 5.0, 3)],
            vec![v.clone(), v.clone()],
            true,
        );
        let pm = learn_pca(&ts, 3).unwrap();
        assert_eq!(pm.p.column(0), v);
        assert_eq!(pm.p.column(1), vec![0.0; 3]);
        assert_eq!(pm.p.column(2), vec![0.0; 3]);
    }

    #[test]
    fn pca_two_point_hand_svd() {
        // solutions (1,0) and (0,1): mean (0.5, 0.5), second column
        // proportional to (1,-1)/sqrt(2) with positive first entry
        let ts = TrainingSet::with_solutions(
            vec![box_instance("a", 2.0, 2), box_instance("b", 2.0, 2)],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            true,
        );
        let pm = learn_pca(&ts, 2).unwrap();
        assert_eq!(pm.p.column(0), vec![0.5, 0.5]);
        let col = pm.p.column(1);
        let s = 1.0 / 2.0_f64.sqrt();
        assert!((col[0] - s).abs() < 1e-10 && (col[1] + s).abs() < 1e-10);
    }

    #[test]
    fn pca_k_exceeding_n_rejected() {
        let ts = TrainingSet::with_solutions(
            vec![box_instance("a", 1.0, 2)],
            vec![vec![0.5, 0.5]],
            true,
        );
        assert!(matches!(learn_pca(&ts, 3), Err(Error::ShapeError(_))));
    }

    #[test]
    fn pca_prefix_property() {
        let sols = vec![
            vec![1.0, 0.2, 0.1, 0.6],
            vec![0.3, 1.1, 0.2, 0.1],
            vec![0.2, 0.4, 0.9, 0.3],
            vec![0.8, 0.1, 0.4, 0.2],
        ];
        let insts: Vec<LpInstance> = (0..4).map(|i| box_instance(&format!("i{i}"), 2.0, 4)).collect();
        let ts = TrainingSet::with_solutions(insts, sols, true);
        for k in 1..4 {
            let pk = learn_pca(&ts, k).unwrap();
            let pk1 = learn_pca(&ts, k + 1).unwrap();
            for j in 0..k {
                assert_eq!(pk.p.column(j), pk1.p.column(j), "k={k} column {j}");
            }
        }
    }

    /// Solutions drawn from a (k-1)-dimensional affine subspace: the PCA
    /// span contains every solution, so the projected optimum matches the
    /// full optimum on training instances.
    #[test]
    fn pca_subspace_exactness() {
        let (instances, sols) = crate::learn::testutil::subspace_dataset(17, 6, 8);
        let ts = TrainingSet::with_solutions(instances, sols, true);
        let k = 3;
        let pm = learn_pca(&ts, k).unwrap();
        let cfg = SolverConfig::default();
        for inst in &ts.instances {
            let u = evaluate_u(inst, &pm, &cfg).unwrap();
            assert_eq!(u.status, SolveStatus::Optimal);
            let full = solve_lp(inst, &cfg).unwrap();
            let r = objective_ratio(u.objective.unwrap(), full.objective.unwrap(), 1e-9)
                .expect("defined ratio");
            assert!((r - 1.0).abs() <= 1e-6, "ratio {r}");
        }
    }

    #[test]
    fn grad_matches_hand_computation() {
        // n=2, k=1, c=(1,0), x <= (1,1), P=(p1,p2), p2 > p1 > 0:
        // y* = 1/p2, active row 2, lambda = (0, 1/p2) from stationarity?
        // Direct check against the formula instead: the 1-d case first.
        let inst = LpInstance::new(
            vec![1.0],
            DenseMatrix::from_rows(&[vec![1.0]]),
            vec![1.0],
            "1d",
        );
        let pm = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![2.0]]),
            MethodTag::Custom,
        );
        let sol = evaluate_u(&inst, &pm, &SolverConfig::default()).unwrap();
        let g = grad_u(&inst, &pm, &sol).unwrap();
        assert!(g.get(0, 0).abs() < 1e-9, "stationary in 1d: {}", g.get(0, 0));
    }

    #[test]
    fn grad_matches_finite_differences_2d() {
        // central differences at (p1, p2) = (1, 2), step 1e-5
        let inst = LpInstance::new(
            vec![1.0, 0.0],
            DenseMatrix::identity(2),
            vec![1.0, 1.0],
            "2d",
        );
        let cfg = SolverConfig::default();
        let p = DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]);
        let pm = ProjectionMatrix::new(p.clone(), MethodTag::Custom);
        let sol = evaluate_u(&inst, &pm, &cfg).unwrap();
        let g = grad_u(&inst, &pm, &sol).unwrap();
        // hand values: gradient (1/p2, -p1/p2^2) = (0.5, -0.25)
        assert!((g.get(0, 0) - 0.5).abs() < 1e-9);
        assert!((g.get(1, 0) + 0.25).abs() < 1e-9);
        let h = 1e-5;
        for i in 0..2 {
            let mut lo = p.clone();
            let mut hi = p.clone();
            lo.set(i, 0, p.get(i, 0) - h);
            hi.set(i, 0, p.get(i, 0) + h);
            let ulo = evaluate_u(&inst, &ProjectionMatrix::new(lo, MethodTag::Custom), &cfg)
                .unwrap()
                .objective
                .unwrap();
            let uhi = evaluate_u(&inst, &ProjectionMatrix::new(hi, MethodTag::Custom), &cfg)
                .unwrap()
                .objective
                .unwrap();
            let fd = (uhi - ulo) / (2.0 * h);
            let rel = (g.get(i, 0) - fd).abs() / fd.abs().max(1.0);
            assert!(rel < 1e-4, "entry {i}: grad {} fd {}", g.get(i, 0), fd);
        }
    }

    #[test]
    fn sga_zero_objective_moves_only_by_projection() {
        let mut inst = box_instance("z", 1.0, 2);
        inst.c = vec![0.0, 0.0];
        let ts = TrainingSet::with_solutions(
            vec![inst],
            vec![vec![0.0, 0.0]],
            true,
        );
        let cfg = SgaConfig::default();
        let pm = learn_sga(&ts, 1, &cfg).unwrap();
        // PCA init is the zero mean column; projection and zero gradient
        // leave it untouched
        assert_eq!(pm.p.column(0), vec![0.0, 0.0]);
    }

    #[test]
    fn sga_single_step_trace() {
        // single instance, k=1, the 2-variable case above: one step of
        // rate 0.01 moves P by 0.01 * (1/p2, -p1/p2^2) after projection.
        let inst = LpInstance::new(
            vec![1.0, 0.0],
            DenseMatrix::identity(2),
            vec![1.0, 1.0],
            "2d",
        );
        // seed a training set whose "solution" puts the PCA mean at
        // (0.5, 0.9): feasible, so projection leaves it alone.
        let ts = TrainingSet::with_solutions(
            vec![inst.clone()],
            vec![vec![0.5, 0.9]],
            true,
        );
        let cfg = SgaConfig::default();
        let pm = learn_sga(&ts, 1, &cfg).unwrap();
        let (p1, p2) = (0.5, 0.9);
        let expected = [
            p1 + 0.01 * (1.0 / p2),
            p2 + 0.01 * (-p1 / (p2 * p2)),
        ];
        let got = pm.p.column(0);
        assert!(
            (got[0] - expected[0]).abs() < 1e-9 && (got[1] - expected[1]).abs() < 1e-9,
            "got {got:?}, expected {expected:?}"
        );
    }

    #[test]
    fn sga_deterministic() {
        let (instances, sols) = crate::learn::testutil::subspace_dataset(5, 4, 6);
        let ts = TrainingSet::with_solutions(instances, sols, true);
        let cfg = SgaConfig::default();
        let p1 = learn_sga(&ts, 2, &cfg).unwrap();
        let p2 = learn_sga(&ts, 2, &cfg).unwrap();
        assert_eq!(p1.p.data(), p2.p.data());
    }

    #[test]
    fn final_projection_identical_a_matches_stacked() {
        // same A, different b: the min-b path must agree with stacking
        let i1 = box_instance("a", 1.0, 3);
        let mut i2 = box_instance("b", 1.0, 3);
        for v in i2.b.iter_mut() {
            if *v > 0.0 {
                *v = 0.7;
            }
        }
        let ts_min = TrainingSet::with_solutions(
            vec![i1.clone(), i2.clone()],
            vec![vec![0.0; 3]; 2],
            true,
        );
        let mut ts_stack = ts_min.clone();
        ts_stack.identical_a = false;
        let p = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0], vec![-0.2, 0.1]]),
            MethodTag::Custom,
        );
        let cfg = ProjectionConfig::default();
        let a = final_projection(&p, &ts_min, &cfg).unwrap();
        let b = final_projection(&p, &ts_stack, &cfg).unwrap();
        for j in 0..2 {
            let d: Vec<f64> = a
                .p
                .column(j)
                .iter()
                .zip(&b.p.column(j))
                .map(|(u, v)| u - v)
                .collect();
            assert!(norm2(&d) <= 1e-5, "column {j} differs by {}", norm2(&d));
        }
        // every output column feasible for every instance
        for j in 0..2 {
            let col = a.p.column(j);
            for inst in &ts_min.instances {
                assert!(check_feasible(inst, &col, 1e-6));
            }
        }
    }

    #[test]
    fn final_projection_feasible_columns_unchanged() {
        let ts = TrainingSet::with_solutions(
            vec![box_instance("a", 1.0, 2)],
            vec![vec![0.0, 0.0]],
            true,
        );
        let p = ProjectionMatrix::new(
            DenseMatrix::from_rows(&[vec![0.5], vec![0.5]]),
            MethodTag::Custom,
        );
        let out = final_projection(&p, &ts, &ProjectionConfig::default()).unwrap();
        assert_eq!(out.p.column(0), vec![0.5, 0.5]);
    }

    #[test]
    fn colrand_deterministic_and_structured() {
        let p1 = learn_colrand(10, 3, 7);
        let p2 = learn_colrand(10, 3, 7);
        assert_eq!(p1.p.data(), p2.p.data());
        // columns are distinct standard basis vectors
        let mut seen = std::collections::HashSet::new();
        for j in 0..3 {
            let col = p1.p.column(j);
            let ones: Vec<usize> = col
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(ones.len(), 1);
            assert_eq!(col[ones[0]], 1.0);
            assert!(seen.insert(ones[0]), "duplicate index");
        }
        // recovered solutions live on the selected support
        let y = vec![1.0, -2.0, 0.5];
        let x = p1.p.matvec(&y);
        for (i, v) in x.iter().enumerate() {
            if *v != 0.0 {
                assert!(seen.contains(&i));
            }
        }
    }
}
