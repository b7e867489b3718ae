//! Dense linear algebra: thin SVD via one-sided Jacobi, Moore-Penrose
//! pseudo-inverse, and direct linear solves.
//!
//! Everything here is dense `f64`. The instance sizes this crate targets
//! (hundreds of rows and columns) do not warrant sparse storage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count must be rows*cols");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, v: &[f64]) {
        assert_eq!(v.len(), self.rows);
        for i in 0..self.rows {
            self.set(i, j, v[i]);
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "vector length must match cols");
        let mut out = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            out[i] = dot(row, x);
        }
        out
    }

    /// A^T x without forming the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "vector length must match rows");
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for j in 0..self.cols {
                out[j] += xi * row[j];
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Vertical stack [self; other].
    pub fn vstack(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        DenseMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Thin SVD: `u` is m x r with orthonormal columns, `sigma` non-increasing,
/// `vt` is r x n with orthonormal rows, r = min(m, n).
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub vt: DenseMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 60;

/// Thin SVD by one-sided Jacobi rotations on the taller orientation.
///
/// Deterministic: the dominant entry of each right-singular vector is made
/// positive (ties broken by lowest index), so repeated calls agree bit for
/// bit and prefix columns are stable as more are requested downstream.
pub fn thin_svd(a: &DenseMatrix) -> Result<SvdResult> {
    assert!(a.rows().min(a.cols()) >= 1, "empty matrix");
    assert!(a.is_finite(), "matrix entries must be finite");
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        // A = (A^T)^T: compute on the transpose and swap factors.
        let r = svd_tall(&a.transpose())?;
        let mut out = SvdResult {
            u: r.vt.transpose(),
            sigma: r.sigma,
            vt: r.u.transpose(),
        };
        apply_sign_convention(&mut out);
        Ok(out)
    }
}

fn svd_tall(a: &DenseMatrix) -> Result<SvdResult> {
    let m = a.rows();
    let n = a.cols();
    // Work on columns of a copy; v accumulates the rotations.
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = w.frobenius_norm().max(1.0);
    let tol = 1e-14 * scale * scale;

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0_f64;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = 0.0;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                off = off.max(gamma.abs());
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt().max(1e-300) {
                    continue;
                }
                // Jacobi rotation zeroing the (p, q) inner product.
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w.get(i, p);
                    let wq = w.get(i, q);
                    w.set(i, p, c * wp - s * wq);
                    w.set(i, q, s * wp + c * wq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if off <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "jacobi svd did not converge in {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm2(&w.column(j))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = DenseMatrix::zeros(m, n);
    let mut vt = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let sigma_max = order.first().map(|&j| norms[j]).unwrap_or(0.0);
    let zero_tol = 1e-14 * sigma_max.max(1.0);
    let mut zero_cols = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        for i in 0..n {
            vt.set(k, i, v.get(i, j));
        }
        if s > zero_tol {
            let col = w.column(j);
            for i in 0..m {
                u.set(i, k, col[i] / s);
            }
        } else {
            zero_cols.push(k);
        }
    }
    // Null singular values: fill U with an orthonormal completion so the
    // orthonormality invariant holds even for rank-deficient input.
    for &k in &zero_cols {
        let col = orthonormal_completion(&u, m, k);
        u.set_column(k, &col);
    }

    let mut out = SvdResult { u, sigma, vt };
    apply_sign_convention(&mut out);
    Ok(out)
}

/// Gram-Schmidt a standard basis vector against the filled columns of `u`.
fn orthonormal_completion(u: &DenseMatrix, m: usize, skip_from: usize) -> Vec<f64> {
    for cand in 0..m {
        let mut x = vec![0.0; m];
        x[cand] = 1.0;
        for j in 0..u.cols() {
            if j == skip_from {
                continue;
            }
            let col = u.column(j);
            let nj = dot(&col, &col);
            if nj < 0.5 {
                continue; // unfilled column
            }
            let proj = dot(&x, &col);
            for i in 0..m {
                x[i] -= proj * col[i];
            }
        }
        let n = norm2(&x);
        if n > 1e-6 {
            return x.iter().map(|v| v / n).collect();
        }
    }
    unreachable!("cannot complete orthonormal basis");
}

fn apply_sign_convention(svd: &mut SvdResult) {
    let r = svd.sigma.len();
    let n = svd.vt.cols();
    for k in 0..r {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..n {
            let a = svd.vt.get(k, i).abs();
            if a > best_abs + 1e-300 && a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if svd.vt.get(k, best) < 0.0 {
            for i in 0..n {
                svd.vt.set(k, i, -svd.vt.get(k, i));
            }
            for i in 0..svd.u.rows() {
                svd.u.set(i, k, -svd.u.get(i, k));
            }
        }
    }
}

/// Moore-Penrose pseudo-inverse. Singular values at or below
/// `rank_tol * sigma_max` are treated as zero.
pub fn pseudo_inverse(a: &DenseMatrix, rank_tol: f64) -> Result<DenseMatrix> {
    assert!(rank_tol > 0.0, "rank_tol must be positive");
    let svd = thin_svd(a)?;
    let sigma_max = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = rank_tol * sigma_max;
    // A+ = V S+ U^T
    let r = svd.sigma.len();
    let mut vs = svd.vt.transpose(); // n x r
    for k in 0..r {
        let inv = if svd.sigma[k] > cutoff {
            1.0 / svd.sigma[k]
        } else {
            0.0
        };
        for i in 0..vs.rows() {
            vs.set(i, k, vs.get(i, k) * inv);
        }
    }
    Ok(vs.matmul(&svd.u.transpose()))
}

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Solve a square system by Gaussian elimination with partial pivoting.
pub fn solve_linear_system(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "matrix must be square");
    assert_eq!(b.len(), n, "rhs length must match");
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = m.frobenius_norm().max(1.0);
    for col in 0..n {
        let mut piv = col;
        let mut piv_abs = m.get(col, col).abs();
        for i in (col + 1)..n {
            let v = m.get(i, col).abs();
            if v > piv_abs {
                piv = i;
                piv_abs = v;
            }
        }
        if piv_abs <= 1e-13 * scale {
            return Err(Error::SingularMatrix);
        }
        if piv != col {
            for j in 0..n {
                let t = m.get(col, j);
                m.set(col, j, m.get(piv, j));
                m.set(piv, j, t);
            }
            x.swap(col, piv);
        }
        let d = m.get(col, col);
        for i in (col + 1)..n {
            let f = m.get(i, col) / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m.set(i, j, m.get(i, j) - f * m.get(col, j));
            }
            x[i] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in (col + 1)..n {
            s -= m.get(col, j) * x[j];
        }
        x[col] = s / m.get(col, col);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    fn reconstruct(svd: &SvdResult) -> DenseMatrix {
        let r = svd.sigma.len();
        let mut us = svd.u.clone();
        for k in 0..r {
            for i in 0..us.rows() {
                us.set(i, k, us.get(i, k) * svd.sigma[k]);
            }
        }
        us.matmul(&svd.vt)
    }

    /// Eigenvalues of a symmetric 3x3 matrix via the trigonometric solution
    /// of the characteristic cubic. Independent of the Jacobi path.
    fn sym3_eigenvalues(m: &DenseMatrix) -> [f64; 3] {
        assert_eq!((m.rows(), m.cols()), (3, 3));
        let p1 = m.get(0, 1).powi(2) + m.get(0, 2).powi(2) + m.get(1, 2).powi(2);
        let q = (m.get(0, 0) + m.get(1, 1) + m.get(2, 2)) / 3.0;
        let p2 = (m.get(0, 0) - q).powi(2)
            + (m.get(1, 1) - q).powi(2)
            + (m.get(2, 2) - q).powi(2)
            + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        if p < 1e-300 {
            return [q, q, q];
        }
        // B = (M - qI) / p; det(B) / 2 drives the phase.
        let b = |i: usize, j: usize| (m.get(i, j) - if i == j { q } else { 0.0 }) / p;
        let detb = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1))
            - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
            + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
        let r = (detb / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e1 = q + 2.0 * p * phi.cos();
        let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e2 = 3.0 * q - e1 - e3;
        [e1, e2, e3]
    }

    #[test]
    fn svd_identity() {
        let svd = thin_svd(&DenseMatrix::identity(3)).unwrap();
        for s in &svd.sigma {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_diagonal() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 0.0]]);
        let svd = thin_svd(&a).unwrap();
        assert!((svd.sigma[0] - 3.0).abs() < 1e-12);
        assert!(svd.sigma[1].abs() < 1e-12);
    }

    #[test]
    fn svd_matches_gram_eigenvalue_oracle_5x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 5, 3);
            let gram = a.transpose().matmul(&a);
            let mut eig = sym3_eigenvalues(&gram);
            eig.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let svd = thin_svd(&a).unwrap();
            for k in 0..3 {
                let expected = eig[k].max(0.0).sqrt();
                assert!(
                    (svd.sigma[k] - expected).abs() < 1e-8,
                    "sigma {} vs oracle {}",
                    svd.sigma[k],
                    expected
                );
            }
        }
    }

    #[test]
    fn svd_reconstruction_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, n) in &[(4, 4), (6, 3), (3, 6), (5, 2), (1, 4)] {
            let a = random_matrix(&mut rng, m, n);
            let svd = thin_svd(&a).unwrap();
            let rec = reconstruct(&svd);
            let err = rec.sub(&a).frobenius_norm();
            assert!(err <= 1e-9 * a.frobenius_norm().max(1.0), "recon err {err}");
            let utu = svd.u.transpose().matmul(&svd.u);
            let r = svd.sigma.len();
            assert!(utu.sub(&DenseMatrix::identity(r)).frobenius_norm() <= 1e-8);
            let vvt = svd.vt.matmul(&svd.vt.transpose());
            assert!(vvt.sub(&DenseMatrix::identity(r)).frobenius_norm() <= 1e-8);
            for k in 1..r {
                assert!(svd.sigma[k] <= svd.sigma[k - 1] + 1e-15);
            }
        }
    }

    #[test]
    fn svd_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 6, 4);
        let s1 = thin_svd(&a).unwrap();
        let s2 = thin_svd(&a).unwrap();
        assert_eq!(s1.u.data(), s2.u.data());
        assert_eq!(s1.sigma, s2.sigma);
        assert_eq!(s1.vt.data(), s2.vt.data());
    }

    #[test]
    fn pinv_identity() {
        let p = pseudo_inverse(&DenseMatrix::identity(3), DEFAULT_RANK_TOL).unwrap();
        assert!(p.sub(&DenseMatrix::identity(3)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn pinv_row_vector() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]);
        let p = pseudo_inverse(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((p.rows(), p.cols()), (2, 1));
        assert!((p.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((p.get(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pinv_zero_matrix() {
        let a = DenseMatrix::zeros(2, 3);
        let p = pseudo_inverse(&a, DEFAULT_RANK_TOL).unwrap();
        assert_eq!((p.rows(), p.cols()), (3, 2));
        assert!(p.frobenius_norm() == 0.0);
    }

    fn check_moore_penrose(a: &DenseMatrix) {
        let p = pseudo_inverse(a, DEFAULT_RANK_TOL).unwrap();
        let scale = a.frobenius_norm().max(1.0);
        let apa = a.matmul(&p).matmul(a);
        assert!(apa.sub(a).frobenius_norm() <= 1e-8 * scale);
        let pap = p.matmul(a).matmul(&p);
        assert!(pap.sub(&p).frobenius_norm() <= 1e-8 * p.frobenius_norm().max(1.0));
        let ap = a.matmul(&p);
        assert!(ap.sub(&ap.transpose()).frobenius_norm() <= 1e-8 * scale);
        let pa = p.matmul(a);
        assert!(pa.sub(&pa.transpose()).frobenius_norm() <= 1e-8 * scale);
    }

    #[test]
    fn pinv_satisfies_moore_penrose_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            check_moore_penrose(&random_matrix(&mut rng, 4, 3));
            check_moore_penrose(&random_matrix(&mut rng, 3, 5));
            // rank-deficient: outer product plus duplicate rows
            let u = random_matrix(&mut rng, 4, 1);
            let v = random_matrix(&mut rng, 1, 3);
            check_moore_penrose(&u.matmul(&v));
        }
    }

    #[test]
    fn linear_solve_basic() {
        let x = solve_linear_system(&DenseMatrix::identity(2), &[2.0, 3.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
        let a = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let x = solve_linear_system(&a, &[2.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_solve_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            // diagonally dominant, hence well-conditioned
            let mut a = random_matrix(&mut rng, 4, 4);
            for i in 0..4 {
                a.set(i, i, a.get(i, i) + 5.0);
            }
            let b: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_linear_system(&a, &b).unwrap();
            let r = a.matvec(&x);
            let res: Vec<f64> = r.iter().zip(&b).map(|(u, v)| u - v).collect();
            assert!(inf_norm(&res) <= 1e-9 * inf_norm(&b).max(1.0));
        }
    }

    #[test]
    fn linear_solve_singular() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            solve_linear_system(&a, &[1.0, 2.0]),
            Err(Error::SingularMatrix)
        ));
    }
}
