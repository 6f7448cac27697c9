//! Dense complex LU with adjoint solves, a 1-norm condition estimate and restarted GMRES.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

type CMat = DMatrix<Complex64>;
type CVecN = DVector<Complex64>;

/// Condition estimates above this are reported as singular.
pub const SINGULAR_CONDITION: f64 = 1e14;

/// LU factorization PA = LU with partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: CMat,
    perm: Vec<usize>,
    norm1: f64,
}

pub fn norm1(a: &CMat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn vec_norm1(v: &CVecN) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

impl DenseLu {
    pub fn new(mut a: CMat) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::InvalidArgument("LU needs a square matrix".into()));
        }
        let norm1 = norm1(&a);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSystem { condition: f64::INFINITY });
            }
            if p != k {
                a.swap_rows(k, p);
                perm.swap(k, p);
            }
            let inv = Complex64::new(1.0, 0.0) / a[(k, k)];
            for i in k + 1..n {
                a[(i, k)] *= inv;
            }
            for j in k + 1..n {
                let akj = a[(k, j)];
                if akj == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    let l = a[(i, k)];
                    a[(i, j)] -= l * akj;
                }
            }
        }
        Ok(Self { lu: a, perm, norm1 })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &CVecN) -> CVecN {
        let n = self.dim();
        let mut x = CVecN::from_fn(n, |i, _| b[self.perm[i]]);
        for j in 0..n {
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        x
    }

    /// Solves Aᴴ x = b.
    pub fn solve_adjoint(&self, b: &CVecN) -> CVecN {
        let n = self.dim();
        let mut w = b.clone();
        // Uᴴ w = b (lower triangular).
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.lu[(k, i)].conj() * w[k];
            }
            w[i] = s / self.lu[(i, i)].conj();
        }
        // Lᴴ v = w (unit upper triangular).
        for i in (0..n).rev() {
            let mut s = w[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)].conj() * w[k];
            }
            w[i] = s;
        }
        let mut x = CVecN::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }

    /// κ₁(A) = ‖A‖₁‖A⁻¹‖₁ with ‖A⁻¹‖₁ from Hager's estimator.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let mut x = CVecN::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
        let mut est = 0.0;
        for iter in 0..5 {
            let y = self.solve(&x);
            let ny = vec_norm1(&y);
            if iter > 0 && ny <= est {
                break;
            }
            est = ny;
            let xi = y.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) });
            let z = self.solve_adjoint(&xi);
            let (j, zj) = z.iter().enumerate().fold((0, 0.0), |b, (i, v)| if v.norm() > b.1 { (i, v.norm()) } else { b });
            if iter > 0 && zj <= z.dotc(&x).re {
                break;
            }
            x = CVecN::zeros(n);
            x[j] = Complex64::new(1.0, 0.0);
        }
        // Alternating-sign probe guards against the estimator's known blind spots.
        let alt = CVecN::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            Complex64::new(s * (1.0 + i as f64 / (n as f64 - 1.0).max(1.0)), 0.0)
        });
        let alt_est = 2.0 * vec_norm1(&self.solve(&alt)) / (3.0 * n as f64);
        self.norm1 * est.max(alt_est)
    }
}

/// Solves A x = b densely, failing when the condition estimate exceeds [`SINGULAR_CONDITION`].
pub fn solve_dense(a: CMat, b: &CVecN) -> Result<(CVecN, f64)> {
    let lu = DenseLu::new(a)?;
    let condition = lu.condition_estimate();
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    Ok((lu.solve(b), condition))
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: CVecN,
    pub iterations: usize,
    /// Relative residual ‖b − Ax‖/‖b‖ after each inner step.
    pub history: Vec<f64>,
    /// σ_max/σ_min of the Hessenberg matrix of the longest Arnoldi cycle.
    pub condition_estimate: f64,
}

fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0));
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj());
    }
    let r = na.hypot(nb);
    let phase = a / na;
    (na / r, phase * b.conj() / r)
}

fn hessenberg_condition(h: &[Vec<Complex64>], m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let hm = CMat::from_fn(m + 1, m, |i, j| if i < h[j].len() { h[j][i] } else { Complex64::new(0.0, 0.0) });
    let sv = hm.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 { max / min } else { f64::INFINITY }
}

/// Restarted GMRES(m) with a zero initial guess.
pub fn gmres<F>(apply: F, b: &CVecN, restart: usize, tol: f64, max_iter: usize) -> Result<GmresOutcome>
where
    F: Fn(&CVecN) -> CVecN,
{
    let n = b.len();
    let bnorm = b.norm();
    let mut x = CVecN::zeros(n);
    let mut history = Vec::new();
    let mut condition_estimate = 1.0f64;
    if bnorm == 0.0 {
        return Ok(GmresOutcome { x, iterations: 0, history, condition_estimate });
    }
    let restart = restart.max(1).min(n.max(1));
    let mut iterations = 0;
    loop {
        let r = b - apply(&x);
        let beta = r.norm();
        if beta / bnorm <= tol {
            history.push(beta / bnorm);
            return Ok(GmresOutcome { x, iterations, history, condition_estimate });
        }
        let mut basis: Vec<CVecN> = vec![r / Complex64::new(beta, 0.0)];
        let mut h: Vec<Vec<Complex64>> = Vec::new();
        let mut rot: Vec<(f64, Complex64)> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        let mut raw: Vec<Vec<Complex64>> = Vec::new();
        let mut converged = false;
        for j in 0..restart {
            iterations += 1;
            let mut w = apply(&basis[j]);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = v.dotc(&w);
                w -= v * hij;
                col.push(hij);
            }
            let hnext = w.norm();
            col.push(Complex64::new(hnext, 0.0));
            raw.push(col.clone());
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = a * c + s * bb;
                col[i + 1] = -s.conj() * a + bb * c;
            }
            let (c, s) = givens(col[j], col[j + 1]);
            let (a, bb) = (col[j], col[j + 1]);
            col[j] = a * c + s * bb;
            col[j + 1] = Complex64::new(0.0, 0.0);
            rot.push((c, s));
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            h.push(col);
            let rel = g[j + 1].norm() / bnorm;
            history.push(rel);
            if rel <= tol || hnext <= 1e-14 * beta || iterations >= max_iter {
                converged = rel <= tol || hnext <= 1e-14 * beta;
                break;
            }
            basis.push(w / Complex64::new(hnext, 0.0));
        }
        condition_estimate = condition_estimate.max(hessenberg_condition(&raw, raw.len()));
        let m = h.len();
        let mut y = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for k in i + 1..m {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (v, yi) in basis.iter().zip(&y) {
            x += v * *yi;
        }
        if converged {
            let true_rel = (b - apply(&x)).norm() / bnorm;
            if true_rel <= tol * 10.0 {
                return Ok(GmresOutcome { x, iterations, history, condition_estimate });
            }
        }
        if iterations >= max_iter {
            let residual = (b - apply(&x)).norm() / bnorm;
            return Err(Error::NonConvergence { iterations, residual, history });
        }
    }
}
