//! Assembled symmetric positive-definite systems and a Jacobi-preconditioned
//! conjugate gradient solver.

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::SolveError;
use crate::par;

/// Symmetric sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSpd {
    csr: CsrMatrix<f64>,
}

impl SparseSpd {
    /// Duplicate entries are summed in insertion order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SolveError> {
        let mut coo = CooMatrix::new(n, n);
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SolveError::InvalidInput(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            coo.push(i, j, v);
        }
        Ok(Self { csr: CsrMatrix::from(&coo) })
    }

    pub fn from_csr(csr: CsrMatrix<f64>) -> Self {
        assert_eq!(csr.nrows(), csr.ncols(), "system matrix must be square");
        Self { csr }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let n = a.nrows();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, &t).expect("indices in range")
    }

    pub fn dim(&self) -> usize {
        self.csr.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn csr(&self) -> &CsrMatrix<f64> {
        &self.csr
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get_entry(i, j).map(|e| e.into_value()).unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.csr.triplet_iter() {
            d[(i, j)] += *v;
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let offsets = self.csr.row_offsets();
        let cols = self.csr.col_indices();
        let vals = self.csr.values();
        par::map_range(self.dim(), |i| {
            (offsets[i]..offsets[i + 1]).map(|p| vals[p] * x[cols[p]]).sum()
        })
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.csr.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.csr
            .triplet_iter()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Convergence record of one conjugate gradient solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
    /// Smallest Ritz value of the preconditioned operator from the CG
    /// Lanczos coefficients; positive for an SPD system.
    pub min_ritz: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Solves `A x = rhs` to `|A x - rhs| <= rel_tol |rhs|`.
pub fn solve_spd(a: &SparseSpd, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>, SolveError> {
    solve_spd_with_report(a, rhs, rel_tol).map(|(x, _)| x)
}

pub fn solve_spd_with_report(
    a: &SparseSpd,
    rhs: &[f64],
    rel_tol: f64,
) -> Result<(Vec<f64>, CgReport), SolveError> {
    let n = a.dim();
    if rhs.len() != n {
        return Err(SolveError::InvalidInput(format!("rhs has {} entries, system is {n}", rhs.len())));
    }
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgReport { iterations: 0, relative_residual: 0.0, min_ritz: f64::NAN }));
    }
    let inv_diag = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { Ok(1.0 / d) } else { Err(SolveError::NotConverged { iterations: 0 }) })
        .collect::<Result<Vec<_>, _>>()?;
    let max_iter = 50 * n;
    let target = rel_tol * bnorm;

    let mut iterations = 0;
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    // outer loop restarts from the true residual if recurrence drift fools the test
    loop {
        let ax = a.matvec(&x);
        let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let rnorm = norm(&r);
        if rnorm <= target {
            let min_ritz = lanczos_min_ritz(&alphas, &betas);
            return Ok((x, CgReport { iterations, relative_residual: rnorm / bnorm, min_ritz }));
        }
        if iterations >= max_iter {
            return Err(SolveError::NotConverged { iterations });
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let first_pass = alphas.is_empty();
        while iterations < max_iter {
            let ap = a.matvec(&p);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(SolveError::NotConverged { iterations });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            if first_pass {
                alphas.push(alpha);
                betas.push(beta);
            }
            rz = rz_new;
            if norm(&r) <= 0.5 * target {
                break;
            }
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
}

/// Smallest eigenvalue of the Lanczos tridiagonal implied by CG's step sizes.
fn lanczos_min_ritz(alphas: &[f64], betas: &[f64]) -> f64 {
    let k = alphas.len();
    if k == 0 {
        return f64::NAN;
    }
    let mut t = DMatrix::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alphas[j] + if j > 0 { betas[j - 1] / alphas[j - 1] } else { 0.0 };
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    t.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
