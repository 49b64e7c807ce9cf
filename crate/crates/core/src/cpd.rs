//! Non-rigid coherent point drift baseline (no outlier component).
//!
//! Moving points follow `T = Y + G W` with a Gaussian kernel `G`; each EM
//! iteration solves `(G + lambda sigma^2 diag(pbar)^-1) W = diag(pbar)^-1 P X - Y`
//! and then updates the variance with the same closed form as the main solver.

use nalgebra::DMatrix;

use crate::error::SolveError;
use crate::mesh::{sq_dist, Point, PointSet};
use crate::par;
use crate::probabilistic::{equivalent_probability, posterior, update_sigma};
use crate::solver::initial_sigma2;

#[derive(Debug, Clone, PartialEq)]
pub struct CpdParams {
    /// Gaussian kernel width in length units. `None` uses twice the RMS
    /// distance of the moving points from their centroid.
    pub kernel_width: Option<f64>,
    pub lambda_reg: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub sigma_floor: Option<f64>,
}

impl Default for CpdParams {
    fn default() -> Self {
        Self { kernel_width: None, lambda_reg: 2.0, max_iter: 200, tol: 1e-4, sigma_floor: None }
    }
}

impl CpdParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.kernel_width.is_none_or(|w| w > 0.0) && self.lambda_reg > 0.0 && self.tol > 0.0 && self.max_iter > 0) {
            return Err(SolveError::InvalidInput("CPD parameters must be positive".into()));
        }
        Ok(())
    }
}

/// `G(i, j) = exp(-|y_i - y_j|^2 / (2 width^2))`.
pub fn gaussian_kernel(points: &[Point], kernel_width: f64) -> DMatrix<f64> {
    let n = points.len();
    let s = 0.5 / (kernel_width * kernel_width);
    let rows = par::map_range(n, |i| {
        points.iter().map(|q| (-sq_dist(&points[i], q) * s).exp()).collect::<Vec<f64>>()
    });
    DMatrix::from_fn(n, n, |i, j| rows[i][j])
}

/// Twice the RMS distance from the centroid: the usual width of 2 in
/// coordinates normalized to unit RMS radius.
pub fn default_kernel_width(points: &PointSet) -> f64 {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in &points.points {
        for d in 0..3 {
            c[d] += p[d] / n;
        }
    }
    let ms = points.points.iter().map(|p| sq_dist(p, &c)).sum::<f64>() / n;
    let w = 2.0 * ms.sqrt();
    if w > 0.0 {
        w
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpdResult {
    /// Per-point displacement of the moving set (flat, point-major).
    pub displacement: Vec<f64>,
    pub sigma2_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn cpd_register(moving: &PointSet, target: &PointSet, params: &CpdParams) -> Result<CpdResult, SolveError> {
    params.validate()?;
    if moving.is_empty() || target.is_empty() {
        return Err(SolveError::InvalidInput("empty point set".into()));
    }
    if moving.dim != target.dim {
        return Err(SolveError::InvalidInput("dimension mismatch".into()));
    }
    let dim = moving.dim;
    let m = moving.len();
    let y = &moving.points;
    let g = gaussian_kernel(y, params.kernel_width.unwrap_or_else(|| default_kernel_width(moving)));
    let floor = params.sigma_floor.unwrap_or_else(|| 1e-12 * target.bbox_diagonal().powi(2).max(1e-300));
    let threshold = params.tol * moving.bbox_diagonal();
    let mut sigma2 = initial_sigma2(y, target).max(floor);
    let mut t: Vec<Point> = y.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let zeros = vec![0.0; m];
    // responsibility mass below this is treated as empty
    let tiny = 1e-12;

    for _ in 0..params.max_iter {
        let p = posterior(&t, target, sigma2, &zeros)?.resp;
        let pbar = equivalent_probability(&p);
        let px = par::map_range(m, |i| {
            let mut acc = [0.0; 3];
            for k in 0..target.len() {
                let w = p.get(i, k);
                for (a, slot) in acc.iter_mut().enumerate().take(dim) {
                    *slot += w * target.points[k][a];
                }
            }
            acc
        });
        let mut a = g.clone();
        let mut rhs = DMatrix::zeros(m, dim);
        for i in 0..m {
            let mass = pbar[i].max(tiny);
            a[(i, i)] += params.lambda_reg * sigma2 / mass;
            for d in 0..dim {
                rhs[(i, d)] = if pbar[i] > tiny { px[i][d] / pbar[i] - y[i][d] } else { t[i][d] - y[i][d] };
            }
        }
        let chol = a.cholesky().ok_or(SolveError::SingularDense)?;
        let w = chol.solve(&rhs);
        let gw = &g * &w;
        let t_new: Vec<Point> = (0..m)
            .map(|i| {
                let mut q = y[i];
                for d in 0..dim {
                    q[d] += gw[(i, d)];
                }
                q
            })
            .collect();
        sigma2 = update_sigma(&p, &t_new, target, dim, floor)?;
        history.push(sigma2);
        let inc = t_new.iter().zip(&t).map(|(a, b)| sq_dist(a, b)).sum::<f64>().sqrt();
        t = t_new;
        if inc <= threshold {
            converged = true;
            break;
        }
    }
    let displacement = t.iter().zip(y).flat_map(|(a, b)| (0..dim).map(move |d| a[d] - b[d])).collect();
    Ok(CpdResult { displacement, iterations: history.len(), sigma2_history: history, converged })
}
