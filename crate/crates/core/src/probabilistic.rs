//! Gaussian-mixture posterior with an elastic-energy prior on the centroids,
//! the nodal quantities derived from it, and the probabilistic potential.
//!
//! Mesh nodes act as mixture centroids and data points as samples. All
//! integrals over the data domain are sums over points; the prior's
//! normalization constant cancels in the posterior and is never formed.

use crate::elasticity::{b_matrix, energy_with_moduli, moduli_matrix, Material};
use crate::error::{MeshError, SolveError};
use crate::mesh::{sq_dist, Mesh, Point, PointSet};
use crate::par;

/// Posterior `P(m, k)` of centroid `m` given data point `k`, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n_centroids: usize,
    n_points: usize,
    values: Vec<f64>,
}

impl Responsibilities {
    /// Wraps a column-major matrix; columns must already be normalized.
    pub fn from_columns(n_centroids: usize, n_points: usize, values: Vec<f64>) -> Result<Self, SolveError> {
        if values.len() != n_centroids * n_points || n_centroids == 0 {
            return Err(SolveError::InvalidInput("responsibility shape mismatch".into()));
        }
        if values.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(SolveError::InvalidInput("responsibilities must be finite and >= 0".into()));
        }
        Ok(Self { n_centroids, n_points, values })
    }

    pub fn n_centroids(&self) -> usize {
        self.n_centroids
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.values[k * self.n_centroids + m]
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_centroids..(k + 1) * self.n_centroids]
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Posterior plus the per-point log normalizers `log sum_m w_m exp(-d^2 / 2 sigma^2)`.
pub(crate) struct Posterior {
    pub resp: Responsibilities,
    pub log_norms: Vec<f64>,
}

fn check_dims(dim: usize, data: &PointSet) -> Result<(), SolveError> {
    if data.dim != dim {
        return Err(SolveError::InvalidInput(format!(
            "dimension mismatch: centroids {dim}D, data {}D",
            data.dim
        )));
    }
    if data.is_empty() {
        return Err(SolveError::InvalidInput("empty data".into()));
    }
    Ok(())
}

pub(crate) fn posterior(
    centroids: &[Point],
    data: &PointSet,
    sigma2: f64,
    log_weights: &[f64],
) -> Result<Posterior, SolveError> {
    let m = centroids.len();
    if m == 0 || log_weights.len() != m {
        return Err(SolveError::InvalidInput("centroid/weight count mismatch".into()));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(SolveError::InvalidInput(format!("sigma2 must be positive, got {sigma2}")));
    }
    let inv = 0.5 / sigma2;
    let cols = par::map_range(data.len(), |k| {
        let x = &data.points[k];
        let mut col: Vec<f64> = centroids
            .iter()
            .zip(log_weights)
            .map(|(c, lw)| lw - sq_dist(c, x) * inv)
            .collect();
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in col.iter_mut() {
            *v /= sum;
        }
        (col, max + sum.ln())
    });
    let mut values = Vec::with_capacity(m * data.len());
    let mut log_norms = Vec::with_capacity(data.len());
    for (col, lse) in cols {
        values.extend_from_slice(&col);
        log_norms.push(lse);
    }
    Ok(Posterior { resp: Responsibilities { n_centroids: m, n_points: data.len(), values }, log_norms })
}

/// `P(m,k) = w_m exp(-|c_m - x_k|^2 / 2 sigma^2) / sum_m' (...)`, evaluated with
/// per-column max subtraction.
pub fn responsibilities(
    centroids: &[Point],
    data: &PointSet,
    sigma2: f64,
    energy_weights: &[f64],
) -> Result<Responsibilities, SolveError> {
    if energy_weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
        return Err(SolveError::InvalidInput("energy weights must lie in (0, 1]".into()));
    }
    let lw: Vec<f64> = energy_weights.iter().map(|w| w.ln()).collect();
    Ok(posterior(centroids, data, sigma2, &lw)?.resp)
}

/// Per-node strain energy density: measure-weighted mean of the adjacent elements' W.
pub fn nodal_energy_density(mesh: &Mesh, displacement: &[f64], material: &Material) -> Result<Vec<f64>, MeshError> {
    let dim = mesh.dim;
    if displacement.len() != mesh.n_dofs() {
        return Err(MeshError::FieldLength {
            name: "displacement".into(),
            expected: mesh.n_dofs(),
            found: displacement.len() / dim.max(1),
        });
    }
    let d = moduli_matrix(material);
    let per_element = par::map_range(mesh.elements.len(), |ei| -> Result<(f64, f64), MeshError> {
        let e = &mesh.elements[ei];
        let g = mesh.geometry(e)?;
        let b = b_matrix(&g);
        let ue: Vec<f64> = e
            .nodes
            .iter()
            .flat_map(|&n| displacement[n * dim..(n + 1) * dim].iter().copied())
            .collect();
        let strain = b * nalgebra::DVector::from_vec(ue);
        Ok((g.measure, energy_with_moduli(strain.as_slice(), &d)))
    });
    let mut num = vec![0.0; mesh.n_nodes()];
    let mut den = vec![0.0; mesh.n_nodes()];
    for (e, r) in mesh.elements.iter().zip(per_element) {
        let (meas, w) = r?;
        for &n in &e.nodes {
            num[n] += meas * w;
            den[n] += meas;
        }
    }
    let mut orphans = 0;
    let out = num
        .iter()
        .zip(&den)
        .map(|(&a, &b)| {
            if b > 0.0 {
                a / b
            } else {
                orphans += 1;
                0.0
            }
        })
        .collect();
    if orphans > 0 {
        log::warn!("{orphans} orphan nodes get zero strain energy");
    }
    Ok(out)
}

/// `w_m = exp(-beta W_m)`.
pub fn energy_weights(nodal_energy: &[f64], beta: f64) -> Vec<f64> {
    nodal_energy.iter().map(|w| (-beta * w).exp()).collect()
}

/// Row sums of the posterior: total responsibility mass per node.
pub fn equivalent_probability(p: &Responsibilities) -> Vec<f64> {
    par::map_range(p.n_centroids, |m| (0..p.n_points).map(|k| p.get(m, k)).sum())
}

/// `b_m = (1/sigma^2) sum_k P(m,k) (x_k - a_m)` as a flat node-major array.
/// Passing the reference positions as anchors gives the total form, the
/// current centroids the incremental form.
pub fn equivalent_body_force(
    p: &Responsibilities,
    anchors: &[Point],
    data: &PointSet,
    sigma2: f64,
) -> Result<Vec<f64>, SolveError> {
    check_dims(data.dim, data)?;
    if anchors.len() != p.n_centroids || data.len() != p.n_points {
        return Err(SolveError::InvalidInput("body force shape mismatch".into()));
    }
    let dim = data.dim;
    let rows = par::map_range(p.n_centroids, |m| {
        let mut acc = [0.0; 3];
        for k in 0..p.n_points {
            let w = p.get(m, k);
            for (a, slot) in acc.iter_mut().enumerate().take(dim) {
                *slot += w * (data.points[k][a] - anchors[m][a]);
            }
        }
        acc
    });
    Ok(rows.iter().flat_map(|r| r[..dim].iter().map(|v| v / sigma2)).collect())
}

/// Closed-form variance update `sum P |c - x|^2 / (D sum P)`, floored.
pub fn update_sigma(
    p: &Responsibilities,
    centroids: &[Point],
    data: &PointSet,
    dim: usize,
    sigma_floor: f64,
) -> Result<f64, SolveError> {
    if centroids.len() != p.n_centroids || data.len() != p.n_points {
        return Err(SolveError::InvalidInput("sigma update shape mismatch".into()));
    }
    let partial = par::map_range(p.n_points, |k| {
        let col = p.column(k);
        let x = &data.points[k];
        centroids.iter().zip(col).map(|(c, w)| w * sq_dist(c, x)).sum::<f64>()
    });
    let num: f64 = partial.iter().sum();
    let mass = p.total_mass();
    Ok((num / (dim as f64 * mass)).max(sigma_floor))
}

pub(crate) fn gaussian_term(log_norms: &[f64], sigma2: f64, dim: usize) -> f64 {
    let k = log_norms.len() as f64;
    k * 0.5 * dim as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() - log_norms.iter().sum::<f64>()
}

pub(crate) fn regularization_term(displacement: &[f64], volumes: &[f64], dim: usize, gamma: f64) -> f64 {
    0.5 * gamma
        * volumes
            .iter()
            .enumerate()
            .map(|(m, v)| v * displacement[m * dim..(m + 1) * dim].iter().map(|u| u * u).sum::<f64>())
            .sum::<f64>()
}

pub(crate) fn centroids(mesh: &Mesh, displacement: &[f64]) -> Vec<Point> {
    let dim = mesh.dim;
    mesh.coords
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let mut p = *c;
            for a in 0..dim {
                p[a] += displacement[m * dim + a];
            }
            p
        })
        .collect()
}

/// Probabilistic potential
/// `-sum_k log sum_m w_m N(x_k; X_m + u_m, sigma^2 I) + gamma sum_m V_m |u_m|^2 / 2`
/// with `w_m = exp(-beta W_m(u))` and lumped nodal volumes `V_m`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_potential(
    mesh: &Mesh,
    displacement: &[f64],
    data: &PointSet,
    sigma2: f64,
    material: &Material,
    beta: f64,
    gamma: f64,
) -> Result<f64, SolveError> {
    check_dims(mesh.dim, data)?;
    let w = nodal_energy_density(mesh, displacement, material)?;
    let lw: Vec<f64> = w.iter().map(|w| -beta * w).collect();
    let post = posterior(&centroids(mesh, displacement), data, sigma2, &lw)?;
    let volumes = mesh.lumped_volumes(material.integration_thickness())?;
    Ok(gaussian_term(&post.log_norms, sigma2, mesh.dim)
        + regularization_term(displacement, &volumes, mesh.dim, gamma))
}
