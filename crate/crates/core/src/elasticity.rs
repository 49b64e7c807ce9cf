//! Isotropic linear elasticity: moduli, strain-displacement matrices and the
//! constant-strain element kernels.

use nalgebra::{DMatrix, DVector};

use crate::error::MeshError;
use crate::mesh::{simplex_monomial_integral, ElementGeometry, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalysisMode {
    PlaneStress,
    PlaneStrain,
    Solid3d,
}

impl AnalysisMode {
    pub fn dim(self) -> usize {
        match self {
            AnalysisMode::PlaneStress | AnalysisMode::PlaneStrain => 2,
            AnalysisMode::Solid3d => 3,
        }
    }

    pub fn default_for(dim: usize) -> Self {
        if dim == 3 {
            AnalysisMode::Solid3d
        } else {
            AnalysisMode::PlaneStress
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub mode: AnalysisMode,
    /// Out-of-plane thickness for 2D modes; ignored in 3D.
    pub thickness: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64, mode: AnalysisMode) -> Result<Self, MeshError> {
        // lambda = 0 is admitted (Poisson ratio zero); mu must be positive
        if !(lambda.is_finite() && mu.is_finite() && lambda >= 0.0 && mu > 0.0) {
            return Err(MeshError::Invalid(format!("invalid Lame constants lambda={lambda}, mu={mu}")));
        }
        Ok(Self { lambda, mu, mode, thickness: 1.0 })
    }

    pub fn with_thickness(mut self, thickness: f64) -> Result<Self, MeshError> {
        if !(thickness.is_finite() && thickness > 0.0) {
            return Err(MeshError::Invalid(format!("invalid thickness {thickness}")));
        }
        self.thickness = thickness;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mode.dim()
    }

    /// Thickness entering volume integrals (1 in 3D).
    pub fn integration_thickness(&self) -> f64 {
        if self.dim() == 2 {
            self.thickness
        } else {
            1.0
        }
    }

    pub fn strain_len(&self) -> usize {
        voigt_len(self.dim())
    }
}

pub fn voigt_len(dim: usize) -> usize {
    if dim == 2 {
        3
    } else {
        6
    }
}

/// Voigt moduli matrix with engineering shear strains.
/// Order: (xx, yy, xy) in 2D; (xx, yy, zz, yz, xz, xy) in 3D.
pub fn moduli_matrix(material: &Material) -> DMatrix<f64> {
    let mu = material.mu;
    match material.mode {
        AnalysisMode::Solid3d => {
            let l = material.lambda;
            let mut d = DMatrix::zeros(6, 6);
            for i in 0..3 {
                for j in 0..3 {
                    d[(i, j)] = l;
                }
                d[(i, i)] = l + 2.0 * mu;
                d[(i + 3, i + 3)] = mu;
            }
            d
        }
        mode => {
            let l = if mode == AnalysisMode::PlaneStress {
                2.0 * material.lambda * mu / (material.lambda + 2.0 * mu)
            } else {
                material.lambda
            };
            DMatrix::from_row_slice(3, 3, &[l + 2.0 * mu, l, 0.0, l, l + 2.0 * mu, 0.0, 0.0, 0.0, mu])
        }
    }
}

pub fn stress(strain: &[f64], material: &Material) -> Result<Vec<f64>, MeshError> {
    if strain.len() != material.strain_len() {
        return Err(MeshError::Invalid(format!(
            "strain has {} components, mode needs {}",
            strain.len(),
            material.strain_len()
        )));
    }
    let s = moduli_matrix(material) * DVector::from_column_slice(strain);
    Ok(s.as_slice().to_vec())
}

/// `W = 1/2 eps^T D eps`.
pub fn strain_energy_density(strain: &[f64], material: &Material) -> f64 {
    energy_with_moduli(strain, &moduli_matrix(material))
}

pub(crate) fn energy_with_moduli(strain: &[f64], d: &DMatrix<f64>) -> f64 {
    assert_eq!(strain.len(), d.nrows(), "strain length does not match moduli");
    let e = DVector::from_column_slice(strain);
    0.5 * e.dot(&(d * &e))
}

/// Constant B matrix of a linear simplex, `D x (D+1)` nodes times D dofs.
pub fn strain_displacement(coords: &[Point]) -> Result<DMatrix<f64>, MeshError> {
    Ok(b_matrix(&ElementGeometry::new(coords)?))
}

pub(crate) fn b_matrix(g: &ElementGeometry) -> DMatrix<f64> {
    let d = g.kind.dim();
    let n = g.n_nodes();
    let gr = &g.grads;
    let mut b = DMatrix::zeros(voigt_len(d), d * n);
    for i in 0..n {
        let (dx, dy) = (gr[(i, 0)], gr[(i, 1)]);
        if d == 2 {
            let c = 2 * i;
            b[(0, c)] = dx;
            b[(1, c + 1)] = dy;
            b[(2, c)] = dy;
            b[(2, c + 1)] = dx;
        } else {
            let dz = gr[(i, 2)];
            let c = 3 * i;
            b[(0, c)] = dx;
            b[(1, c + 1)] = dy;
            b[(2, c + 2)] = dz;
            b[(3, c + 1)] = dz;
            b[(3, c + 2)] = dy;
            b[(4, c)] = dz;
            b[(4, c + 2)] = dx;
            b[(5, c)] = dy;
            b[(5, c + 1)] = dx;
        }
    }
    b
}

/// `weight * thickness * measure * B^T D B`; exact since the integrand is constant.
pub fn element_stiffness(
    coords: &[Point],
    moduli: &DMatrix<f64>,
    weight: f64,
    thickness: f64,
) -> Result<DMatrix<f64>, MeshError> {
    Ok(stiffness_from_geometry(&ElementGeometry::new(coords)?, moduli, weight, thickness))
}

pub(crate) fn stiffness_from_geometry(
    g: &ElementGeometry,
    moduli: &DMatrix<f64>,
    weight: f64,
    thickness: f64,
) -> DMatrix<f64> {
    let b = b_matrix(g);
    let mut k = b.transpose() * moduli * &b;
    k *= weight * thickness * g.measure;
    // symmetrize away rounding
    let kt = k.transpose();
    (k + kt) * 0.5
}

#[derive(Debug, Clone, Copy)]
pub enum MassWeight<'a> {
    Unit,
    /// Nodal values of a nonnegative weight, interpolated linearly.
    Field(&'a [f64]),
}

/// Row-sum lumped mass of `int w N^T N`, one entry per node (the same for
/// every displacement component).
pub fn element_mass(coords: &[Point], weight: MassWeight, thickness: f64) -> Result<Vec<f64>, MeshError> {
    let g = ElementGeometry::new(coords)?;
    let n = g.n_nodes();
    let d = g.kind.dim();
    match weight {
        MassWeight::Unit => Ok(vec![g.measure * thickness / n as f64; n]),
        MassWeight::Field(p) => {
            if p.len() != n {
                return Err(MeshError::Invalid(format!("weight field needs {n} nodal values")));
            }
            if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(MeshError::Invalid("negative mass weight".into()));
            }
            // sum_j int (sum_k p_k N_k) N_i N_j = int (sum_k p_k N_k) N_i
            let lumped = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|k| {
                            let powers: Vec<u32> = if i == k { vec![2] } else { vec![1, 1] };
                            p[k] * simplex_monomial_integral(d, g.measure, &powers)
                        })
                        .sum::<f64>()
                        * thickness
                })
                .collect();
            Ok(lumped)
        }
    }
}
