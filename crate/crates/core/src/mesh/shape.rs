//! Linear simplex shape functions and the isoparametric map.

use nalgebra::DMatrix;

use super::{ElementKind, Point};
use crate::error::MeshError;

const REFERENCE_TOL: f64 = 1e-12;

/// Shape function values and their derivatives with respect to the local
/// coordinates. Row `i` of the derivative matrix belongs to node `i`.
pub fn shape_functions(kind: ElementKind, local: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>), MeshError> {
    let d = kind.dim();
    if local.len() != d {
        return Err(MeshError::Invalid(format!(
            "expected {d} local coordinates, got {}",
            local.len()
        )));
    }
    let sum: f64 = local.iter().sum();
    if local.iter().any(|&c| c < -REFERENCE_TOL || !c.is_finite()) || sum > 1.0 + REFERENCE_TOL {
        return Err(MeshError::OutsideReference(local.to_vec()));
    }
    let mut n = Vec::with_capacity(d + 1);
    n.push(1.0 - sum);
    n.extend_from_slice(local);
    Ok((n, reference_gradients(kind)))
}

/// Constant derivative matrix `dN/dxi` for the reference simplex
/// with vertices at the origin and the unit axis points.
pub fn reference_gradients(kind: ElementKind) -> DMatrix<f64> {
    let d = kind.dim();
    DMatrix::from_fn(d + 1, d, |i, j| {
        if i == 0 {
            -1.0
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    })
}

/// Jacobian of the map from the reference simplex, its determinant and the
/// element measure (area or volume).
pub fn element_jacobian(coords: &[Point]) -> Result<(DMatrix<f64>, f64, f64), MeshError> {
    let g = ElementGeometry::new(coords)?;
    Ok((g.jacobian, g.det, g.measure))
}

/// Everything the element kernels need from an element's geometry.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub kind: ElementKind,
    pub jacobian: DMatrix<f64>,
    pub det: f64,
    pub measure: f64,
    /// Physical gradients `dN_i/dX`, one row per node.
    pub grads: DMatrix<f64>,
}

impl ElementGeometry {
    pub fn new(coords: &[Point]) -> Result<Self, MeshError> {
        let kind = match coords.len() {
            3 => ElementKind::Tri3,
            4 => ElementKind::Tet4,
            n => return Err(MeshError::Invalid(format!("linear simplex needs 3 or 4 nodes, got {n}"))),
        };
        let d = kind.dim();
        let dn = reference_gradients(kind);
        let jacobian: DMatrix<f64> = DMatrix::from_fn(d, d, |a, b| {
            (0..=d).map(|i| coords[i][a] * dn[(i, b)]).sum()
        });
        let det = jacobian.determinant();
        let diag = super::bbox_diagonal(coords).unwrap_or(0.0);
        if !det.is_finite() || det.abs() < 1e-14 * diag.powi(d as i32) || det == 0.0 {
            return Err(MeshError::DegenerateElement { det });
        }
        let measure = det.abs() / if d == 2 { 2.0 } else { 6.0 };
        // dN/dX = dN/dxi * J^{-1}
        let inv = jacobian
            .clone()
            .try_inverse()
            .ok_or(MeshError::DegenerateElement { det })?;
        let grads = dn * inv;
        Ok(Self { kind, jacobian, det, measure, grads })
    }

    pub fn n_nodes(&self) -> usize {
        self.kind.n_nodes()
    }
}

/// Exact integral of a product of barycentric powers over a simplex:
/// `int prod N_i^{a_i} = D! * measure * prod(a_i!) / (D + sum a_i)!`.
pub fn simplex_monomial_integral(dim: usize, measure: f64, powers: &[u32]) -> f64 {
    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }
    let total: u32 = powers.iter().sum();
    let num: f64 = powers.iter().map(|&a| fact(a)).product();
    fact(dim as u32) * measure * num / fact(dim as u32 + total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tri_centroid_partition() {
        let (n, _) = shape_functions(ElementKind::Tri3, &[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        for v in &n {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn tet_first_vertex() {
        let (n, _) = shape_functions(ElementKind::Tet4, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(n, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tri_reference_derivatives() {
        let (_, dn) = shape_functions(ElementKind::Tri3, &[0.2, 0.3]).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[-1.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(dn, expected);
    }

    #[test]
    fn outside_reference_rejected() {
        assert!(matches!(
            shape_functions(ElementKind::Tri3, &[0.7, 0.4]),
            Err(MeshError::OutsideReference(_))
        ));
        assert!(shape_functions(ElementKind::Tet4, &[-1e-6, 0.0, 0.0]).is_err());
        // within the 1e-12 slack
        assert!(shape_functions(ElementKind::Tri3, &[-1e-13, 1.0]).is_ok());
    }

    #[test]
    fn unit_triangle_jacobian() {
        let c = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let (j, det, m) = element_jacobian(&c).unwrap();
        assert_eq!(j, DMatrix::identity(2, 2));
        assert_eq!(det, 1.0);
        assert_eq!(m, 0.5);
    }

    #[test]
    fn scaled_triangle_jacobian() {
        let c = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]];
        let (_, det, m) = element_jacobian(&c).unwrap();
        assert!((det - 4.0).abs() < 1e-15);
        assert!((m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_triangle_is_degenerate() {
        let c = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(matches!(element_jacobian(&c), Err(MeshError::DegenerateElement { .. })));
    }

    #[test]
    fn unit_tet_volume() {
        let c = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let (_, det, m) = element_jacobian(&c).unwrap();
        assert_eq!(det, 1.0);
        assert!((m - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn monomial_integrals() {
        // int N_i N_j over a triangle: A/12 (i != j), A/6 (i == j)
        assert!((simplex_monomial_integral(2, 1.0, &[1, 1]) - 1.0 / 12.0).abs() < 1e-15);
        assert!((simplex_monomial_integral(2, 1.0, &[2]) - 1.0 / 6.0).abs() < 1e-15);
        assert!((simplex_monomial_integral(3, 1.0, &[1]) - 0.25).abs() < 1e-15);
    }
}
