//! Mesh and point-set containers plus their file formats.

mod cloud;
mod msh;
mod shape;
mod vtk;

use std::collections::{BTreeMap, HashMap};

pub use cloud::{parse_point_cloud, write_point_cloud};
pub use msh::{parse_msh, read_msh, write_msh, MshStats};
pub use shape::{
    element_jacobian, reference_gradients, shape_functions, simplex_monomial_integral, ElementGeometry,
};
pub use vtk::{read_vtk, write_vtk, PointField, VtkData};

use crate::error::MeshError;

/// Coordinates are stored padded to three components; 2D data keeps z = 0.
pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Tri3,
    Tet4,
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Tri3 => 2,
            ElementKind::Tet4 => 3,
        }
    }

    pub fn n_nodes(self) -> usize {
        self.dim() + 1
    }

    pub fn for_dim(dim: usize) -> Option<Self> {
        match dim {
            2 => Some(ElementKind::Tri3),
            3 => Some(ElementKind::Tet4),
            _ => None,
        }
    }

    /// Local node indices of each facet (edges for TRI3, faces for TET4).
    pub fn facets(self) -> &'static [&'static [usize]] {
        match self {
            ElementKind::Tri3 => &[&[0, 1], &[1, 2], &[2, 0]],
            ElementKind::Tet4 => &[&[0, 2, 1], &[0, 1, 3], &[1, 2, 3], &[0, 3, 2]],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    /// Zero-based indices into `Mesh::coords`.
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    /// Ids as they appeared in the source file (1-based for generated meshes).
    pub node_ids: Vec<usize>,
    pub coords: Vec<Point>,
    pub elements: Vec<Element>,
    /// Named boundary facets, each a list of zero-based node indices.
    pub boundary_groups: BTreeMap<String, Vec<Vec<usize>>>,
}

impl Mesh {
    /// Validates connectivity and puts every element in positive orientation.
    pub fn new(
        dim: usize,
        coords: Vec<Point>,
        elements: Vec<Element>,
        boundary_groups: BTreeMap<String, Vec<Vec<usize>>>,
    ) -> Result<Self, MeshError> {
        let node_ids = (1..=coords.len()).collect();
        Self::with_ids(dim, node_ids, coords, elements, boundary_groups)
    }

    pub fn with_ids(
        dim: usize,
        node_ids: Vec<usize>,
        coords: Vec<Point>,
        mut elements: Vec<Element>,
        boundary_groups: BTreeMap<String, Vec<Vec<usize>>>,
    ) -> Result<Self, MeshError> {
        let kind = ElementKind::for_dim(dim)
            .ok_or_else(|| MeshError::Invalid(format!("unsupported dimension {dim}")))?;
        if node_ids.len() != coords.len() {
            return Err(MeshError::Invalid("node id list does not match coordinates".into()));
        }
        if elements.is_empty() {
            return Err(MeshError::NoElements);
        }
        for c in &coords {
            if c.iter().any(|v| !v.is_finite()) || (dim == 2 && c[2] != 0.0) {
                return Err(MeshError::Invalid(format!("bad node coordinates {c:?}")));
            }
        }
        for (ei, e) in elements.iter_mut().enumerate() {
            if e.kind != kind || e.nodes.len() != kind.n_nodes() {
                return Err(MeshError::Invalid(format!("element {ei} does not match dimension {dim}")));
            }
            for (a, &n) in e.nodes.iter().enumerate() {
                if n >= coords.len() {
                    return Err(MeshError::UndefinedNode { element: ei, node: n });
                }
                if e.nodes[..a].contains(&n) {
                    return Err(MeshError::Invalid(format!("element {ei} repeats node {n}")));
                }
            }
            let pts: Vec<Point> = e.nodes.iter().map(|&n| coords[n]).collect();
            let g = ElementGeometry::new(&pts)?;
            if g.det < 0.0 {
                let last = e.nodes.len() - 1;
                e.nodes.swap(last - 1, last);
            }
        }
        let mesh = Mesh { dim, node_ids, coords, elements, boundary_groups };
        mesh.check_facets()?;
        Ok(mesh)
    }

    fn check_facets(&self) -> Result<(), MeshError> {
        if self.boundary_groups.is_empty() {
            return Ok(());
        }
        let faces = self.face_counts();
        for facets in self.boundary_groups.values() {
            for f in facets {
                let mut key = f.clone();
                key.sort_unstable();
                if f.len() != self.dim || faces.get(&key).copied() != Some(1) {
                    return Err(MeshError::BadFacet(f.clone()));
                }
            }
        }
        Ok(())
    }

    fn face_counts(&self) -> HashMap<Vec<usize>, usize> {
        let mut faces: HashMap<Vec<usize>, usize> = HashMap::new();
        for e in &self.elements {
            for local in e.kind.facets() {
                let mut key: Vec<usize> = local.iter().map(|&i| e.nodes[i]).collect();
                key.sort_unstable();
                *faces.entry(key).or_default() += 1;
            }
        }
        faces
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.dim * self.coords.len()
    }

    pub fn element_coords(&self, e: &Element) -> Vec<Point> {
        e.nodes.iter().map(|&n| self.coords[n]).collect()
    }

    pub fn geometry(&self, e: &Element) -> Result<ElementGeometry, MeshError> {
        ElementGeometry::new(&self.element_coords(e))
    }

    /// Nodes not referenced by any element.
    pub fn orphans(&self) -> Vec<usize> {
        let mut used = vec![false; self.n_nodes()];
        for e in &self.elements {
            for &n in &e.nodes {
                used[n] = true;
            }
        }
        (0..self.n_nodes()).filter(|&n| !used[n]).collect()
    }

    /// Copy of the mesh with orphan nodes removed, and the map from new to old index.
    pub fn without_orphans(&self) -> (Mesh, Vec<usize>) {
        let orphans = self.orphans();
        if orphans.is_empty() {
            return (self.clone(), (0..self.n_nodes()).collect());
        }
        let mut new_index = vec![usize::MAX; self.n_nodes()];
        let mut keep = Vec::new();
        for n in 0..self.n_nodes() {
            if orphans.binary_search(&n).is_err() {
                new_index[n] = keep.len();
                keep.push(n);
            }
        }
        let remap = |nodes: &[usize]| nodes.iter().map(|&n| new_index[n]).collect::<Vec<_>>();
        let mesh = Mesh {
            dim: self.dim,
            node_ids: keep.iter().map(|&n| self.node_ids[n]).collect(),
            coords: keep.iter().map(|&n| self.coords[n]).collect(),
            elements: self
                .elements
                .iter()
                .map(|e| Element { kind: e.kind, nodes: remap(&e.nodes) })
                .collect(),
            boundary_groups: self
                .boundary_groups
                .iter()
                .map(|(k, fs)| (k.clone(), fs.iter().map(|f| remap(f)).collect()))
                .collect(),
        };
        (mesh, keep)
    }

    /// Sorted, deduplicated node indices on a boundary group.
    pub fn group_nodes(&self, group: &str) -> Option<Vec<usize>> {
        let facets = self.boundary_groups.get(group)?;
        let mut nodes: Vec<usize> = facets.iter().flatten().copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        Some(nodes)
    }

    /// Element indices adjacent to each node.
    pub fn node_elements(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for (ei, e) in self.elements.iter().enumerate() {
            for &n in &e.nodes {
                adj[n].push(ei);
            }
        }
        adj
    }

    /// Row-sum lumped nodal measure: each element gives `measure * thickness / n_nodes`
    /// to each of its nodes.
    pub fn lumped_volumes(&self, thickness: f64) -> Result<Vec<f64>, MeshError> {
        let mut v = vec![0.0; self.n_nodes()];
        for e in &self.elements {
            let g = self.geometry(e)?;
            let share = g.measure * thickness / e.nodes.len() as f64;
            for &n in &e.nodes {
                v[n] += share;
            }
        }
        Ok(v)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.coords).unwrap_or(0.0)
    }

    /// New mesh with the same topology at displaced coordinates. Orientation
    /// is not re-canonicalized; see `forward::deform_mesh` for inversion checks.
    pub fn displaced(&self, displacement: &[f64]) -> Mesh {
        let mut out = self.clone();
        for (n, c) in out.coords.iter_mut().enumerate() {
            for a in 0..self.dim {
                c[a] += displacement[n * self.dim + a];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub points: Vec<Point>,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Point>) -> Result<Self, MeshError> {
        if !(2..=3).contains(&dim) {
            return Err(MeshError::Invalid(format!("unsupported dimension {dim}")));
        }
        if points.is_empty() {
            return Err(MeshError::Empty);
        }
        if points
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()) || (dim == 2 && p[2] != 0.0))
        {
            return Err(MeshError::Invalid("non-finite point".into()));
        }
        Ok(Self { dim, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.points).unwrap_or(0.0)
    }
}

impl From<&Mesh> for PointSet {
    fn from(mesh: &Mesh) -> Self {
        PointSet { dim: mesh.dim, points: mesh.coords.clone() }
    }
}

/// Length of the axis-aligned bounding-box diagonal.
pub fn bbox_diagonal(points: &[Point]) -> Result<f64, MeshError> {
    let first = points.first().ok_or(MeshError::Empty)?;
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    Ok((0..3).map(|a| (hi[a] - lo[a]).powi(2)).sum::<f64>().sqrt())
}

pub(crate) fn sq_dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}
