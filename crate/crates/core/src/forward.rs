//! Small-strain linear elastic boundary value problem, used to manufacture
//! deformed configurations with known displacement.

use std::collections::{BTreeMap, BTreeSet};

use crate::elasticity::Material;
use crate::error::{MeshError, SolveError};
use crate::mesh::{ElementGeometry, Mesh, Point, PointSet};
use crate::solver::Assembler;
use crate::sparse::{solve_spd, SparseSpd};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    /// Prescribed displacement per group; `None` leaves a component free.
    pub dirichlet: BTreeMap<String, Vec<Option<f64>>>,
    /// Constant traction per unit area (per unit length times thickness in 2D).
    pub tractions: BTreeMap<String, Vec<f64>>,
    /// Body force per unit volume; empty means zero.
    pub body_force: Vec<f64>,
}

impl BoundaryConditions {
    pub fn validate(&self, mesh: &Mesh) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::InvalidInput(m));
        if self.dirichlet.is_empty() {
            return bad("no Dirichlet constraints; rigid motions are unconstrained".into());
        }
        let mut facets: BTreeMap<Vec<usize>, &str> = BTreeMap::new();
        for (g, v) in &self.dirichlet {
            if v.len() != mesh.dim {
                return bad(format!("Dirichlet value for `{g}` needs {} components", mesh.dim));
            }
            let group = mesh
                .boundary_groups
                .get(g)
                .ok_or_else(|| SolveError::InvalidInput(format!("unknown boundary group `{g}`")))?;
            for f in group {
                let mut k = f.clone();
                k.sort_unstable();
                facets.insert(k, g);
            }
        }
        for (g, t) in &self.tractions {
            if t.len() != mesh.dim {
                return bad(format!("traction on `{g}` needs {} components", mesh.dim));
            }
            if self.dirichlet.contains_key(g) {
                return bad(format!("group `{g}` carries both Dirichlet and traction conditions"));
            }
            let group = mesh
                .boundary_groups
                .get(g)
                .ok_or_else(|| SolveError::InvalidInput(format!("unknown boundary group `{g}`")))?;
            for f in group {
                let mut k = f.clone();
                k.sort_unstable();
                if let Some(other) = facets.get(&k) {
                    return bad(format!("facet {f:?} is in Dirichlet group `{other}` and traction group `{g}`"));
                }
            }
        }
        if !self.body_force.is_empty() && self.body_force.len() != mesh.dim {
            return bad(format!("body force needs {} components", mesh.dim));
        }
        Ok(())
    }
}

fn facet_measure(mesh: &Mesh, facet: &[usize]) -> f64 {
    let p: Vec<Point> = facet.iter().map(|&n| mesh.coords[n]).collect();
    let sub = |a: &Point, b: &Point| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    match p.len() {
        2 => {
            let d = sub(&p[1], &p[0]);
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        }
        3 => {
            let (a, b) = (sub(&p[1], &p[0]), sub(&p[2], &p[0]));
            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            0.5 * (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt()
        }
        _ => 0.0,
    }
}

/// Consistent nodal forces of a constant traction on a boundary group.
pub fn assemble_traction(mesh: &Mesh, group: &str, traction: &[f64], thickness: f64) -> Result<Vec<f64>, SolveError> {
    let facets = mesh
        .boundary_groups
        .get(group)
        .ok_or_else(|| SolveError::InvalidInput(format!("unknown boundary group `{group}`")))?;
    if traction.len() != mesh.dim {
        return Err(SolveError::InvalidInput(format!("traction needs {} components", mesh.dim)));
    }
    let t = if mesh.dim == 2 { thickness } else { 1.0 };
    let mut f = vec![0.0; mesh.n_dofs()];
    for facet in facets {
        let share = facet_measure(mesh, facet) * t / facet.len() as f64;
        for &n in facet {
            for (a, tr) in traction.iter().enumerate() {
                f[n * mesh.dim + a] += tr * share;
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub displacement: Vec<f64>,
    /// Applied load vector (tractions plus body force).
    pub load: Vec<f64>,
    /// `K u - f`; nonzero only on constrained dofs.
    pub reactions: Vec<f64>,
    pub constrained: Vec<usize>,
}

pub fn forward_solve(mesh: &Mesh, material: &Material, bcs: &BoundaryConditions) -> Result<ForwardSolution, SolveError> {
    bcs.validate(mesh)?;
    let dim = mesh.dim;
    let n = mesh.n_dofs();
    let asm = Assembler::new(mesh, material)?;
    let k = asm.system(mesh, &vec![1.0; mesh.n_nodes()], f64::INFINITY, 1.0, 0.0);

    let mut load = vec![0.0; n];
    for (g, t) in &bcs.tractions {
        for (l, v) in load.iter_mut().zip(assemble_traction(mesh, g, t, material.thickness)?) {
            *l += v;
        }
    }
    if !bcs.body_force.is_empty() {
        for (i, l) in load.iter_mut().enumerate() {
            *l += bcs.body_force[i % dim] * asm.volumes[i / dim];
        }
    }

    let mut prescribed: BTreeMap<usize, f64> = BTreeMap::new();
    for (g, vals) in &bcs.dirichlet {
        for node in mesh.group_nodes(g).unwrap_or_default() {
            for (a, v) in vals.iter().enumerate() {
                if let Some(v) = v {
                    prescribed.insert(node * dim + a, *v);
                }
            }
        }
    }

    // symmetric elimination
    let csr = k.csr();
    let offsets = csr.row_offsets();
    let cols = csr.col_indices();
    let mut values = csr.values().to_vec();
    let mut rhs = load.clone();
    for i in 0..n {
        for p in offsets[i]..offsets[i + 1] {
            let j = cols[p];
            if let Some(g) = prescribed.get(&j) {
                if !prescribed.contains_key(&i) {
                    rhs[i] -= values[p] * g;
                }
            }
        }
    }
    for i in 0..n {
        let row_fixed = prescribed.contains_key(&i);
        for p in offsets[i]..offsets[i + 1] {
            let j = cols[p];
            if row_fixed || prescribed.contains_key(&j) {
                values[p] = if i == j { 1.0 } else { 0.0 };
            }
        }
    }
    for (&i, &g) in &prescribed {
        rhs[i] = g;
    }
    let reduced = SparseSpd::from_csr(
        nalgebra_sparse::CsrMatrix::try_from_csr_data(n, n, offsets.to_vec(), cols.to_vec(), values)
            .expect("same pattern"),
    );
    let mut u = solve_spd(&reduced, &rhs, 1e-13)?;
    for (&i, &g) in &prescribed {
        u[i] = g;
    }
    let ku = k.matvec(&u);
    let reactions: Vec<f64> = (0..n)
        .map(|i| if prescribed.contains_key(&i) { ku[i] - load[i] } else { 0.0 })
        .collect();
    Ok(ForwardSolution { displacement: u, load, reactions, constrained: prescribed.keys().copied().collect() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deformed {
    pub mesh: Mesh,
    pub points: PointSet,
    /// Elements whose orientation flipped or collapsed.
    pub inverted: Vec<usize>,
}

/// Moves every node by its displacement. Inverted elements are reported, not rejected.
pub fn deform_mesh(mesh: &Mesh, displacement: &[f64]) -> Result<Deformed, MeshError> {
    if displacement.len() != mesh.n_dofs() {
        return Err(MeshError::FieldLength {
            name: "displacement".into(),
            expected: mesh.n_nodes(),
            found: displacement.len() / mesh.dim,
        });
    }
    let moved = mesh.displaced(displacement);
    let inverted: Vec<usize> = moved
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| ElementGeometry::new(&moved.element_coords(e)).map(|g| g.det <= 0.0).unwrap_or(true))
        .map(|(i, _)| i)
        .collect();
    if !inverted.is_empty() {
        log::warn!("{} elements inverted by the deformation", inverted.len());
    }
    let points = PointSet { dim: mesh.dim, points: moved.coords.clone() };
    Ok(Deformed { mesh: moved, points, inverted })
}

/// Node sets touched by each group, as a convenience for reporting.
pub fn constrained_nodes(mesh: &Mesh, bcs: &BoundaryConditions) -> BTreeSet<usize> {
    bcs.dirichlet.keys().filter_map(|g| mesh.group_nodes(g)).flatten().collect()
}
