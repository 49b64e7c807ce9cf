#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use vbifem::elasticity::{AnalysisMode, Material};
use vbifem::forward::{deform_mesh, forward_solve, BoundaryConditions, Deformed, ForwardSolution};
use vbifem::mesh::{read_msh, Element, ElementKind, Mesh, Point, PointSet};

pub const PLATE_MSH: &str = include_str!("../data/plate_hole.msh");
pub const BLOCK_MSH: &str = include_str!("../data/cracked_block.msh");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Structured `nx x ny` rectangle split into triangles, interior nodes
/// jittered by up to `jitter` cell widths. Groups: left, right, bottom, top.
pub fn grid_2d(nx: usize, ny: usize, lx: f64, ly: f64, jitter: f64, seed: u64) -> Mesh {
    let mut r = rng(seed);
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut coords = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let mut p = [i as f64 * hx, j as f64 * hy, 0.0];
            if i > 0 && i < nx && j > 0 && j < ny {
                p[0] += jitter * hx * r.gen_range(-1.0..1.0);
                p[1] += jitter * hy * r.gen_range(-1.0..1.0);
            }
            coords.push(p);
        }
    }
    let mut elements = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            elements.push(Element { kind: ElementKind::Tri3, nodes: vec![a, b, c] });
            elements.push(Element { kind: ElementKind::Tri3, nodes: vec![a, c, d] });
        }
    }
    let mut groups: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for i in 0..nx {
        groups.entry("bottom".into()).or_default().push(vec![id(i, 0), id(i + 1, 0)]);
        groups.entry("top".into()).or_default().push(vec![id(i + 1, ny), id(i, ny)]);
    }
    for j in 0..ny {
        groups.entry("left".into()).or_default().push(vec![id(0, j + 1), id(0, j)]);
        groups.entry("right".into()).or_default().push(vec![id(nx, j), id(nx, j + 1)]);
    }
    Mesh::new(2, coords, elements, groups).unwrap()
}

const KUHN: [[usize; 4]; 6] = [[0, 1, 3, 7], [0, 3, 2, 7], [0, 2, 6, 7], [0, 6, 4, 7], [0, 4, 5, 7], [0, 5, 1, 7]];

/// Structured box split into six tetrahedra per cell. Groups: left/right
/// (x), front/back (y), bottom/top (z).
pub fn grid_3d(n: [usize; 3], l: [f64; 3], jitter: f64, seed: u64) -> Mesh {
    let mut r = rng(seed);
    let h = [l[0] / n[0] as f64, l[1] / n[1] as f64, l[2] / n[2] as f64];
    let id = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    let mut coords = Vec::new();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                let ijk = [i, j, k];
                let mut p = [i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]];
                if (0..3).all(|a| ijk[a] > 0 && ijk[a] < n[a]) {
                    for a in 0..3 {
                        p[a] += jitter * h[a] * r.gen_range(-1.0..1.0);
                    }
                }
                coords.push(p);
            }
        }
    }
    let mut elements = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let corner: Vec<usize> =
                    (0..8).map(|b| id(i + (b & 1), j + ((b >> 1) & 1), k + ((b >> 2) & 1))).collect();
                for t in KUHN {
                    elements.push(Element { kind: ElementKind::Tet4, nodes: t.iter().map(|&v| corner[v]).collect() });
                }
            }
        }
    }
    let mut faces: BTreeMap<Vec<usize>, (usize, Vec<usize>)> = BTreeMap::new();
    for e in &elements {
        for f in [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]] {
            let face: Vec<usize> = f.iter().map(|&v| e.nodes[v]).collect();
            let mut key = face.clone();
            key.sort_unstable();
            faces.entry(key).or_insert((0, face)).0 += 1;
        }
    }
    let eps = 1e-9;
    let mut groups: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for (_, (count, face)) in faces {
        if count != 1 {
            continue;
        }
        let m: Vec<f64> = (0..3).map(|a| face.iter().map(|&v| coords[v][a]).sum::<f64>() / 3.0).collect();
        let name = if m[0].abs() < eps {
            "left"
        } else if (m[0] - l[0]).abs() < eps {
            "right"
        } else if m[1].abs() < eps {
            "front"
        } else if (m[1] - l[1]).abs() < eps {
            "back"
        } else if m[2].abs() < eps {
            "bottom"
        } else {
            "top"
        };
        groups.entry(name.into()).or_default().push(face);
    }
    Mesh::new(3, coords, elements, groups).unwrap()
}

pub fn random_points(seed: u64, n: usize, dim: usize, lo: f64, hi: f64) -> PointSet {
    let mut r = rng(seed);
    let pts = (0..n)
        .map(|_| {
            let mut p = [0.0; 3];
            for v in p.iter_mut().take(dim) {
                *v = r.gen_range(lo..hi);
            }
            p
        })
        .collect();
    PointSet::new(dim, pts).unwrap()
}

pub fn flat_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Plate with a hole, SI units: lambda = 0.58 MPa, mu = 0.38 MPa,
/// thickness 1 cm, bottom fixed, traction (0.01, 0.1) MPa on the top.
pub struct PlateCase {
    pub mesh: Mesh,
    pub material: Material,
    pub bcs: BoundaryConditions,
    pub solution: ForwardSolution,
    pub deformed: Deformed,
}

pub const PLATE_TRACTION: [f64; 2] = [0.01e6, 0.1e6];

pub fn plate_case() -> PlateCase {
    let (mesh, _) = read_msh(PLATE_MSH).unwrap();
    let material = Material::new(0.58e6, 0.38e6, AnalysisMode::PlaneStress).unwrap().with_thickness(0.01).unwrap();
    let mut bcs = BoundaryConditions::default();
    bcs.dirichlet.insert("bottom".into(), vec![Some(0.0), Some(0.0)]);
    bcs.tractions.insert("top".into(), PLATE_TRACTION.to_vec());
    let solution = forward_solve(&mesh, &material, &bcs).unwrap();
    let deformed = deform_mesh(&mesh, &solution.displacement).unwrap();
    PlateCase { mesh, material, bcs, solution, deformed }
}

/// Cracked block: lambda = mu = 1 kPa, bottom fixed, end faces pulled apart
/// with 300 Pa so the crack opens. The data are the undeformed nodal
/// positions with seeded Gaussian noise of 2 mm.
pub struct BlockCase {
    pub reference: Mesh,
    pub material: Material,
    pub deformed: Deformed,
    pub data: PointSet,
}

pub const BLOCK_TRACTION: f64 = 300.0;
pub const BLOCK_NOISE: f64 = 0.002;

pub fn block_case() -> BlockCase {
    let (reference, _) = read_msh(BLOCK_MSH).unwrap();
    let material = Material::new(1e3, 1e3, AnalysisMode::Solid3d).unwrap();
    let mut bcs = BoundaryConditions::default();
    bcs.dirichlet.insert("bottom".into(), vec![Some(0.0); 3]);
    bcs.tractions.insert("left".into(), vec![-BLOCK_TRACTION, 0.0, 0.0]);
    bcs.tractions.insert("right".into(), vec![BLOCK_TRACTION, 0.0, 0.0]);
    let solution = forward_solve(&reference, &material, &bcs).unwrap();
    let deformed = deform_mesh(&reference, &solution.displacement).unwrap();
    let mut r = rng(11);
    let noise = Normal::new(0.0, BLOCK_NOISE).unwrap();
    let pts: Vec<Point> = reference
        .coords
        .iter()
        .map(|c| [c[0] + noise.sample(&mut r), c[1] + noise.sample(&mut r), c[2] + noise.sample(&mut r)])
        .collect();
    let data = PointSet::new(3, pts).unwrap();
    BlockCase { reference, material, deformed, data }
}
