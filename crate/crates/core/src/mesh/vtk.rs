//! VTK legacy ASCII unstructured grids (writer plus a reader for the same subset).

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{ElementKind, Mesh, Point};
use crate::error::MeshError;

#[derive(Debug, Clone, PartialEq)]
pub enum PointField {
    Scalars(Vec<f64>),
    /// Per-node vectors; 2D fields keep a zero third component.
    Vectors(Vec<Point>),
}

impl PointField {
    pub fn len(&self) -> usize {
        match self {
            PointField::Scalars(v) => v.len(),
            PointField::Vectors(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Builds a vector field from a flat node-major array with `dim` components per node.
    pub fn from_flat(values: &[f64], dim: usize) -> Self {
        PointField::Vectors(
            values
                .chunks(dim)
                .map(|c| {
                    let mut p = [0.0; 3];
                    p[..dim].copy_from_slice(c);
                    p
                })
                .collect(),
        )
    }
}

fn cell_type(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Tri3 => 5,
        ElementKind::Tet4 => 10,
    }
}

pub fn write_vtk(mesh: &Mesh, fields: &BTreeMap<String, PointField>) -> Result<String, MeshError> {
    let n = mesh.n_nodes();
    for (name, f) in fields {
        if f.len() != n {
            return Err(MeshError::FieldLength { name: name.clone(), expected: n, found: f.len() });
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(MeshError::Invalid(format!("invalid field name `{name}`")));
        }
    }
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\nvbifem output\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {n} double");
    for c in &mesh.coords {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    let size: usize = mesh.elements.iter().map(|e| e.nodes.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", mesh.elements.len(), size);
    for e in &mesh.elements {
        let _ = write!(s, "{}", e.nodes.len());
        for &i in &e.nodes {
            let _ = write!(s, " {i}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = writeln!(s, "{}", cell_type(e.kind));
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
        for (name, f) in fields {
            match f {
                PointField::Scalars(v) => {
                    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                    for x in v {
                        let _ = writeln!(s, "{x}");
                    }
                }
                PointField::Vectors(v) => {
                    let _ = writeln!(s, "VECTORS {name} double");
                    for p in v {
                        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
                    }
                }
            }
        }
    }
    Ok(s)
}

/// Contents of a legacy VTK file written by `write_vtk`.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub fields: BTreeMap<String, PointField>,
}

impl VtkData {
    pub fn dim(&self) -> usize {
        if self.cell_types.contains(&10) {
            3
        } else {
            2
        }
    }

    pub fn vectors(&self, name: &str) -> Option<&[Point]> {
        match self.fields.get(name)? {
            PointField::Vectors(v) => Some(v),
            PointField::Scalars(_) => None,
        }
    }

    pub fn to_mesh(&self) -> Result<Mesh, MeshError> {
        let dim = self.dim();
        let kind = ElementKind::for_dim(dim).expect("2 or 3");
        let elements = self
            .cells
            .iter()
            .map(|c| super::Element { kind, nodes: c.clone() })
            .collect();
        Mesh::new(dim, self.points.clone(), elements, BTreeMap::new())
    }
}

pub fn read_vtk(text: &str) -> Result<VtkData, MeshError> {
    let mut toks = text
        .lines()
        .enumerate()
        .skip(2) // version line and title
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
        .peekable();
    let perr = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };
    macro_rules! next {
        () => {
            toks.next().ok_or_else(|| perr(0, "unexpected end of file"))?
        };
    }
    macro_rules! num {
        ($t:ty) => {{
            let (line, t) = next!();
            t.parse::<$t>().map_err(|_| perr(line, &format!("expected number, found `{t}`")))?
        }};
    }
    let mut data = VtkData { points: vec![], cells: vec![], cell_types: vec![], fields: BTreeMap::new() };
    let mut n_point_data = 0;
    while let Some((line, kw)) = toks.next() {
        match kw {
            "ASCII" => {}
            "DATASET" => {
                let (l, t) = next!();
                if t != "UNSTRUCTURED_GRID" {
                    return Err(perr(l, "only UNSTRUCTURED_GRID is supported"));
                }
            }
            "POINTS" => {
                let n = num!(usize);
                next!();
                for _ in 0..n {
                    data.points.push([num!(f64), num!(f64), num!(f64)]);
                }
            }
            "CELLS" => {
                let n = num!(usize);
                num!(usize);
                for _ in 0..n {
                    let k = num!(usize);
                    let mut c = Vec::with_capacity(k);
                    for _ in 0..k {
                        c.push(num!(usize));
                    }
                    data.cells.push(c);
                }
            }
            "CELL_TYPES" => {
                let n = num!(usize);
                for _ in 0..n {
                    data.cell_types.push(num!(u8));
                }
            }
            "POINT_DATA" => n_point_data = num!(usize),
            "SCALARS" => {
                let (_, name) = next!();
                next!();
                if let Some(&(_, t)) = toks.peek() {
                    if t.parse::<usize>().is_ok() {
                        toks.next();
                    }
                }
                let (l, lt) = next!();
                if lt != "LOOKUP_TABLE" {
                    return Err(perr(l, "expected LOOKUP_TABLE"));
                }
                next!();
                let v = (0..n_point_data).map(|_| Ok(num!(f64))).collect::<Result<Vec<_>, MeshError>>()?;
                data.fields.insert(name.to_string(), PointField::Scalars(v));
            }
            "VECTORS" => {
                let (_, name) = next!();
                next!();
                let mut v = Vec::with_capacity(n_point_data);
                for _ in 0..n_point_data {
                    v.push([num!(f64), num!(f64), num!(f64)]);
                }
                data.fields.insert(name.to_string(), PointField::Vectors(v));
            }
            other => return Err(perr(line, &format!("unsupported keyword `{other}`"))),
        }
    }
    if data.cells.len() != data.cell_types.len() {
        return Err(perr(0, "CELLS and CELL_TYPES disagree"));
    }
    Ok(data)
}
