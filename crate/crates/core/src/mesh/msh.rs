//! Gmsh MSH 2.2 ASCII subset.
//!
//! Volume elements are TRI3 (type 2) in 2D meshes and TET4 (type 4) in 3D
//! meshes. Tagged lower-dimensional elements (lines in 2D, triangles in 3D)
//! become boundary facets grouped by physical tag, named through
//! `$PhysicalNames` when present. Everything else is skipped and counted.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use super::{Element, ElementKind, Mesh, Point};
use crate::error::MeshError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MshStats {
    pub header_nodes: usize,
    pub header_elements: usize,
    /// Entries of `$Elements` that became neither volume elements nor boundary facets.
    pub skipped: usize,
}

pub fn parse_msh(text: &str) -> Result<Mesh, MeshError> {
    let (mesh, stats) = read_msh(text)?;
    if stats.skipped > 0 {
        log::warn!("skipped {} unsupported MSH elements", stats.skipped);
    }
    Ok(mesh)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            let t = l.trim();
            if !t.is_empty() {
                self.line = i + 1;
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str, MeshError> {
        let line = self.line;
        self.next().ok_or_else(|| MeshError::Parse { line, msg: format!("unexpected end of file, expected {what}") })
    }

    fn err(&self, msg: impl Into<String>) -> MeshError {
        MeshError::Parse { line: self.line, msg: msg.into() }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T, MeshError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| lines.err(format!("bad or missing {what}")))
}

struct RawElement {
    ty: u32,
    tags: Vec<i64>,
    nodes: Vec<usize>,
    id: usize,
}

pub fn read_msh(text: &str) -> Result<(Mesh, MshStats), MeshError> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    let mut saw_format = false;
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut node_ids: Vec<usize> = Vec::new();
    let mut coords: Vec<Point> = Vec::new();
    let mut raw: Vec<RawElement> = Vec::new();
    let mut stats = MshStats::default();

    while let Some(head) = lines.next() {
        if !head.starts_with('$') {
            return Err(lines.err(format!("expected section start, found `{head}`")));
        }
        let section = &head[1..];
        match section {
            "MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version = it.next().unwrap_or("");
                if !version.starts_with('2') {
                    return Err(lines.err(format!("unsupported MSH version {version}")));
                }
                if it.next() != Some("0") {
                    return Err(lines.err("only ASCII MSH is supported"));
                }
                saw_format = true;
            }
            "PhysicalNames" => {
                let t = lines.expect("count")?;
                let n: usize = parse_num(&lines, Some(t), "count")?;
                for _ in 0..n {
                    let l = lines.expect("physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let _dim: i64 = parse_num(&lines, it.next(), "dimension")?;
                    let tag: i64 = parse_num(&lines, it.next(), "tag")?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert(tag, name);
                }
            }
            "Nodes" => {
                let t = lines.expect("node count")?;
                let n: usize = parse_num(&lines, Some(t), "node count")?;
                stats.header_nodes = n;
                loop {
                    let l = lines.expect("$EndNodes")?;
                    if l.starts_with('$') {
                        if l != "$EndNodes" {
                            return Err(lines.err(format!("expected $EndNodes, found `{l}`")));
                        }
                        break;
                    }
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(&lines, it.next(), "node id")?;
                    let mut c = [0.0; 3];
                    for v in c.iter_mut() {
                        *v = parse_num(&lines, it.next(), "coordinate")?;
                    }
                    node_ids.push(id);
                    coords.push(c);
                }
                if coords.len() != n {
                    return Err(MeshError::NodeCountMismatch { expected: n, found: coords.len() });
                }
                continue;
            }
            "Elements" => {
                let t = lines.expect("element count")?;
                let n: usize = parse_num(&lines, Some(t), "element count")?;
                stats.header_elements = n;
                loop {
                    let l = lines.expect("$EndElements")?;
                    if l.starts_with('$') {
                        if l != "$EndElements" {
                            return Err(lines.err(format!("expected $EndElements, found `{l}`")));
                        }
                        break;
                    }
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    let mut it = toks.iter().copied();
                    let id: usize = parse_num(&lines, it.next(), "element id")?;
                    let ty: u32 = parse_num(&lines, it.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, it.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num(&lines, it.next(), "tag")?);
                    }
                    let nodes = it
                        .map(|t| t.parse::<usize>().map_err(|_| lines.err("bad node reference")))
                        .collect::<Result<Vec<_>, _>>()?;
                    let expected_nodes = match ty {
                        1 => Some(2),
                        2 => Some(3),
                        4 => Some(4),
                        15 => Some(1),
                        _ => None,
                    };
                    if let Some(k) = expected_nodes {
                        if nodes.len() != k {
                            return Err(lines.err(format!("element type {ty} needs {k} nodes")));
                        }
                    }
                    raw.push(RawElement { ty, tags, nodes, id });
                }
                if raw.len() != n {
                    return Err(MeshError::ElementCountMismatch { expected: n, found: raw.len() });
                }
                continue;
            }
            _ => {
                // unknown section: skip to its end marker
                let end = format!("$End{section}");
                loop {
                    let l = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                    if l.starts_with("$End") {
                        return Err(lines.err(format!("expected {end}, found `{l}`")));
                    }
                }
                continue;
            }
        }
        let end = format!("$End{section}");
        let l = lines.expect(&end)?;
        if l != end {
            return Err(lines.err(format!("expected {end}, found `{l}`")));
        }
    }
    if !saw_format {
        return Err(MeshError::Parse { line: 0, msg: "missing $MeshFormat section".into() });
    }

    let index: HashMap<usize, usize> = node_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    if index.len() != node_ids.len() {
        return Err(MeshError::Invalid("duplicate node id".into()));
    }
    let dim = if raw.iter().any(|r| r.ty == 4) { 3 } else { 2 };
    let (volume_ty, facet_ty) = if dim == 3 { (4, 2) } else { (2, 1) };
    let kind = ElementKind::for_dim(dim).expect("dim is 2 or 3");

    let mut elements = Vec::new();
    let mut groups: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    for r in &raw {
        let local = r
            .nodes
            .iter()
            .map(|id| index.get(id).copied().ok_or(MeshError::UndefinedNode { element: r.id, node: *id }))
            .collect::<Result<Vec<_>, _>>()?;
        if r.ty == volume_ty {
            elements.push(Element { kind, nodes: local });
        } else if r.ty == facet_ty && !r.tags.is_empty() {
            let name = names.get(&r.tags[0]).cloned().unwrap_or_else(|| r.tags[0].to_string());
            groups.entry(name).or_default().push(local);
        } else {
            stats.skipped += 1;
        }
    }
    if elements.is_empty() {
        return Err(MeshError::NoElements);
    }
    if dim == 2 {
        for c in &coords {
            if c[2] != 0.0 {
                return Err(MeshError::Invalid("2D mesh with nonzero z coordinate".into()));
            }
        }
    }
    let mesh = Mesh::with_ids(dim, node_ids, coords, elements, groups)?;
    Ok((mesh, stats))
}

/// Writes the mesh in the same subset `read_msh` accepts. Boundary groups get
/// physical tags 1.. in name order and a `$PhysicalNames` block.
pub fn write_msh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    if !mesh.boundary_groups.is_empty() {
        let _ = writeln!(s, "$PhysicalNames\n{}", mesh.boundary_groups.len());
        for (tag, name) in mesh.boundary_groups.keys().enumerate() {
            let _ = writeln!(s, "{} {} \"{}\"", mesh.dim - 1, tag + 1, name);
        }
        s.push_str("$EndPhysicalNames\n");
    }
    let _ = writeln!(s, "$Nodes\n{}", mesh.n_nodes());
    for (id, c) in mesh.node_ids.iter().zip(&mesh.coords) {
        let _ = writeln!(s, "{} {} {} {}", id, c[0], c[1], c[2]);
    }
    s.push_str("$EndNodes\n");
    let n_facets: usize = mesh.boundary_groups.values().map(Vec::len).sum();
    let _ = writeln!(s, "$Elements\n{}", n_facets + mesh.elements.len());
    let (volume_ty, facet_ty) = if mesh.dim == 3 { (4, 2) } else { (2, 1) };
    let mut id = 1;
    for (tag, facets) in mesh.boundary_groups.values().enumerate() {
        for f in facets {
            let _ = write!(s, "{id} {facet_ty} 2 {} {}", tag + 1, tag + 1);
            for &n in f {
                let _ = write!(s, " {}", mesh.node_ids[n]);
            }
            s.push('\n');
            id += 1;
        }
    }
    for e in &mesh.elements {
        let _ = write!(s, "{id} {volume_ty} 2 0 1");
        for &n in &e.nodes {
            let _ = write!(s, " {}", mesh.node_ids[n]);
        }
        s.push('\n');
        id += 1;
    }
    s.push_str("$EndElements\n");
    s
}
