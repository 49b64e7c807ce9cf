use std::fmt::Write;

use super::{Point, PointSet};
use crate::error::MeshError;

/// Whitespace-separated rows of `dim` numbers; `#` starts a comment line.
pub fn parse_point_cloud(text: &str, dim: usize) -> Result<PointSet, MeshError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| MeshError::Parse { line: i + 1, msg: e.to_string() })?;
        if vals.len() != dim {
            return Err(MeshError::ColumnCount { line: i + 1, expected: dim, found: vals.len() });
        }
        let mut p: Point = [0.0; 3];
        p[..dim].copy_from_slice(&vals);
        points.push(p);
    }
    if points.is_empty() {
        return Err(MeshError::Empty);
    }
    PointSet::new(dim, points)
}

pub fn write_point_cloud(points: &PointSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} points, dimension {}", points.len(), points.dim);
    for p in &points.points {
        let row: Vec<String> = p[..points.dim].iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}
