//! Average nodal error and convergence logs.

use std::fmt::Write;

use crate::error::SolveError;
use crate::mesh::{sq_dist, Point};
use crate::solver::RecoveryResult;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Mean Euclidean distance between recovered and true positions.
    pub mean_abs_error: f64,
    pub per_node: Vec<f64>,
    /// `100 * mean_abs_error / mean |true displacement|`.
    pub relative_percent: f64,
    pub n: usize,
}

/// Compares recovered and true final positions node by node. `reference`
/// holds the starting positions, so `truth - reference` is the true
/// displacement used for the relative figure.
pub fn average_nodal_error(recovered: &[Point], truth: &[Point], reference: &[Point]) -> Result<ErrorReport, SolveError> {
    if recovered.len() != truth.len() || truth.len() != reference.len() {
        return Err(SolveError::InvalidInput(format!(
            "node count mismatch: recovered {}, truth {}, reference {}",
            recovered.len(),
            truth.len(),
            reference.len()
        )));
    }
    if truth.is_empty() {
        return Err(SolveError::InvalidInput("no nodes".into()));
    }
    let n = truth.len();
    let per_node: Vec<f64> = recovered.iter().zip(truth).map(|(a, b)| sq_dist(a, b).sqrt()).collect();
    let mean_abs_error = per_node.iter().sum::<f64>() / n as f64;
    let magnitude = truth.iter().zip(reference).map(|(a, b)| sq_dist(a, b).sqrt()).sum::<f64>() / n as f64;
    let relative_percent = if magnitude > 0.0 {
        100.0 * mean_abs_error / magnitude
    } else if mean_abs_error == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorReport { mean_abs_error, per_node, relative_percent, n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub sigma2: f64,
    pub potential: f64,
    pub increment: f64,
}

pub fn convergence_log(result: &RecoveryResult) -> Vec<ConvergenceRow> {
    result
        .history
        .iter()
        .enumerate()
        .map(|(i, h)| ConvergenceRow { iter: i + 1, sigma2: h.sigma2, potential: h.potential, increment: h.increment })
        .collect()
}

pub const CSV_HEADER: &str = "iter,sigma2,potential,increment";

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{:e},{:e},{:e}", r.iter, r.sigma2, r.potential, r.increment);
    }
    s
}
