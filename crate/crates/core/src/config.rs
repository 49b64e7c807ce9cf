//! Plain-text `key = value` run configuration and boundary condition files.
//!
//! ```text
//! # plate, case I
//! beta = 6e-7
//! gamma = 1e-7
//! lambda = 0.58e6
//! mu = 0.38e6
//! thickness = 0.01
//! ```
//!
//! Boundary condition files hold one condition per line:
//!
//! ```text
//! dirichlet bottom 0 0
//! dirichlet left free 0
//! traction top 0.01e6 0.1e6
//! body_force 0 -9.81
//! ```

use std::collections::BTreeMap;

use crate::cpd::CpdParams;
use crate::elasticity::{AnalysisMode, Material};
use crate::error::SolveError;
use crate::forward::BoundaryConditions;
use crate::solver::{Direction, Hyperparams, UpdateForm};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hyper: Hyperparams,
    pub lambda: f64,
    pub mu: f64,
    /// `None` picks plane stress in 2D and solid in 3D.
    pub mode: Option<AnalysisMode>,
    pub thickness: f64,
    pub cpd: CpdParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            lambda: 0.58e6,
            mu: 0.38e6,
            mode: None,
            thickness: 1.0,
            cpd: CpdParams::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "beta",
    "gamma",
    "max_iter",
    "tol",
    "lambda",
    "mu",
    "mode",
    "thickness",
    "energy_weighting",
    "update_form",
    "direction",
    "sigma_floor",
    "kernel_width",
    "lambda_reg",
];

fn invalid(line: usize, msg: impl std::fmt::Display) -> SolveError {
    SolveError::InvalidInput(format!("config line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, SolveError> {
    v.parse().map_err(|_| invalid(line, format!("bad value `{v}` for `{key}`")))
}

fn switch(line: usize, key: &str, v: &str) -> Result<bool, SolveError> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(line, format!("`{key}` expects on/off, got `{v}`"))),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, SolveError> {
        let mut c = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| invalid(line, format!("expected `key = value`, found `{body}`")))?;
            let (key, v) = (key.trim(), value.trim());
            if let Some(prev) = seen.insert(key.to_string(), line) {
                return Err(invalid(line, format!("`{key}` already set on line {prev}")));
            }
            match key {
                "beta" => c.hyper.beta = num(line, key, v)?,
                "gamma" => c.hyper.gamma = num(line, key, v)?,
                "max_iter" => c.hyper.max_iter = num(line, key, v)?,
                "tol" => c.hyper.tol = num(line, key, v)?,
                "sigma_floor" => c.hyper.sigma_floor = Some(num(line, key, v)?),
                "lambda" => c.lambda = num(line, key, v)?,
                "mu" => c.mu = num(line, key, v)?,
                "thickness" => c.thickness = num(line, key, v)?,
                "energy_weighting" => c.hyper.energy_weighting = switch(line, key, v)?,
                "mode" => {
                    c.mode = Some(match v {
                        "plane_stress" => AnalysisMode::PlaneStress,
                        "plane_strain" => AnalysisMode::PlaneStrain,
                        "solid3d" => AnalysisMode::Solid3d,
                        _ => return Err(invalid(line, format!("unknown mode `{v}`"))),
                    })
                }
                "update_form" => {
                    c.hyper.update_form = match v {
                        "total" => UpdateForm::Total,
                        "incremental" => UpdateForm::Incremental,
                        _ => return Err(invalid(line, format!("unknown update_form `{v}`"))),
                    }
                }
                "direction" => {
                    c.hyper.direction = match v {
                        "reference_to_current" => Direction::ReferenceToCurrent,
                        "current_to_reference" => Direction::CurrentToReference,
                        _ => return Err(invalid(line, format!("unknown direction `{v}`"))),
                    }
                }
                "kernel_width" => c.cpd.kernel_width = Some(num(line, key, v)?),
                "lambda_reg" => c.cpd.lambda_reg = num(line, key, v)?,
                _ => return Err(invalid(line, format!("unknown key `{key}`"))),
            }
        }
        c.hyper.validate()?;
        c.cpd.max_iter = c.hyper.max_iter;
        c.cpd.tol = c.hyper.tol;
        c.cpd.sigma_floor = c.hyper.sigma_floor;
        c.cpd.validate()?;
        Ok(c)
    }

    pub fn material(&self, dim: usize) -> Result<Material, SolveError> {
        let mode = self.mode.unwrap_or_else(|| AnalysisMode::default_for(dim));
        if mode.dim() != dim {
            return Err(SolveError::InvalidInput(format!("mode {mode:?} does not fit a {dim}D mesh")));
        }
        Ok(Material::new(self.lambda, self.mu, mode)?.with_thickness(self.thickness)?)
    }
}

fn component(line: usize, v: &str) -> Result<Option<f64>, SolveError> {
    if v == "free" {
        Ok(None)
    } else {
        num(line, "component", v).map(Some)
    }
}

/// Parses a boundary condition file. Group existence and disjointness are
/// checked later against the mesh by [`BoundaryConditions::validate`].
pub fn parse_boundary_conditions(text: &str, dim: usize) -> Result<BoundaryConditions, SolveError> {
    let mut bcs = BoundaryConditions::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let need = |n: usize| {
            if toks.len() != n {
                Err(invalid(line, format!("`{}` needs {} fields, found {}", toks[0], n - 1, toks.len() - 1)))
            } else {
                Ok(())
            }
        };
        match toks[0] {
            "dirichlet" => {
                need(2 + dim)?;
                let v = toks[2..].iter().map(|t| component(line, t)).collect::<Result<Vec<_>, _>>()?;
                if bcs.dirichlet.insert(toks[1].to_string(), v).is_some() {
                    return Err(invalid(line, format!("duplicate Dirichlet group `{}`", toks[1])));
                }
            }
            "traction" => {
                need(2 + dim)?;
                let v = toks[2..].iter().map(|t| num(line, "traction", t)).collect::<Result<Vec<f64>, _>>()?;
                if bcs.tractions.insert(toks[1].to_string(), v).is_some() {
                    return Err(invalid(line, format!("duplicate traction group `{}`", toks[1])));
                }
            }
            "body_force" => {
                need(1 + dim)?;
                bcs.body_force = toks[1..].iter().map(|t| num(line, "body_force", t)).collect::<Result<_, _>>()?;
            }
            other => return Err(invalid(line, format!("unknown condition `{other}`"))),
        }
    }
    Ok(bcs)
}
