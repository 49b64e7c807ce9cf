//! FE-BL staggered recovery.
//!
//! Each iteration evaluates the posterior at the current centroids, solves the
//! finite element system
//!
//! ```text
//! (beta K_bar + gamma M + M_bar / sigma^2) u = b
//! ```
//!
//! for the displacement (FE-step) and then updates the variance in closed form
//! (BL-step). Nodal responsibility mass and body force are turned into
//! densities with the lumped nodal volumes, so the lumped `M_bar` and load
//! carry exactly the node totals and the FE-step is the exact minimizer of
//! the discrete objective returned by [`objective_q`].

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::elasticity::{b_matrix, moduli_matrix, Material};
use crate::error::SolveError;
use crate::mesh::{sq_dist, Mesh, Point, PointSet};
use crate::par;
use crate::probabilistic::{
    self, equivalent_body_force, equivalent_probability, gaussian_term, nodal_energy_density,
    regularization_term, Posterior, Responsibilities,
};
use crate::sparse::{solve_spd_with_report, SparseSpd, DEFAULT_CG_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateForm {
    /// Solve for the total displacement from the reference configuration.
    Total,
    /// Solve for an increment relative to the current centroids.
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// The supplied mesh is the undeformed body; data sample the deformed one.
    ReferenceToCurrent,
    /// The supplied mesh is the deformed body; data sample the undeformed one.
    /// The recovered field is then the inverse map.
    CurrentToReference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Weight of the elastic energy (prior exponent).
    pub beta: f64,
    /// Weight of the `|u|^2 / 2` regularizer.
    pub gamma: f64,
    pub max_iter: usize,
    /// Stop when `|u_{n+1} - u_n| <= tol * bbox_diagonal(mesh)`.
    pub tol: f64,
    /// `None` selects `1e-12 * bbox_diagonal(data)^2`.
    pub sigma_floor: Option<f64>,
    pub update_form: UpdateForm,
    pub energy_weighting: bool,
    pub direction: Direction,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            beta: 6e-7,
            gamma: 1e-7,
            max_iter: 200,
            tol: 1e-4,
            sigma_floor: None,
            update_form: UpdateForm::Total,
            energy_weighting: true,
            direction: Direction::ReferenceToCurrent,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |what: &str| Err(SolveError::InvalidInput(what.to_string()));
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be >= 0");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma must be > 0");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be > 0");
        }
        if let Some(f) = self.sigma_floor {
            if !(f > 0.0) {
                return bad("sigma_floor must be > 0");
            }
        }
        Ok(())
    }

    pub fn resolved_sigma_floor(&self, data: &PointSet) -> f64 {
        self.sigma_floor.unwrap_or_else(|| {
            let d = data.bbox_diagonal();
            if d > 0.0 {
                1e-12 * d * d
            } else {
                1e-300
            }
        })
    }
}

/// Element data that does not change across iterations plus the CSR pattern
/// and the scatter map from element dofs to CSR slots.
pub(crate) struct Assembler {
    dim: usize,
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    diag_slot: Vec<usize>,
    /// Per element: `thickness * measure * B^T D B` and its CSR slots (row-major).
    unit_stiffness: Vec<DMatrix<f64>>,
    slots: Vec<Vec<usize>>,
    pub volumes: Vec<f64>,
}

impl Assembler {
    pub fn new(mesh: &Mesh, material: &Material) -> Result<Self, SolveError> {
        if material.dim() != mesh.dim {
            return Err(SolveError::InvalidInput(format!(
                "material mode is {}D but mesh is {}D",
                material.dim(),
                mesh.dim
            )));
        }
        let dim = mesh.dim;
        let n = mesh.n_dofs();
        let t = material.integration_thickness();
        let d = moduli_matrix(material);
        let unit_stiffness = par::map_range(mesh.elements.len(), |ei| {
            let g = mesh.geometry(&mesh.elements[ei])?;
            let b = b_matrix(&g);
            let mut k = b.transpose() * &d * &b * (t * g.measure);
            let kt = k.transpose();
            k = (k + kt) * 0.5;
            Ok(k)
        })
        .into_iter()
        .collect::<Result<Vec<_>, crate::error::MeshError>>()?;

        let dofs = |nodes: &[usize]| -> Vec<usize> {
            nodes.iter().flat_map(|&m| (0..dim).map(move |a| m * dim + a)).collect()
        };
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in &mesh.elements {
            let ed = dofs(&e.nodes);
            for &i in &ed {
                rows[i].extend_from_slice(&ed);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        offsets.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            cols.extend_from_slice(r);
            offsets.push(cols.len());
        }
        let slot = |i: usize, j: usize| -> usize {
            let row = &cols[offsets[i]..offsets[i + 1]];
            offsets[i] + row.binary_search(&j).expect("pattern covers element dofs")
        };
        let slots = mesh
            .elements
            .iter()
            .map(|e| {
                let ed = dofs(&e.nodes);
                ed.iter().flat_map(|&i| ed.iter().map(move |&j| (i, j))).map(|(i, j)| slot(i, j)).collect()
            })
            .collect();
        let diag_slot = (0..n).map(|i| slot(i, i)).collect();
        let volumes = mesh.lumped_volumes(t)?;
        Ok(Self { dim, n, offsets, cols, diag_slot, unit_stiffness, slots, volumes })
    }

    /// `K = beta K_bar(rho) + gamma M + M_bar(rho) / sigma^2` for nodal densities `rho`.
    pub fn system(&self, mesh: &Mesh, density: &[f64], sigma2: f64, beta: f64, gamma: f64) -> SparseSpd {
        let mut values = vec![0.0; self.cols.len()];
        if beta != 0.0 {
            for ((e, k), slots) in mesh.elements.iter().zip(&self.unit_stiffness).zip(&self.slots) {
                let weight = e.nodes.iter().map(|&m| density[m]).sum::<f64>() / e.nodes.len() as f64;
                let s = beta * weight;
                if s == 0.0 {
                    continue;
                }
                let nd = k.nrows();
                for i in 0..nd {
                    for j in 0..nd {
                        values[slots[i * nd + j]] += s * k[(i, j)];
                    }
                }
            }
        }
        for (m, &v) in self.volumes.iter().enumerate() {
            let diag = gamma * v + v * density[m] / sigma2;
            for a in 0..self.dim {
                values[self.diag_slot[m * self.dim + a]] += diag;
            }
        }
        let csr = CsrMatrix::try_from_csr_data(self.n, self.n, self.offsets.clone(), self.cols.clone(), values)
            .expect("valid CSR pattern");
        SparseSpd::from_csr(csr)
    }

    pub fn density(&self, totals: &[f64]) -> Vec<f64> {
        totals.iter().zip(&self.volumes).map(|(p, v)| if *v > 0.0 { p / v } else { 0.0 }).collect()
    }
}

/// Assembles the total system matrix from nodal equivalent-probability
/// densities (responsibility mass per unit volume).
pub fn assemble_system(
    mesh: &Mesh,
    material: &Material,
    pbar_density: &[f64],
    sigma2: f64,
    hyper: &Hyperparams,
) -> Result<SparseSpd, SolveError> {
    if pbar_density.len() != mesh.n_nodes() || pbar_density.iter().any(|&p| !(p >= 0.0)) {
        return Err(SolveError::InvalidInput("pbar must be one nonnegative value per node".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(SolveError::InvalidInput("sigma2 must be positive".into()));
    }
    let asm = Assembler::new(mesh, material)?;
    Ok(asm.system(mesh, pbar_density, sigma2, hyper.beta, hyper.gamma))
}

/// Lumped load `b_m V_m` from a nodal body-force density field (flat, node-major).
pub fn assemble_load(bbar_density: &[f64], mesh: &Mesh, thickness: f64) -> Result<Vec<f64>, SolveError> {
    if bbar_density.len() != mesh.n_dofs() {
        return Err(SolveError::InvalidInput("body force must have D entries per node".into()));
    }
    let v = mesh.lumped_volumes(thickness)?;
    Ok(load_from_density(bbar_density, &v, mesh.dim))
}

fn load_from_density(bbar_density: &[f64], volumes: &[f64], dim: usize) -> Vec<f64> {
    bbar_density.iter().enumerate().map(|(i, b)| b * volumes[i / dim]).collect()
}

/// Snapshot of the staggered iteration at step `n`.
#[derive(Debug, Clone)]
pub struct RecoveryState {
    pub iteration: usize,
    pub displacement: Vec<f64>,
    pub sigma2: f64,
    /// Posterior evaluated at `displacement` and `sigma2`.
    pub responsibilities: Responsibilities,
    pub pbar: Vec<f64>,
    pub potential: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub sigma2: f64,
    pub potential: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Nodal displacement of the supplied mesh (flat, node-major).
    pub displacement: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub initial_sigma2: f64,
    pub initial_potential: f64,
    pub sigma_floor: f64,
    pub direction: Direction,
}

impl RecoveryResult {
    /// Positions of the mesh nodes after applying the recovered displacement.
    pub fn recovered_positions(&self, mesh: &Mesh) -> Vec<Point> {
        probabilistic::centroids(mesh, &self.displacement)
    }

    /// Displacement expressed as reference-to-current motion of the mesh
    /// nodes (negated for current-to-reference runs).
    pub fn forward_displacement(&self) -> Vec<f64> {
        match self.direction {
            Direction::ReferenceToCurrent => self.displacement.clone(),
            Direction::CurrentToReference => self.displacement.iter().map(|u| -u).collect(),
        }
    }
}

/// Mean squared distance over all centroid/point pairs divided by D.
pub fn initial_sigma2(centroids: &[Point], data: &PointSet) -> f64 {
    let partial = par::map_range(data.len(), |k| {
        centroids.iter().map(|c| sq_dist(c, &data.points[k])).sum::<f64>()
    });
    partial.iter().sum::<f64>() / (data.dim * centroids.len() * data.len()) as f64
}

fn check_inputs(mesh: &Mesh, data: &PointSet, material: &Material, hyper: &Hyperparams) -> Result<(), SolveError> {
    hyper.validate()?;
    if mesh.dim != data.dim {
        return Err(SolveError::InvalidInput(format!(
            "dimension mismatch: mesh {}D, data {}D",
            mesh.dim, data.dim
        )));
    }
    if data.is_empty() || mesh.n_nodes() == 0 {
        return Err(SolveError::InvalidInput("empty inputs".into()));
    }
    if material.dim() != mesh.dim {
        return Err(SolveError::InvalidInput("material mode does not match mesh dimension".into()));
    }
    if !mesh.orphans().is_empty() {
        return Err(SolveError::InvalidInput(
            "mesh has orphan nodes; remove them with Mesh::without_orphans".into(),
        ));
    }
    Ok(())
}

/// Prepared recovery problem; reused across iterations.
struct Recovery<'a> {
    mesh: &'a Mesh,
    data: &'a PointSet,
    material: &'a Material,
    hyper: &'a Hyperparams,
    asm: Assembler,
    sigma_floor: f64,
}

impl<'a> Recovery<'a> {
    fn new(mesh: &'a Mesh, data: &'a PointSet, material: &'a Material, hyper: &'a Hyperparams) -> Result<Self, SolveError> {
        check_inputs(mesh, data, material, hyper)?;
        let asm = Assembler::new(mesh, material)?;
        let sigma_floor = hyper.resolved_sigma_floor(data);
        Ok(Self { mesh, data, material, hyper, asm, sigma_floor })
    }

    fn log_weights(&self, displacement: &[f64]) -> Result<Vec<f64>, SolveError> {
        if !self.hyper.energy_weighting || self.hyper.beta == 0.0 {
            return Ok(vec![0.0; self.mesh.n_nodes()]);
        }
        let w = nodal_energy_density(self.mesh, displacement, self.material)?;
        Ok(w.iter().map(|w| -self.hyper.beta * w).collect())
    }

    fn evaluate(&self, displacement: &[f64], sigma2: f64) -> Result<(Posterior, f64), SolveError> {
        let lw = self.log_weights(displacement)?;
        let post = probabilistic::posterior(&probabilistic::centroids(self.mesh, displacement), self.data, sigma2, &lw)?;
        let potential = gaussian_term(&post.log_norms, sigma2, self.mesh.dim)
            + regularization_term(displacement, &self.asm.volumes, self.mesh.dim, self.hyper.gamma);
        Ok((post, potential))
    }

    fn state(&self, iteration: usize, displacement: Vec<f64>, sigma2: f64) -> Result<RecoveryState, SolveError> {
        let (post, potential) = self.evaluate(&displacement, sigma2)?;
        let pbar = equivalent_probability(&post.resp);
        Ok(RecoveryState { iteration, displacement, sigma2, responsibilities: post.resp, pbar, potential })
    }

    fn initial_state(&self) -> Result<RecoveryState, SolveError> {
        let s0 = initial_sigma2(&self.mesh.coords, self.data).max(self.sigma_floor);
        self.state(0, vec![0.0; self.mesh.n_dofs()], s0)
    }

    fn fe_step(&self, state: &RecoveryState) -> Result<Vec<f64>, SolveError> {
        let anchors: Vec<Point> = match self.hyper.update_form {
            UpdateForm::Total => self.mesh.coords.clone(),
            UpdateForm::Incremental => probabilistic::centroids(self.mesh, &state.displacement),
        };
        let bbar = equivalent_body_force(&state.responsibilities, &anchors, self.data, state.sigma2)?;
        let density = self.asm.density(&state.pbar);
        let dim = self.mesh.dim;
        let bbar_density: Vec<f64> = bbar
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let v = self.asm.volumes[i / dim];
                if v > 0.0 {
                    b / v
                } else {
                    0.0
                }
            })
            .collect();
        let k = self.asm.system(self.mesh, &density, state.sigma2, self.hyper.beta, self.hyper.gamma);
        let f = load_from_density(&bbar_density, &self.asm.volumes, dim);
        let (sol, report) = solve_spd_with_report(&k, &f, DEFAULT_CG_TOL)?;
        if report.min_ritz.is_finite() && report.min_ritz <= 0.0 {
            return Err(SolveError::NotConverged { iterations: report.iterations });
        }
        Ok(match self.hyper.update_form {
            UpdateForm::Total => sol,
            UpdateForm::Incremental => state.displacement.iter().zip(&sol).map(|(u, d)| u + d).collect(),
        })
    }

    fn bl_step(&self, p: &Responsibilities, displacement: &[f64]) -> Result<f64, SolveError> {
        probabilistic::update_sigma(
            p,
            &probabilistic::centroids(self.mesh, displacement),
            self.data,
            self.mesh.dim,
            self.sigma_floor,
        )
    }

    fn run(&self) -> Result<RecoveryResult, SolveError> {
        let mut state = self.initial_state()?;
        let initial_sigma2 = state.sigma2;
        let initial_potential = state.potential;
        let threshold = self.hyper.tol * self.mesh.bbox_diagonal();
        let mut history = Vec::new();
        let mut converged = false;
        for n in 0..self.hyper.max_iter {
            let u_new = self.fe_step(&state)?;
            let s_new = self.bl_step(&state.responsibilities, &u_new)?;
            let increment = u_new
                .iter()
                .zip(&state.displacement)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            state = self.state(n + 1, u_new, s_new)?;
            history.push(IterationRecord { sigma2: state.sigma2, potential: state.potential, increment });
            log::debug!(
                "iter {:4}  sigma2 {:.6e}  potential {:.10e}  increment {:.3e}",
                n + 1,
                state.sigma2,
                state.potential,
                increment
            );
            if increment <= threshold {
                converged = true;
                break;
            }
        }
        Ok(RecoveryResult {
            displacement: state.displacement,
            iterations: history.len(),
            history,
            converged,
            initial_sigma2,
            initial_potential,
            sigma_floor: self.sigma_floor,
            direction: self.hyper.direction,
        })
    }
}

impl RecoveryState {
    /// State at `u = 0` with the all-pairs initial variance.
    pub fn initial(mesh: &Mesh, data: &PointSet, material: &Material, hyper: &Hyperparams) -> Result<Self, SolveError> {
        Recovery::new(mesh, data, material, hyper)?.initial_state()
    }

    /// State at a given displacement and variance (posterior re-evaluated).
    pub fn at(
        mesh: &Mesh,
        data: &PointSet,
        material: &Material,
        hyper: &Hyperparams,
        displacement: Vec<f64>,
        sigma2: f64,
    ) -> Result<Self, SolveError> {
        if displacement.len() != mesh.n_dofs() {
            return Err(SolveError::InvalidInput("displacement length".into()));
        }
        Recovery::new(mesh, data, material, hyper)?.state(0, displacement, sigma2)
    }
}

/// One displacement solve with the state's posterior and variance frozen.
pub fn fe_step(
    state: &RecoveryState,
    mesh: &Mesh,
    data: &PointSet,
    material: &Material,
    hyper: &Hyperparams,
) -> Result<Vec<f64>, SolveError> {
    Recovery::new(mesh, data, material, hyper)?.fe_step(state)
}

/// Variance update for the new displacement with the posterior frozen.
pub fn bl_step(
    p: &Responsibilities,
    mesh: &Mesh,
    displacement: &[f64],
    data: &PointSet,
    hyper: &Hyperparams,
) -> Result<f64, SolveError> {
    if displacement.len() != mesh.n_dofs() {
        return Err(SolveError::InvalidInput("displacement length".into()));
    }
    probabilistic::update_sigma(
        p,
        &probabilistic::centroids(mesh, displacement),
        data,
        mesh.dim,
        hyper.resolved_sigma_floor(data),
    )
}

/// Runs the staggered iteration to convergence or `max_iter`.
pub fn recover(mesh: &Mesh, data: &PointSet, material: &Material, hyper: &Hyperparams) -> Result<RecoveryResult, SolveError> {
    Recovery::new(mesh, data, material, hyper)?.run()
}

/// Discrete objective minimized by the FE-step (up to constants):
///
/// ```text
/// Q(u, s2) = sum_mk P(m,k) (|X_m + u_m - x_k|^2 / (2 s2) + D/2 ln s2)
///          + beta sum_m pbar_m W_m(u) + gamma/2 sum_m V_m |u_m|^2
/// ```
pub fn objective_q(
    mesh: &Mesh,
    displacement: &[f64],
    p: &Responsibilities,
    sigma2: f64,
    data: &PointSet,
    material: &Material,
    hyper: &Hyperparams,
) -> Result<f64, SolveError> {
    let c = probabilistic::centroids(mesh, displacement);
    let partial = par::map_range(data.len(), |k| {
        let col = p.column(k);
        c.iter().zip(col).map(|(cm, w)| w * sq_dist(cm, &data.points[k])).sum::<f64>()
    });
    let fit = partial.iter().sum::<f64>() / (2.0 * sigma2) + p.total_mass() * 0.5 * mesh.dim as f64 * sigma2.ln();
    let pbar = equivalent_probability(p);
    let w = nodal_energy_density(mesh, displacement, material)?;
    let prior: f64 = pbar.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * hyper.beta;
    let v = mesh.lumped_volumes(material.integration_thickness())?;
    Ok(fit + prior + regularization_term(displacement, &v, mesh.dim, hyper.gamma))
}
