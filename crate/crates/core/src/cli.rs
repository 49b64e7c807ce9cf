//! Command-line entry points. Each command returns a process exit code:
//! 0 on success, 2 when an iteration stopped at `max_iter` without
//! converging, 1 on any error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_boundary_conditions, RunConfig};
use crate::cpd::cpd_register;
use crate::error::SolveError;
use crate::forward::{deform_mesh, forward_solve};
use crate::mesh::{
    parse_point_cloud, read_msh, read_vtk, sq_dist, write_msh, write_point_cloud, write_vtk, Mesh, Point, PointField,
    PointSet,
};
use crate::metrics::{average_nodal_error, convergence_csv, convergence_log};
use crate::solver::recover;

#[derive(Debug, Parser)]
#[command(name = "vbifem", version, about = "Deformation recovery between a finite element mesh and a point set")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Recover the displacement that carries the mesh onto the data.
    Recover(RecoverArgs),
    /// Solve a linear elastic problem and write the deformed configuration.
    Forward(ForwardArgs),
    /// Average nodal error between recovered and true positions.
    Compare(CompareArgs),
    /// Coherent point drift registration with the same inputs as `recover`.
    BaselineCpd(RecoverArgs),
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Gmsh MSH 2.2 mesh whose nodes act as mixture centroids.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Point cloud (.xyz/.txt columns), MSH or VTK file with the data points.
    #[arg(long)]
    pub data: PathBuf,
    /// `key = value` run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output VTK: recovered configuration with a `displacement` field.
    #[arg(long)]
    pub out: PathBuf,
    /// Convergence CSV; defaults to the output path with a `.csv` extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// True target positions of the mesh nodes (MSH, VTK or point cloud);
    /// adds an `error` field and prints the average nodal error.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Boundary condition file.
    #[arg(long)]
    pub bc: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Deformed mesh in MSH format.
    #[arg(long)]
    pub out_mesh: Option<PathBuf>,
    /// Deformed node positions as a point cloud.
    #[arg(long)]
    pub out_cloud: Option<PathBuf>,
    /// Deformed mesh in VTK format with the `displacement` field.
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Recovered positions (VTK, MSH or point cloud).
    #[arg(long)]
    pub recovered: PathBuf,
    /// True positions; a `displacement` field in a VTK file sets the
    /// normalization of the relative error.
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: SolveError },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl From<crate::error::MeshError> for CliError {
    fn from(e: crate::error::MeshError) -> Self {
        CliError::Solve(e.into())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn input<T>(path: &Path, r: Result<T, impl Into<SolveError>>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input { path: path.to_path_buf(), source: e.into() })
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

fn load_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = read(path)?;
    let (mesh, stats) = input(path, read_msh(&text))?;
    if stats.skipped > 0 {
        log::warn!("{}: skipped {} unsupported elements", path.display(), stats.skipped);
    }
    Ok(mesh)
}

/// Points plus the optional `displacement` field of a VTK file.
fn load_points(path: &Path, dim: usize) -> Result<(PointSet, Option<Vec<Point>>), CliError> {
    let text = read(path)?;
    match extension(path).as_str() {
        "msh" => Ok((PointSet::from(&input(path, read_msh(&text))?.0), None)),
        "vtk" => {
            let v = input(path, read_vtk(&text))?;
            let disp = v.vectors("displacement").map(<[Point]>::to_vec);
            Ok((input(path, PointSet::new(dim, v.points))?, disp))
        }
        _ => Ok((input(path, parse_point_cloud(&text, dim))?, None)),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => input(p, RunConfig::parse(&read(p)?)),
        None => Ok(RunConfig::default()),
    }
}

fn flat_to_points(flat: &[f64], dim: usize) -> Vec<Point> {
    flat.chunks(dim)
        .map(|c| {
            let mut p = [0.0; 3];
            p[..dim].copy_from_slice(c);
            p
        })
        .collect()
}

/// Writes the recovered configuration and reports against `--truth`.
fn write_recovered(
    args: &RecoverArgs,
    mesh: &Mesh,
    displacement: &[f64],
    csv: &str,
) -> Result<(), CliError> {
    let recovered = mesh.displaced(displacement);
    let mut fields = BTreeMap::new();
    fields.insert("displacement".to_string(), PointField::from_flat(displacement, mesh.dim));
    if let Some(tp) = &args.truth {
        let (truth, _) = load_points(tp, mesh.dim)?;
        let report = average_nodal_error(&recovered.coords, &truth.points, &mesh.coords)
            .map_err(|e| CliError::Input { path: tp.clone(), source: e })?;
        println!("mean nodal error {:.6e}", report.mean_abs_error);
        println!("relative error {:.4}%", report.relative_percent);
        fields.insert("error".to_string(), PointField::Scalars(report.per_node));
    }
    write(&args.out, &write_vtk(&recovered, &fields)?)?;
    let log = args.log.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    write(&log, csv)?;
    Ok(())
}

fn recover_inputs(args: &RecoverArgs) -> Result<(Mesh, PointSet, RunConfig), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mesh = load_mesh(&args.mesh)?;
    let (data, _) = load_points(&args.data, mesh.dim)?;
    Ok((mesh, data, config))
}

fn run_recover(args: &RecoverArgs) -> Result<bool, CliError> {
    let (mesh, data, config) = recover_inputs(args)?;
    let material = config.material(mesh.dim)?;
    let result = recover(&mesh, &data, &material, &config.hyper)?;
    println!(
        "{} after {} iterations, sigma2 {:.6e}",
        if result.converged { "converged" } else { "stopped at max_iter" },
        result.iterations,
        result.history.last().map_or(result.initial_sigma2, |h| h.sigma2)
    );
    write_recovered(args, &mesh, &result.displacement, &convergence_csv(&convergence_log(&result)))?;
    Ok(result.converged)
}

fn run_cpd(args: &RecoverArgs) -> Result<bool, CliError> {
    let (mesh, data, config) = recover_inputs(args)?;
    let result = cpd_register(&PointSet::from(&mesh), &data, &config.cpd)?;
    println!(
        "{} after {} iterations",
        if result.converged { "converged" } else { "stopped at max_iter" },
        result.iterations
    );
    let mut csv = String::from("iter,sigma2\n");
    for (i, s) in result.sigma2_history.iter().enumerate() {
        csv.push_str(&format!("{},{:e}\n", i + 1, s));
    }
    write_recovered(args, &mesh, &result.displacement, &csv)?;
    Ok(result.converged)
}

fn run_forward(args: &ForwardArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mesh = load_mesh(&args.mesh)?;
    let bcs = input(&args.bc, parse_boundary_conditions(&read(&args.bc)?, mesh.dim))?;
    let material = config.material(mesh.dim)?;
    let solution = forward_solve(&mesh, &material, &bcs)?;
    let deformed = deform_mesh(&mesh, &solution.displacement)?;
    if !deformed.inverted.is_empty() {
        log::warn!("{} elements are inverted in the deformed configuration", deformed.inverted.len());
    }
    let max = flat_to_points(&solution.displacement, mesh.dim)
        .iter()
        .map(|u| sq_dist(u, &[0.0; 3]).sqrt())
        .fold(0.0, f64::max);
    println!("max displacement {max:.6e}");
    if let Some(p) = &args.out_mesh {
        write(p, &write_msh(&deformed.mesh))?;
    }
    if let Some(p) = &args.out_cloud {
        write(p, &write_point_cloud(&deformed.points))?;
    }
    if let Some(p) = &args.out_truth {
        let mut fields = BTreeMap::new();
        fields.insert("displacement".to_string(), PointField::from_flat(&solution.displacement, mesh.dim));
        write(p, &write_vtk(&deformed.mesh, &fields)?)?;
    }
    Ok(())
}

fn dim_of(path: &Path) -> Result<usize, CliError> {
    let text = read(path)?;
    match extension(path).as_str() {
        "msh" => Ok(input(path, read_msh(&text))?.0.dim),
        "vtk" => Ok(input(path, read_vtk(&text))?.dim()),
        _ => {
            let cols = text
                .lines()
                .map(str::trim)
                .find(|l| !l.is_empty() && !l.starts_with('#'))
                .map_or(0, |l| l.split_whitespace().count());
            Ok(cols)
        }
    }
}

fn run_compare(args: &CompareArgs) -> Result<(), CliError> {
    let dim = dim_of(&args.truth)?;
    let (truth, truth_disp) = load_points(&args.truth, dim)?;
    let (recovered, _) = load_points(&args.recovered, dim)?;
    let reference: Vec<Point> = match truth_disp {
        Some(d) if d.len() == truth.len() => {
            truth.points.iter().zip(&d).map(|(x, u)| [x[0] - u[0], x[1] - u[1], x[2] - u[2]]).collect()
        }
        _ => truth.points.clone(),
    };
    let report = average_nodal_error(&recovered.points, &truth.points, &reference)?;
    println!("nodes {}", report.n);
    println!("mean nodal error {:.6e}", report.mean_abs_error);
    println!("relative error {:.4}%", report.relative_percent);
    Ok(())
}

fn exit_code(r: Result<bool, CliError>) -> i32 {
    match r {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn cmd_recover(args: &RecoverArgs) -> i32 {
    exit_code(run_recover(args))
}

pub fn cmd_baseline_cpd(args: &RecoverArgs) -> i32 {
    exit_code(run_cpd(args))
}

pub fn cmd_forward(args: &ForwardArgs) -> i32 {
    exit_code(run_forward(args).map(|_| true))
}

pub fn cmd_compare(args: &CompareArgs) -> i32 {
    exit_code(run_compare(args).map(|_| true))
}

pub fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Recover(a) => cmd_recover(a),
        Command::Forward(a) => cmd_forward(a),
        Command::Compare(a) => cmd_compare(a),
        Command::BaselineCpd(a) => cmd_baseline_cpd(a),
    }
}
