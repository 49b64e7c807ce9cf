//! Recovery of point-wise deformation maps between an undeformed mesh and a
//! deformed point set, using a Gaussian-mixture likelihood with a linear
//! elastic energy prior solved by finite elements.
//!
//! The pieces:
//!
//! - [`mesh`]: simplex meshes, point sets, MSH/VTK/point-cloud I/O
//! - [`elasticity`]: constitutive law and element kernels
//! - [`probabilistic`]: posterior responsibilities, nodal mass/force, potential
//! - [`solver`]: FE-step / BL-step recovery loop
//! - [`forward`]: linear elastic BVP solver used to manufacture ground truth
//! - [`cpd`]: non-rigid coherent point drift baseline
//! - [`metrics`]: error reports and convergence logs
//!
//! Inner loops (responsibility columns, element kernels, kernel matrices) run
//! on rayon when the default `parallel` feature is on; results are bitwise
//! identical with the feature off.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod cpd;
pub mod elasticity;
pub mod error;
pub mod forward;
pub mod mesh;
pub mod metrics;
pub mod par;
pub mod probabilistic;
pub mod solver;
pub mod sparse;

pub use error::{MeshError, SolveError};
pub use mesh::{Mesh, PointSet};
