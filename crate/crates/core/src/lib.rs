//! Multiscale solvers for quasi-static linear thermoelasticity on the unit
//! square.
//!
//! The crate provides a fine-grid P1 reference solver, the classical
//! decoupled LOD method and the coupled ME-LOD method, in which every
//! multiscale basis function is a joint displacement/temperature field built
//! from a patch-local saddle-point problem for the coupled operator.
//!
//! Typical pipeline:
//!
//! ```no_run
//! use melod::{assembly, coeffs, fem, grid, metrics, mslod, msstepper, problem};
//!
//! let grid = grid::build_nested_grid(5, 3)?;
//! let field = coeffs::CoefficientField::uniform(&grid, 1.0, 1.0, 1.0, 0.1);
//! let bs = assembly::assemble_block_system(&grid, &field)?;
//! let setup = problem::Problem::test1();
//! let reference = fem::run(&grid, &bs, &setup, 0.02, 10)?;
//! let basis = mslod::build_basis(&grid, &bs, mslod::Method::MeLod, 2, 1.0, 1.0)?;
//! let (a, b) = assembly::compose_time_operators(&bs, 0.02)?;
//! let reduced = msstepper::reduce(&basis, &a, &b)?;
//! let ms = msstepper::ms_run(&reduced, &grid, &bs, &setup, 0.02, 10)?;
//! let report = metrics::energy_errors(&ms, &reference, &bs, None)?;
//! println!("{:?}", report.final_total_energy());
//! # Ok::<(), melod::Error>(())
//! ```

pub mod assembly;
pub mod coeffs;
pub mod experiment;
pub mod fem;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod mslod;
pub mod msstepper;
pub mod par;
pub mod problem;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid levels: fine {fine}, coarse {coarse} (need 1 <= coarse <= fine <= 10)")]
    InvalidGridLevels { fine: u32, coarse: u32 },
    #[error("coarse node {0} is not an interior node")]
    InvalidNode(usize),
    #[error("invalid field spec: {0}")]
    InvalidFieldSpec(String),
    #[error("covariance factorization failed on a {0}x{0} lattice even with a nugget")]
    CovarianceFactorization(usize),
    #[error("coefficient {name} is not positive and finite on element {element}")]
    NonPositiveCoefficient { name: &'static str, element: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("gamma parameters must lie in (0, 1], got ({0}, {1})")]
    InvalidGamma(f64, f64),
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("factorization of {context} failed: {reason}")]
    Factorization { context: String, reason: String },
    #[error("singular saddle-point system on the patch of coarse node {node} (k = {k}, {n_fine} fine dofs, {n_constraints} constraints)")]
    SingularKkt {
        node: usize,
        k: usize,
        n_fine: usize,
        n_constraints: usize,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
