//! P1 finite elements on intervals and triangles.
//!
//! All element integrals use the one-point (centroid) rule: exact for the
//! P1 stiffness, and the convention every energy and residual in the crate
//! shares, so that residuals are the exact derivatives of the discrete
//! energies.

mod assembly;
mod geometry;
mod sparse;

pub use assembly::{
    assemble_centroid_mass, assemble_displacement_matrix, assemble_displacement_residual, assemble_phase_jacobian,
    assemble_phase_residual, assemble_weighted_stiffness, evaluate_energy, Coefficient, Dissipation, EnergyBreakdown,
    PhaseFieldParams,
};
pub use geometry::{Element, P1Geometry};
pub use sparse::{solve_spd, solve_tridiagonal, CsrMatrix, CsrPattern, SolveStats, SparseSystem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite: {0}")]
    Indefinite(String),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<(), FemError> {
    if expected == got {
        Ok(())
    } else {
        Err(FemError::ShapeMismatch { expected, got })
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
