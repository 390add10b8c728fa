//! Scenario drivers: staggered quasi-static phase-field solver (2D
//! anti-plane shear and 1D bar), sharp-crack and double-well minimizers.

mod problem;
mod profile;
mod staggered;

pub use problem::{irreversibility_penalty, PhaseFieldProblem};
pub use profile::{
    dissipation_profile, sharp_crack_location, double_well_minimize, DissipationProfile, DOUBLE_WELL_TILT_LIMIT,
    PROFILE_LENGTH,
};
pub use staggered::{
    run_quasistatic, solve_bar_phasefield, staggered_step, FractureState, LoadSchedule, SolverParams,
    StaggeredCriterion,
};

use thiserror::Error;

use crate::fem::FemError;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("phase-field Newton did not converge in {iterations} iterations (residual {residual:e})")]
    Newton { iterations: usize, residual: f64 },
    #[error("staggered iteration did not converge in {iterations} iterations (residual {residual:e})")]
    Staggered { iterations: usize, residual: f64 },
    #[error("loading step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SolverError>,
    },
}
