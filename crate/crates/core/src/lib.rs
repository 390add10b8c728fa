//! Stochastic phase-field brittle fracture.
//!
//! Multiple competing crack patterns of a non-convex variational fracture
//! problem are described by their probabilities: every Monte Carlo
//! realization solves a randomly perturbed deterministic problem, and the
//! ensemble of final crack fields is post-processed into crack-type
//! probabilities, moment fields, densities along a probe line and
//! conditional (Bayes-updated) crack-type probabilities.
//!
//! Module map:
//!
//! * [`mesh`] - 1D interval meshes, the anti-plane shear triangulation with
//!   slit and hole, hole deformation and line probes.
//! * [`fem`] - P1 assembly, Dirichlet elimination, PCG, energies.
//! * [`solvers`] - staggered quasi-static driver, 1D bar drivers and the
//!   double-well toy problem.
//! * [`stochastic`] - reproducible random inputs.
//! * [`montecarlo`] - ensemble driver and estimators.
//! * [`analysis`] - crack classification, KDE, Bayes conditioning.
//! * [`config`], [`io`], [`app`] - run configuration, artifact formats and
//!   the command implementations behind the `stofrac` binary.

pub mod analysis;
pub mod app;
pub mod config;
pub mod fem;
pub mod io;
pub mod mesh;
pub mod montecarlo;
pub mod solvers;
pub mod stochastic;

mod error;

pub use error::Error;
