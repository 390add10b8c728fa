use serde::{Deserialize, Serialize};

use super::{PhaseFieldProblem, SolverError};
use crate::fem::{
    assemble_displacement_matrix, assemble_phase_jacobian, assemble_phase_residual, dot, evaluate_energy, norm,
    solve_spd, solve_tridiagonal, Coefficient, CsrMatrix, Dissipation, EnergyBreakdown, SparseSystem,
};
use crate::mesh::IntervalMesh;

/// Stopping rule of the alternate minimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaggeredCriterion {
    /// Euclidean norm of the nodal phase-field residual at the new iterate.
    PhaseResidual,
    /// Euclidean norm of the nodal phase-field increment.
    PhaseIncrement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub tol_newton: f64,
    pub tol_staggered: f64,
    pub max_staggered: usize,
    pub max_newton: usize,
    pub cg_rel_tol: f64,
    pub criterion: StaggeredCriterion,
    /// Keep the total energy after every half-step.
    #[serde(skip)]
    pub record_energies: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tol_newton: 1e-6,
            tol_staggered: 1e-4,
            max_staggered: 5000,
            max_newton: 50,
            cg_rel_tol: 1e-10,
            criterion: StaggeredCriterion::PhaseResidual,
            record_energies: false,
        }
    }
}

impl SolverParams {
    /// Increment-based stopping rule used for the bar.
    pub fn bar() -> Self {
        Self {
            criterion: StaggeredCriterion::PhaseIncrement,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol_newton > 0.0 && self.tol_staggered > 0.0 && self.cg_rel_tol > 0.0) {
            return Err(SolverError::InvalidArgument("solver tolerances must be positive".into()));
        }
        if self.max_staggered == 0 || self.max_newton == 0 {
            return Err(SolverError::InvalidArgument("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// `u_bar_n = n * increment`, `n = 1..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSchedule {
    pub increment: f64,
    pub steps: usize,
}

impl LoadSchedule {
    pub fn values(&self) -> Vec<f64> {
        (1..=self.steps).map(|n| n as f64 * self.increment).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractureState {
    pub step: usize,
    pub load: f64,
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub energy: EnergyBreakdown,
    pub staggered_iterations: usize,
    /// Final value of the stopping quantity.
    pub residual: f64,
    /// Total energy after each half-step once the boundary values are
    /// applied, when requested.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iteration_energies: Vec<f64>,
}

impl FractureState {
    pub fn pristine(n_nodes: usize) -> Self {
        Self {
            step: 0,
            load: 0.0,
            u: vec![0.0; n_nodes],
            alpha: vec![0.0; n_nodes],
            energy: EnergyBreakdown::default(),
            staggered_iterations: 0,
            residual: 0.0,
            iteration_energies: Vec::new(),
        }
    }
}

fn linear_solve(
    problem: &PhaseFieldProblem,
    system: &SparseSystem,
    params: &SolverParams,
    warm: Option<&[f64]>,
) -> Result<Vec<f64>, SolverError> {
    if problem.geometry.is_chain() {
        Ok(solve_tridiagonal(system)?)
    } else {
        let max_iter = 20 * system.rhs.len().max(10);
        Ok(solve_spd(system, params.cg_rel_tol, max_iter, warm)?.0)
    }
}

/// Semismooth Newton for the phase-field equation at fixed displacement.
/// The subproblem minimizes a convex, C1 energy in the phase field, so steps
/// are damped by halving until the energy decreases sufficiently.
fn solve_phase(
    problem: &PhaseFieldProblem,
    u: &[f64],
    alpha: &mut Vec<f64>,
    alpha_prev: &[f64],
    params: &SolverParams,
) -> Result<(), SolverError> {
    let p = &problem.params;
    let g = &problem.geometry;
    let mut r = assemble_phase_residual(g, u, alpha, alpha_prev, p)?;
    let mut r_norm = norm(&r);
    let mut energy = evaluate_energy(g, u, alpha, alpha_prev, p)?.total;
    for _ in 0..params.max_newton {
        if r_norm <= params.tol_newton {
            return Ok(());
        }
        let jac: CsrMatrix = assemble_phase_jacobian(g, u, alpha, alpha_prev, p)?;
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = linear_solve(problem, &SparseSystem::new(jac, rhs), params, None)?;
        let slope = dot(&r, &delta);
        let rounding = 1e-14 * energy.abs().max(1.0);
        let mut t = 1.0;
        let mut trial = alpha.clone();
        let (trial_r, trial_energy) = loop {
            for ((x, a), d) in trial.iter_mut().zip(alpha.iter()).zip(&delta) {
                *x = a + t * d;
            }
            let e = evaluate_energy(g, u, &trial, alpha_prev, p)?.total;
            if e <= energy + 1e-4 * t * slope + rounding || t < 1e-8 {
                break (assemble_phase_residual(g, u, &trial, alpha_prev, p)?, e);
            }
            t *= 0.5;
        };
        *alpha = trial;
        r = trial_r;
        r_norm = norm(&r);
        energy = trial_energy;
    }
    if r_norm <= params.tol_newton {
        return Ok(());
    }
    Err(SolverError::Newton {
        iterations: params.max_newton,
        residual: r_norm,
    })
}

fn solve_displacement(
    problem: &PhaseFieldProblem,
    u: &mut Vec<f64>,
    alpha: &[f64],
    load: f64,
    params: &SolverParams,
) -> Result<(), SolverError> {
    let k = assemble_displacement_matrix(&problem.geometry, alpha, &problem.params)?;
    let mut system = SparseSystem::new(k, vec![0.0; problem.n_nodes()]);
    for &(i, factor) in &problem.dirichlet {
        system.constrain(i, factor * load);
    }
    system.eliminate_constraints();
    *u = linear_solve(problem, &system, params, Some(u))?;
    Ok(())
}

/// One loading step of the alternate minimization, started from `prev`.
pub fn staggered_step(
    problem: &PhaseFieldProblem,
    prev: &FractureState,
    load: f64,
    params: &SolverParams,
) -> Result<FractureState, SolverError> {
    params.validate()?;
    let n = problem.n_nodes();
    if prev.u.len() != n || prev.alpha.len() != n {
        return Err(SolverError::InvalidArgument(format!(
            "state has {} / {} values for {n} nodes",
            prev.u.len(),
            prev.alpha.len()
        )));
    }
    let g = &problem.geometry;
    let p = &problem.params;
    let alpha_prev = &prev.alpha;
    let mut u = prev.u.clone();
    let mut alpha = prev.alpha.clone();
    let mut energies = Vec::new();
    let mut measure = f64::INFINITY;
    for k in 1..=params.max_staggered {
        let alpha_old = match params.criterion {
            StaggeredCriterion::PhaseIncrement => Some(alpha.clone()),
            StaggeredCriterion::PhaseResidual => None,
        };
        solve_phase(problem, &u, &mut alpha, alpha_prev, params)?;
        // before the first displacement solve the boundary values are stale
        if params.record_energies && k > 1 {
            energies.push(evaluate_energy(g, &u, &alpha, alpha_prev, p)?.total);
        }
        solve_displacement(problem, &mut u, &alpha, load, params)?;
        if params.record_energies {
            energies.push(evaluate_energy(g, &u, &alpha, alpha_prev, p)?.total);
        }
        measure = match alpha_old {
            // the first phase update still sees the previous step's displacement
            Some(_) if k == 1 => f64::INFINITY,
            Some(old) => old.iter().zip(&alpha).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            None => norm(&assemble_phase_residual(g, &u, &alpha, alpha_prev, p)?),
        };
        if measure <= params.tol_staggered {
            let energy = evaluate_energy(g, &u, &alpha, alpha_prev, p)?;
            return Ok(FractureState {
                step: prev.step + 1,
                load,
                u,
                alpha,
                energy,
                staggered_iterations: k,
                residual: measure,
                iteration_energies: energies,
            });
        }
    }
    Err(SolverError::Staggered {
        iterations: params.max_staggered,
        residual: measure,
    })
}

/// Quasi-static trajectory from the pristine state; step `n` starts from
/// the converged step `n - 1`.
pub fn run_quasistatic(
    problem: &PhaseFieldProblem,
    loads: &[f64],
    params: &SolverParams,
) -> Result<Vec<FractureState>, SolverError> {
    if loads.windows(2).any(|w| w[1] < w[0]) {
        return Err(SolverError::InvalidArgument("loading schedule must be non-decreasing".into()));
    }
    let mut states = Vec::with_capacity(loads.len());
    let mut prev = FractureState::pristine(problem.n_nodes());
    for (n, &load) in loads.iter().enumerate() {
        let next = staggered_step(problem, &prev, load, params).map_err(|e| SolverError::AtStep {
            step: n + 1,
            source: Box::new(e),
        })?;
        states.push(next.clone());
        prev = next;
    }
    Ok(states)
}

/// Final state of the bar under `loads`, with nodal toughness samples
/// interpolated linearly between nodes.
pub fn solve_bar_phasefield(
    grid: &IntervalMesh,
    stiffness: f64,
    toughness: &[f64],
    length_scale: f64,
    loads: &[f64],
    params: &SolverParams,
) -> Result<FractureState, SolverError> {
    if toughness.len() != grid.n_nodes() {
        return Err(SolverError::InvalidArgument(format!(
            "{} toughness samples for {} nodes",
            toughness.len(),
            grid.n_nodes()
        )));
    }
    let geometry = crate::fem::P1Geometry::from_interval(grid);
    let problem = PhaseFieldProblem::bar(
        grid,
        Coefficient::Uniform(stiffness),
        Coefficient::from_nodal(&geometry, toughness),
        length_scale,
        Dissipation::At2,
    )?;
    let states = run_quasistatic(&problem, loads, params)?;
    Ok(states.into_iter().last().unwrap_or_else(|| FractureState::pristine(grid.n_nodes())))
}
