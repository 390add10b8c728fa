use super::SolverError;
use crate::fem::{Coefficient, Dissipation, P1Geometry, PhaseFieldParams};
use crate::mesh::{IntervalMesh, NodeMarker, TriMesh};

/// `gamma = G_c / l * (1 / tol_ir^2 - 1)`.
pub fn irreversibility_penalty(toughness: f64, length_scale: f64, tol_ir: f64) -> f64 {
    toughness / length_scale * (1.0 / (tol_ir * tol_ir) - 1.0)
}

/// Discretized phase-field problem: geometry, material data and the
/// displacement constraints `u_i = factor_i * u_bar`.
#[derive(Clone, Debug)]
pub struct PhaseFieldProblem {
    pub geometry: P1Geometry,
    pub params: PhaseFieldParams,
    pub dirichlet: Vec<(usize, f64)>,
}

impl PhaseFieldProblem {
    /// Anti-plane shear of the notched square: `u = -u_bar` on the top edge
    /// left of the slit, `u = +u_bar` right of it; the phase field is free.
    pub fn antiplane(
        mesh: &TriMesh,
        shear_modulus: f64,
        toughness: f64,
        length_scale: f64,
        dissipation: Dissipation,
        tol_ir: f64,
    ) -> Result<Self, SolverError> {
        if !(tol_ir > 0.0 && tol_ir < 1.0) {
            return Err(SolverError::InvalidArgument(format!("tol_ir must lie in (0, 1), got {tol_ir}")));
        }
        let side = mesh.geometry().side();
        let tol = mesh.geometry().tolerance();
        let dirichlet: Vec<(usize, f64)> = mesh
            .markers()
            .iter()
            .enumerate()
            .filter_map(|(i, m)| match m {
                NodeMarker::DirMinus => Some((i, -1.0)),
                NodeMarker::DirPlus => Some((i, 1.0)),
                NodeMarker::SlitLeft if mesh.nodes()[i][1] >= side - tol => Some((i, -1.0)),
                NodeMarker::SlitRight if mesh.nodes()[i][1] >= side - tol => Some((i, 1.0)),
                _ => None,
            })
            .collect();
        if !dirichlet.iter().any(|d| d.1 < 0.0) || !dirichlet.iter().any(|d| d.1 > 0.0) {
            return Err(SolverError::InvalidArgument("mesh has no loaded top boundary on both sides".into()));
        }
        let problem = Self {
            geometry: P1Geometry::from_trimesh(mesh),
            params: PhaseFieldParams {
                modulus: Coefficient::Uniform(shear_modulus),
                toughness: Coefficient::Uniform(toughness),
                length_scale,
                dissipation,
                penalty: irreversibility_penalty(toughness, length_scale, tol_ir),
            },
            dirichlet,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Bar in tension: `u(0) = 0`, `u(L) = u_bar`, no irreversibility
    /// penalty. Coefficients are per cell.
    pub fn bar(
        grid: &IntervalMesh,
        stiffness: Coefficient,
        toughness: Coefficient,
        length_scale: f64,
        dissipation: Dissipation,
    ) -> Result<Self, SolverError> {
        let problem = Self {
            geometry: P1Geometry::from_interval(grid),
            params: PhaseFieldParams {
                modulus: stiffness,
                toughness,
                length_scale,
                dissipation,
                penalty: 0.0,
            },
            dirichlet: vec![(0, 0.0), (grid.n_nodes() - 1, 1.0)],
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn n_nodes(&self) -> usize {
        self.geometry.n_nodes()
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n_el = self.geometry.elements().len();
        for (name, c) in [("modulus", &self.params.modulus), ("toughness", &self.params.toughness)] {
            let ok = match c {
                Coefficient::Uniform(v) => *v > 0.0 && v.is_finite(),
                Coefficient::PerElement(v) => v.len() == n_el && v.iter().all(|x| *x > 0.0 && x.is_finite()),
            };
            if !ok {
                return Err(SolverError::InvalidArgument(format!(
                    "{name} must be positive and finite on each of the {n_el} elements"
                )));
            }
        }
        if !(self.params.length_scale > 0.0) {
            return Err(SolverError::InvalidArgument(format!(
                "length scale must be positive, got {}",
                self.params.length_scale
            )));
        }
        if let Some((i, _)) = self.dirichlet.iter().find(|(i, _)| *i >= self.n_nodes()) {
            return Err(SolverError::InvalidArgument(format!("constrained node {i} out of range")));
        }
        Ok(())
    }
}
