use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_len, CsrMatrix, FemError, P1Geometry};

/// Local dissipation function `w` of the Ambrosio-Tortorelli family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dissipation {
    /// `w(a) = a`, `c_w = 8/3`.
    At1,
    /// `w(a) = a^2`, `c_w = 2`.
    At2,
}

impl Dissipation {
    /// Normalization `4 * int_0^1 sqrt(w(t)) dt`.
    pub fn c_w(self) -> f64 {
        match self {
            Dissipation::At1 => 8.0 / 3.0,
            Dissipation::At2 => 2.0,
        }
    }

    pub fn w(self, a: f64) -> f64 {
        match self {
            Dissipation::At1 => a,
            Dissipation::At2 => a * a,
        }
    }

    pub fn dw(self, a: f64) -> f64 {
        match self {
            Dissipation::At1 => 1.0,
            Dissipation::At2 => 2.0 * a,
        }
    }

    pub fn d2w(self, _a: f64) -> f64 {
        match self {
            Dissipation::At1 => 0.0,
            Dissipation::At2 => 2.0,
        }
    }
}

impl FromStr for Dissipation {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "at1" => Ok(Dissipation::At1),
            "at2" => Ok(Dissipation::At2),
            _ => Err(FemError::InvalidArgument(format!("unknown dissipation model '{s}'"))),
        }
    }
}

/// Piecewise-constant element coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Uniform(f64),
    PerElement(Vec<f64>),
}

impl Coefficient {
    pub fn at(&self, e: usize) -> f64 {
        match self {
            Coefficient::Uniform(v) => *v,
            Coefficient::PerElement(v) => v[e],
        }
    }

    /// Element averages of a piecewise-linear nodal function.
    pub fn from_nodal(geometry: &P1Geometry, nodal: &[f64]) -> Self {
        Coefficient::PerElement(geometry.elements().iter().map(|e| e.centroid_value(nodal)).collect())
    }

    fn check(&self, geometry: &P1Geometry) -> Result<(), FemError> {
        match self {
            Coefficient::Uniform(_) => Ok(()),
            Coefficient::PerElement(v) => check_len(geometry.elements().len(), v.len()),
        }
    }
}

/// Material and regularization data of the phase-field functional
///
/// `E(u,a) = 1/2 int modulus (1-a)^2 |grad u|^2
///         + int toughness/c_w (w(a)/l + l |grad a|^2)
///         + penalty/2 int <a - a_prev>_-^2`
///         + penalty/2 sum_i m_i <a_i - 1>_+^2`.
///
/// The last term bounds the phase field from above at the nodes (`m_i` is
/// the lumped nodal measure). Centroid quadrature of the reaction terms
/// couples nodes with positive weights, so without it the discrete field
/// can overshoot 1 next to a crack on coarse meshes.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseFieldParams {
    /// Shear modulus (2D) or axial stiffness `YA` (1D bar).
    pub modulus: Coefficient,
    /// `G_c` (2D) or dissipation density `G_c A` (1D bar).
    pub toughness: Coefficient,
    pub length_scale: f64,
    pub dissipation: Dissipation,
    /// Irreversibility and upper-bound penalty weight; zero disables both.
    pub penalty: f64,
}

/// Nodes above 1 with their lumped measure, when the penalty is active.
fn upper_excess<'a>(
    geometry: &P1Geometry,
    alpha: &'a [f64],
    params: &PhaseFieldParams,
) -> impl Iterator<Item = (usize, f64, f64)> + 'a {
    let measure = if params.penalty > 0.0 && alpha.iter().any(|a| *a > 1.0) {
        geometry.nodal_measure()
    } else {
        Vec::new()
    };
    alpha
        .iter()
        .zip(measure)
        .enumerate()
        .filter(|(_, (a, _))| **a > 1.0)
        .map(|(i, (a, m))| (i, a - 1.0, m))
}

impl PhaseFieldParams {
    fn check(&self, geometry: &P1Geometry) -> Result<(), FemError> {
        self.modulus.check(geometry)?;
        self.toughness.check(geometry)?;
        if !(self.length_scale > 0.0) {
            return Err(FemError::InvalidArgument(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.penalty >= 0.0) {
            return Err(FemError::InvalidArgument(format!("penalty must be non-negative, got {}", self.penalty)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub fracture: f64,
    pub penalty: f64,
    pub external: f64,
    pub total: f64,
}

fn macaulay_neg(y: f64) -> f64 {
    y.min(0.0)
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `K_ij = sum_T weight_T int_T grad phi_i . grad phi_j`.
pub fn assemble_weighted_stiffness(geometry: &P1Geometry, weight: &[f64]) -> Result<CsrMatrix, FemError> {
    check_len(geometry.elements().len(), weight.len())?;
    let mut k = CsrMatrix::zeros(Arc::clone(geometry.pattern()));
    let values = k.values_mut();
    for (e, el) in geometry.elements().iter().enumerate() {
        let w = weight[e] * el.measure;
        if w == 0.0 {
            continue;
        }
        let slots = geometry.slots(e);
        for a in 0..el.n {
            for b in 0..el.n {
                values[slots[a * 3 + b]] += w * dot2(el.grads[a], el.grads[b]);
            }
        }
    }
    Ok(k)
}

/// Centroid-rule mass matrix `sum_T weight_T |T| phi_i(c) phi_j(c)`.
pub fn assemble_centroid_mass(geometry: &P1Geometry, weight: &[f64]) -> Result<CsrMatrix, FemError> {
    check_len(geometry.elements().len(), weight.len())?;
    let mut m = CsrMatrix::zeros(Arc::clone(geometry.pattern()));
    let values = m.values_mut();
    for (e, el) in geometry.elements().iter().enumerate() {
        let phi = el.centroid_weight();
        let w = weight[e] * el.measure * phi * phi;
        let slots = geometry.slots(e);
        for a in 0..el.n {
            for b in 0..el.n {
                values[slots[a * 3 + b]] += w;
            }
        }
    }
    Ok(m)
}

/// Matrix of the displacement equation at fixed phase field:
/// weight `modulus (1-a_c)^2`.
pub fn assemble_displacement_matrix(
    geometry: &P1Geometry,
    alpha: &[f64],
    params: &PhaseFieldParams,
) -> Result<CsrMatrix, FemError> {
    check_len(geometry.n_nodes(), alpha.len())?;
    params.check(geometry)?;
    let weight: Vec<f64> = geometry
        .elements()
        .iter()
        .enumerate()
        .map(|(e, el)| {
            let d = 1.0 - el.centroid_value(alpha);
            params.modulus.at(e) * d * d
        })
        .collect();
    assemble_weighted_stiffness(geometry, &weight)
}

/// `E_u(u, a; phi_i)`.
pub fn assemble_displacement_residual(
    geometry: &P1Geometry,
    u: &[f64],
    alpha: &[f64],
    params: &PhaseFieldParams,
) -> Result<Vec<f64>, FemError> {
    let k = assemble_displacement_matrix(geometry, alpha, params)?;
    check_len(geometry.n_nodes(), u.len())?;
    Ok(k.mul_vec(u))
}

/// `E_a(u, a; phi_i)`: driving, local dissipation, gradient and penalty terms.
pub fn assemble_phase_residual(
    geometry: &P1Geometry,
    u: &[f64],
    alpha: &[f64],
    alpha_prev: &[f64],
    params: &PhaseFieldParams,
) -> Result<Vec<f64>, FemError> {
    let n = geometry.n_nodes();
    check_len(n, u.len())?;
    check_len(n, alpha.len())?;
    check_len(n, alpha_prev.len())?;
    params.check(geometry)?;
    let ell = params.length_scale;
    let c_w = params.dissipation.c_w();
    let mut r = vec![0.0; n];
    for (e, el) in geometry.elements().iter().enumerate() {
        let ac = el.centroid_value(alpha);
        let gu = el.gradient(u);
        let ga = el.gradient(alpha);
        let gc = params.toughness.at(e) / c_w;
        let phi = el.centroid_weight();
        let local = -params.modulus.at(e) * (1.0 - ac) * dot2(gu, gu)
            + gc * params.dissipation.dw(ac) / ell
            + params.penalty * macaulay_neg(ac - el.centroid_value(alpha_prev));
        for a in 0..el.n {
            r[el.nodes[a]] += el.measure * (local * phi + gc * 2.0 * ell * dot2(ga, el.grads[a]));
        }
    }
    for (i, excess, m) in upper_excess(geometry, alpha, params) {
        r[i] += params.penalty * m * excess;
    }
    Ok(r)
}

/// Generalized Jacobian of [`assemble_phase_residual`] with respect to the
/// phase field; the penalty contributes on elements where
/// `a_c < a_prev_c`.
pub fn assemble_phase_jacobian(
    geometry: &P1Geometry,
    u: &[f64],
    alpha: &[f64],
    alpha_prev: &[f64],
    params: &PhaseFieldParams,
) -> Result<CsrMatrix, FemError> {
    let n = geometry.n_nodes();
    check_len(n, u.len())?;
    check_len(n, alpha.len())?;
    check_len(n, alpha_prev.len())?;
    params.check(geometry)?;
    let ell = params.length_scale;
    let c_w = params.dissipation.c_w();
    let mut j = CsrMatrix::zeros(Arc::clone(geometry.pattern()));
    let values = j.values_mut();
    for (e, el) in geometry.elements().iter().enumerate() {
        let ac = el.centroid_value(alpha);
        let gu = el.gradient(u);
        let gc = params.toughness.at(e) / c_w;
        let phi = el.centroid_weight();
        let active = ac < el.centroid_value(alpha_prev);
        let reaction = params.modulus.at(e) * dot2(gu, gu)
            + gc * params.dissipation.d2w(ac) / ell
            + if active { params.penalty } else { 0.0 };
        let mass = reaction * el.measure * phi * phi;
        let diffusion = gc * 2.0 * ell * el.measure;
        let slots = geometry.slots(e);
        for a in 0..el.n {
            for b in 0..el.n {
                values[slots[a * 3 + b]] += mass + diffusion * dot2(el.grads[a], el.grads[b]);
            }
        }
    }
    for (i, _, m) in upper_excess(geometry, alpha, params) {
        values[geometry.pattern().diag_slot(i)] += params.penalty * m;
    }
    Ok(j)
}

pub fn evaluate_energy(
    geometry: &P1Geometry,
    u: &[f64],
    alpha: &[f64],
    alpha_prev: &[f64],
    params: &PhaseFieldParams,
) -> Result<EnergyBreakdown, FemError> {
    let n = geometry.n_nodes();
    check_len(n, u.len())?;
    check_len(n, alpha.len())?;
    check_len(n, alpha_prev.len())?;
    params.check(geometry)?;
    let ell = params.length_scale;
    let c_w = params.dissipation.c_w();
    let mut out = EnergyBreakdown::default();
    for (e, el) in geometry.elements().iter().enumerate() {
        let ac = el.centroid_value(alpha);
        let gu = el.gradient(u);
        let ga = el.gradient(alpha);
        let d = 1.0 - ac;
        out.elastic += 0.5 * el.measure * params.modulus.at(e) * d * d * dot2(gu, gu);
        out.fracture +=
            el.measure * params.toughness.at(e) / c_w * (params.dissipation.w(ac) / ell + ell * dot2(ga, ga));
        let neg = macaulay_neg(ac - el.centroid_value(alpha_prev));
        out.penalty += 0.5 * params.penalty * el.measure * neg * neg;
    }
    for (_, excess, m) in upper_excess(geometry, alpha, params) {
        out.penalty += 0.5 * params.penalty * m * excess * excess;
    }
    out.total = out.elastic + out.fracture + out.penalty - out.external;
    Ok(out)
}
