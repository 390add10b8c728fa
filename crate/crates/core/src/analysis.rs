//! Crack classification, densities along the probe line and Bayes
//! conditioning of crack-type probabilities.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{distance_to_polygon, IntervalMesh, LineProbe, TriMesh};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid phase field: value {value} at node {node} outside [-0.1, 1.1]")]
    InvalidField { node: usize, value: f64 },
    #[error("undefined observation: total density {density:e} at s = {s} is below the floor")]
    UndefinedObservation { s: f64, density: f64 },
}

/// Crack-path type of a final 2D phase field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackClass {
    /// Nearly vertical crack that misses the hole.
    Type1,
    /// Through the hole, leaving it vertically.
    Type2,
    /// Through the hole, leaving it horizontally.
    Type3,
    Other,
    Failed,
}

impl CrackClass {
    pub const CLASSIFIED: [CrackClass; 3] = [CrackClass::Type1, CrackClass::Type2, CrackClass::Type3];

    pub fn as_str(self) -> &'static str {
        match self {
            CrackClass::Type1 => "type1",
            CrackClass::Type2 => "type2",
            CrackClass::Type3 => "type3",
            CrackClass::Other => "other",
            CrackClass::Failed => "failed",
        }
    }
}

impl fmt::Display for CrackClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrackClass {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "type1" => CrackClass::Type1,
            "type2" => CrackClass::Type2,
            "type3" => CrackClass::Type3,
            "other" => CrackClass::Other,
            "failed" => CrackClass::Failed,
            _ => return Err(AnalysisError::InvalidArgument(format!("unknown crack class '{s}'"))),
        })
    }
}

/// Thresholds of the 2D classifier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierParams {
    /// Damage level counted as crack.
    pub threshold: f64,
    /// Hole-contact band width in units of `h_min`.
    pub contact_width: f64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self {
            threshold: 0.9,
            contact_width: 2.0,
        }
    }
}

fn check_field(alpha: &[f64]) -> Result<(), AnalysisError> {
    match alpha.iter().position(|a| !(*a >= -0.1 && *a <= 1.1)) {
        Some(node) => Err(AnalysisError::InvalidField { node, value: alpha[node] }),
        None => Ok(()),
    }
}

/// Classifies the crack path of a final phase field on the notched square.
///
/// Damaged nodes (`alpha >= threshold`) are grouped by connectivity over
/// mesh edges. The crack is the component holding the slit tip; when it
/// reaches the hole band, every damaged component touching the band joins
/// it. Exits: bottom edge below the hole (Type 2) or far from it (Type 1),
/// left edge (Type 3).
pub fn classify_crack_2d(alpha: &[f64], mesh: &TriMesh, params: &ClassifierParams) -> Result<CrackClass, AnalysisError> {
    if alpha.len() != mesh.n_nodes() {
        return Err(AnalysisError::InvalidArgument(format!(
            "field has {} values for {} nodes",
            alpha.len(),
            mesh.n_nodes()
        )));
    }
    check_field(alpha)?;
    let Some(tip) = mesh.slit_tip_node() else {
        return Err(AnalysisError::InvalidArgument("mesh has no slit tip".into()));
    };
    let damaged: Vec<bool> = alpha.iter().map(|a| *a >= params.threshold).collect();
    if !damaged[tip] {
        return Ok(CrackClass::Other);
    }
    let neighbors = mesh.node_neighbors();
    let mut component = vec![usize::MAX; alpha.len()];
    let mut n_components = 0;
    for seed in 0..alpha.len() {
        if !damaged[seed] || component[seed] != usize::MAX {
            continue;
        }
        component[seed] = n_components;
        let mut queue = VecDeque::from([seed]);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if damaged[j] && component[j] == usize::MAX {
                    component[j] = n_components;
                    queue.push_back(j);
                }
            }
        }
        n_components += 1;
    }

    let g = mesh.geometry();
    let hole = mesh.hole_polygon();
    let band = params.contact_width * mesh.h_min();
    let in_band = |i: usize| distance_to_polygon(mesh.nodes()[i], &hole) <= band;
    let main = component[tip];
    let touching: Vec<bool> = {
        let mut t = vec![false; n_components];
        for i in 0..alpha.len() {
            if damaged[i] && in_band(i) {
                t[component[i]] = true;
            }
        }
        t
    };
    let contact = touching[main];
    let in_crack = |i: usize| damaged[i] && (component[i] == main || (contact && touching[component[i]]));

    let tol = 1e-6 * g.a;
    let below_hole = g.hole_center[0] + g.radius + band;
    let (mut bottom_near, mut bottom_far, mut left) = (false, false, false);
    for (i, p) in mesh.nodes().iter().enumerate() {
        if !in_crack(i) {
            continue;
        }
        if p[1] <= tol {
            if p[0] <= below_hole {
                bottom_near = true;
            } else {
                bottom_far = true;
            }
        }
        if p[0] <= tol {
            left = true;
        }
    }
    Ok(match (contact, bottom_near, bottom_far, left) {
        (false, true, _, _) | (false, _, true, _) => CrackClass::Type1,
        (true, true, _, _) => CrackClass::Type2,
        (true, false, _, true) => CrackClass::Type3,
        (true, false, true, false) => CrackClass::Type1,
        _ => CrackClass::Other,
    })
}

/// Index of the attractor holding the crack of a 1D phase field: the
/// argmax of `alpha` (lowest index on ties) must lie within `window` of an
/// attractor and reach `threshold`.
pub fn classify_crack_1d(
    alpha: &[f64],
    grid: &IntervalMesh,
    attractors: &[f64],
    threshold: f64,
    window: f64,
) -> Option<usize> {
    if alpha.is_empty() || alpha.len() != grid.n_nodes() {
        return None;
    }
    let k = argmax(alpha);
    if alpha[k] < threshold {
        return None;
    }
    nearest_attractor(grid.nodes()[k], attractors, window)
}

/// Attractor within `window` of `x`, nearest first.
pub fn nearest_attractor(x: f64, attractors: &[f64], window: f64) -> Option<usize> {
    attractors
        .iter()
        .enumerate()
        .map(|(i, c)| (i, (x - c).abs()))
        .filter(|(_, d)| *d < window)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Probe coordinate `s` of the largest interpolated phase field along the
/// line, lowest `s` on ties (values equal to 1e-12 relative).
pub fn intersection_coordinate(alpha: &[f64], mesh: &TriMesh, probe: &LineProbe) -> Result<f64, AnalysisError> {
    if alpha.len() != mesh.n_nodes() {
        return Err(AnalysisError::InvalidArgument(format!(
            "field has {} values for {} nodes",
            alpha.len(),
            mesh.n_nodes()
        )));
    }
    let values = probe.evaluate(mesh, alpha);
    let mut best: Option<(f64, f64)> = None;
    for (sample, v) in probe.samples.iter().zip(values) {
        let Some(v) = v else { continue };
        // interpolation round-off must not break ties
        if best.map_or(true, |(_, b)| v > b + 1e-12 * b.abs().max(1.0)) {
            best = Some((sample.s, v));
        }
    }
    best.map(|(s, _)| s)
        .ok_or_else(|| AnalysisError::InvalidArgument("every probe sample lies outside the domain".into()))
}

/// Kernel density estimate on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density1D {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl Density1D {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn evaluate(&self, s: f64) -> f64 {
        let n = self.grid.len();
        if n == 0 || s < self.grid[0] || s > self.grid[n - 1] {
            return 0.0;
        }
        if n == 1 {
            return self.density[0];
        }
        let k = self.grid.partition_point(|g| *g <= s).clamp(1, n - 1);
        let t = (s - self.grid[k - 1]) / (self.grid[k] - self.grid[k - 1]);
        self.density[k - 1] + t * (self.density[k] - self.density[k - 1])
    }

    /// Mass on `[lo, hi]` by the trapezoid rule over grid points inside.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        let (g, d): (Vec<f64>, Vec<f64>) = self
            .grid
            .iter()
            .zip(&self.density)
            .filter(|(x, _)| **x >= lo && **x <= hi)
            .map(|(x, y)| (*x, *y))
            .unzip();
        trapezoid(&g, &d)
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

pub const KDE_GRID_POINTS: usize = 512;

/// Silverman's rule `1.06 sigma M^(-1/5)`, with the 1/M variance.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / m;
    1.06 * var.sqrt() * m.powf(-0.2)
}

/// Gaussian kernel density estimate on `n_points` uniform points of
/// `range`, renormalized to unit trapezoid mass on the grid. Without an
/// explicit bandwidth Silverman's rule is used, falling back to the grid
/// spacing for degenerate samples.
pub fn kde_1d(
    samples: &[f64],
    bandwidth: Option<f64>,
    range: (f64, f64),
    n_points: usize,
) -> Result<Density1D, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::InvalidArgument("density estimate needs at least one sample".into()));
    }
    let (lo, hi) = range;
    if !(hi > lo) || n_points < 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "bad grid: range ({lo}, {hi}) with {n_points} points"
        )));
    }
    let dx = (hi - lo) / (n_points - 1) as f64;
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(AnalysisError::InvalidArgument(format!("bandwidth must be positive, got {h}"))),
        None => {
            let h = silverman_bandwidth(samples);
            if h > 0.0 {
                h
            } else {
                dx
            }
        }
    };
    let grid: Vec<f64> = (0..n_points).map(|k| lo + k as f64 * dx).collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let mut density: Vec<f64> = grid
        .iter()
        .map(|x| {
            samples
                .iter()
                .map(|s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let mass = trapezoid(&grid, &density);
    if mass > 0.0 {
        density.iter_mut().for_each(|d| *d /= mass);
    }
    Ok(Density1D { grid, density, bandwidth: h })
}

/// Density floor below which an observation is undefined.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Posterior class probabilities given the observation `y = x_c`:
/// `p_i f_{y|C_i}(x_c) / f_y(x_c)`, renormalized to sum to one.
pub fn bayes_condition(
    priors: &[f64],
    conditionals: &[f64],
    total: f64,
    x_c: f64,
) -> Result<Vec<f64>, AnalysisError> {
    if priors.len() != conditionals.len() || priors.is_empty() {
        return Err(AnalysisError::InvalidArgument(format!(
            "{} priors for {} conditional densities",
            priors.len(),
            conditionals.len()
        )));
    }
    if !(total > DENSITY_FLOOR) {
        return Err(AnalysisError::UndefinedObservation { s: x_c, density: total });
    }
    let raw: Vec<f64> = priors.iter().zip(conditionals).map(|(p, f)| p * f / total).collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(AnalysisError::UndefinedObservation { s: x_c, density: total });
    }
    Ok(raw.into_iter().map(|v| v / sum).collect())
}

/// Uniform-bin histogram over `[lo, hi]`. A sample on an interior bin
/// edge is counted in the lower bin and the first bin also holds `lo`.
/// Samples outside the range are not counted.
pub fn histogram(samples: &[f64], n_bins: usize, range: (f64, f64)) -> Result<Vec<usize>, AnalysisError> {
    let (lo, hi) = range;
    if n_bins == 0 || !(hi > lo) {
        return Err(AnalysisError::InvalidArgument(format!("bad histogram: {n_bins} bins over ({lo}, {hi})")));
    }
    let mut counts = vec![0; n_bins];
    let width = (hi - lo) / n_bins as f64;
    for &s in samples {
        if !(s >= lo && s <= hi) {
            continue;
        }
        let k = (((s - lo) / width).ceil() as usize).clamp(1, n_bins) - 1;
        counts[k] += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_antiplane_mesh, build_interval_mesh, build_line_probe, AntiplaneGeometry, AntiplaneMeshSpec};
    use std::sync::OnceLock;

    fn mesh() -> &'static TriMesh {
        static MESH: OnceLock<TriMesh> = OnceLock::new();
        MESH.get_or_init(|| {
            build_antiplane_mesh(&AntiplaneMeshSpec::band(AntiplaneGeometry::default(), 0.04, 0.02, 0.04)).unwrap()
        })
    }

    fn field(mesh: &TriMesh, f: impl Fn([f64; 2]) -> bool) -> Vec<f64> {
        mesh.nodes().iter().map(|p| if f(*p) { 1.0 } else { 0.0 }).collect()
    }

    fn near_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2], w: f64) -> bool {
        crate::mesh::distance_to_segment(p, a, b) <= w
    }

    #[test]
    fn vertical_band_is_type1() {
        let m = mesh();
        let alpha = field(m, |p| (p[0] - 1.0).abs() <= 0.04 && p[1] <= 1.5 + 1e-9);
        assert_eq!(classify_crack_2d(&alpha, m, &ClassifierParams::default()).unwrap(), CrackClass::Type1);
    }

    #[test]
    fn path_through_hole() {
        let m = mesh();
        let c = m.geometry().hole_center;
        let into_hole = |p| near_segment(p, [1.0, 1.5], c, 0.04);
        let left = field(m, |p| into_hole(p) || near_segment(p, c, [0.0, c[1]], 0.04));
        assert_eq!(classify_crack_2d(&left, m, &ClassifierParams::default()).unwrap(), CrackClass::Type3);
        let down = field(m, |p| into_hole(p) || near_segment(p, c, [c[0], 0.0], 0.04));
        assert_eq!(classify_crack_2d(&down, m, &ClassifierParams::default()).unwrap(), CrackClass::Type2);
    }

    #[test]
    fn intact_or_partial_is_other() {
        let m = mesh();
        let zero = vec![0.0; m.n_nodes()];
        assert_eq!(classify_crack_2d(&zero, m, &ClassifierParams::default()).unwrap(), CrackClass::Other);
        let partial = field(m, |p| (p[0] - 1.0).abs() <= 0.04 && p[1] >= 1.0 && p[1] <= 1.5 + 1e-9);
        assert_eq!(classify_crack_2d(&partial, m, &ClassifierParams::default()).unwrap(), CrackClass::Other);
        let mut bad = zero.clone();
        bad[3] = 1.5;
        assert!(matches!(
            classify_crack_2d(&bad, m, &ClassifierParams::default()),
            Err(AnalysisError::InvalidField { node: 3, .. })
        ));
    }

    #[test]
    fn scaled_fields_keep_their_class() {
        let m = mesh();
        let alpha: Vec<f64> = field(m, |p| (p[0] - 1.0).abs() <= 0.04 && p[1] <= 1.5 + 1e-9)
            .into_iter()
            .map(|a| if a > 0.0 { 0.96 } else { 0.1 })
            .collect();
        for c in [0.95, 1.0, 1.05] {
            let scaled: Vec<f64> = alpha.iter().map(|a| a * c).collect();
            assert_eq!(classify_crack_2d(&scaled, m, &ClassifierParams::default()).unwrap(), CrackClass::Type1);
        }
    }

    #[test]
    fn one_dimensional_labels() {
        let grid = build_interval_mesh(6.0, 600).unwrap();
        let bump = |c: f64, peak: f64| -> Vec<f64> {
            grid.nodes().iter().map(|x| peak * (-((x - c) / 0.05).powi(2)).exp()).collect()
        };
        assert_eq!(classify_crack_1d(&bump(4.02, 0.97), &grid, &[1.0, 4.0], 0.9, 0.5), Some(1));
        assert_eq!(classify_crack_1d(&vec![0.0; 601], &grid, &[1.0, 4.0], 0.9, 0.5), None);
        let two: Vec<f64> = bump(1.0, 1.0).iter().zip(bump(4.0, 1.0)).map(|(a, b)| a.max(b)).collect();
        assert_eq!(classify_crack_1d(&two, &grid, &[1.0, 4.0], 0.9, 0.5), Some(0));
        assert_eq!(classify_crack_1d(&bump(2.5, 1.0), &grid, &[1.0, 4.0], 0.9, 0.5), None);
    }

    #[test]
    fn probe_intersection() {
        let m = mesh();
        let probe = build_line_probe(m, [0.0, 1.0], [1.5, -1.0], 101).unwrap();
        let mid = [0.75, 0.5];
        let bump: Vec<f64> = m
            .nodes()
            .iter()
            .map(|p| (-(crate::mesh::dist(*p, mid) / 0.1).powi(2)).exp())
            .collect();
        assert!((intersection_coordinate(&bump, m, &probe).unwrap() - 0.5).abs() < 1e-12);
        let flat = vec![0.3; m.n_nodes()];
        assert_eq!(intersection_coordinate(&flat, m, &probe).unwrap(), 0.0);

        let fine = build_line_probe(m, [0.0, 1.0], [1.5, -1.0], 1001).unwrap();
        let off = [0.0 + 0.437 * 1.5, 1.0 - 0.437];
        let bump: Vec<f64> = m
            .nodes()
            .iter()
            .map(|p| (-(crate::mesh::dist(*p, off) / 0.1).powi(2)).exp())
            .collect();
        let (s0, s1) = (
            intersection_coordinate(&bump, m, &probe).unwrap(),
            intersection_coordinate(&bump, m, &fine).unwrap(),
        );
        assert!((s0 - s1).abs() < probe.spacing());
    }

    #[test]
    fn kde_normalization_and_fallback() {
        let d = kde_1d(&[0.3], Some(0.05), (0.0, 1.0), KDE_GRID_POINTS).unwrap();
        assert!((d.integral() - 1.0).abs() < 1e-12);
        let peak = d.grid[argmax(&d.density)];
        assert!((peak - 0.3).abs() <= 1.0 / 511.0);
        let same = kde_1d(&[0.5, 0.5, 0.5], None, (0.0, 1.0), KDE_GRID_POINTS).unwrap();
        assert!((same.bandwidth - 1.0 / 511.0).abs() < 1e-15);
        assert!(kde_1d(&[], None, (0.0, 1.0), 512).is_err());
        assert!(kde_1d(&[0.1], Some(-1.0), (0.0, 1.0), 512).is_err());
    }

    #[test]
    fn bayes_cases() {
        let post = bayes_condition(&[0.2, 0.3, 0.5], &[1.3, 1.3, 1.3], 1.3, 0.4).unwrap();
        for (a, b) in post.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
        let post = bayes_condition(&[0.5, 0.5], &[0.0, 2.0], 1.0, 0.1).unwrap();
        assert_eq!(post[0], 0.0);
        assert!(matches!(
            bayes_condition(&[0.5, 0.5], &[0.0, 0.0], 0.0, 0.9),
            Err(AnalysisError::UndefinedObservation { .. })
        ));
        let post = bayes_condition(&[1.0, 0.0, 0.0], &[0.1, 5.0, 3.0], 0.7, 0.2).unwrap();
        assert_eq!(post, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn histogram_cases() {
        assert_eq!(histogram(&[0.5], 2, (0.0, 1.0)).unwrap(), vec![1, 0]);
        assert_eq!(histogram(&[0.25], 2, (0.0, 1.0)).unwrap(), vec![1, 0]);
        assert_eq!(histogram(&[1.0, 0.0], 4, (0.0, 1.0)).unwrap(), vec![1, 0, 0, 1]);
        assert!(histogram(&[0.1], 0, (0.0, 1.0)).is_err());
    }
}
