use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::mesh::IntervalMesh;

/// Dissipation density `G_cA(x)` of the 1D bar on `[0, 6]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DissipationProfile {
    /// `1 + |x-1|` on `[0,2)`, `1 + |x-4|/2` on `[2,6]`.
    DoubleV,
    /// `1 + (x-1)^2` on `[0,2)`, `1 + (x-4)^2/4` on `[2,6]`.
    DoubleU,
    /// `1 + (x-1)^2` on `[0,2)`, `1 + |x-4|/2` on `[2,6]`.
    UV,
    /// Piecewise-linear table with increasing abscissae.
    Custom { x: Vec<f64>, values: Vec<f64> },
}

pub const PROFILE_LENGTH: f64 = 6.0;

impl DissipationProfile {
    pub fn domain(&self) -> (f64, f64) {
        match self {
            DissipationProfile::Custom { x, .. } if !x.is_empty() => (x[0], x[x.len() - 1]),
            _ => (0.0, PROFILE_LENGTH),
        }
    }

    /// Crack attractors of the built-in profiles.
    pub fn attractors(&self) -> Vec<f64> {
        match self {
            DissipationProfile::Custom { .. } => Vec::new(),
            _ => vec![1.0, 4.0],
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if let DissipationProfile::Custom { x, values } = self {
            if x.len() < 2 || x.len() != values.len() {
                return Err(SolverError::InvalidArgument(format!(
                    "custom profile needs matching tables of at least two points, got {} and {}",
                    x.len(),
                    values.len()
                )));
            }
            if x.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(SolverError::InvalidArgument("custom profile abscissae must increase".into()));
            }
            if values.iter().any(|v| !(*v > 0.0)) {
                return Err(SolverError::InvalidArgument("custom profile values must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: f64) -> Result<f64, SolverError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(SolverError::InvalidArgument(format!("x = {x} outside the profile domain [{lo}, {hi}]")));
        }
        let left = x < 2.0;
        Ok(match self {
            DissipationProfile::DoubleV if left => 1.0 + (x - 1.0).abs(),
            DissipationProfile::DoubleV => 1.0 + (x - 4.0).abs() / 2.0,
            DissipationProfile::DoubleU if left => 1.0 + (x - 1.0).powi(2),
            DissipationProfile::DoubleU => 1.0 + 0.25 * (x - 4.0).powi(2),
            DissipationProfile::UV if left => 1.0 + (x - 1.0).powi(2),
            DissipationProfile::UV => 1.0 + (x - 4.0).abs() / 2.0,
            DissipationProfile::Custom { x: xs, values } => {
                self.validate()?;
                let k = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
                let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        })
    }

    pub fn sample(&self, grid: &IntervalMesh) -> Result<Vec<f64>, SolverError> {
        grid.nodes().iter().map(|&x| self.evaluate(x)).collect()
    }
}

/// Evaluates a built-in profile; `kind` is one of `double_v`, `double_u`, `u_v`.
pub fn dissipation_profile(kind: &str, x: f64) -> Result<f64, SolverError> {
    let profile = match kind {
        "double_v" => DissipationProfile::DoubleV,
        "double_u" => DissipationProfile::DoubleU,
        "u_v" => DissipationProfile::UV,
        _ => return Err(SolverError::InvalidArgument(format!("unknown profile '{kind}'"))),
    };
    profile.evaluate(x)
}

/// Sharp-crack location: the node minimizing the dissipation density,
/// lowest index on ties.
pub fn sharp_crack_location(grid: &IntervalMesh, samples: &[f64]) -> Result<(usize, f64), SolverError> {
    if samples.is_empty() {
        return Err(SolverError::InvalidArgument("no dissipation samples".into()));
    }
    if samples.len() != grid.n_nodes() {
        return Err(SolverError::InvalidArgument(format!(
            "{} samples for {} nodes",
            samples.len(),
            grid.n_nodes()
        )));
    }
    let i = argmin(samples);
    Ok((i, grid.nodes()[i]))
}

pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x < v[best] {
            best = i;
        }
    }
    best
}

/// Largest admissible `|eta q|` for the tilted double well.
pub const DOUBLE_WELL_TILT_LIMIT: f64 = 0.09;

fn well_energy(x: f64, t: f64) -> f64 {
    x * x * (1.0 - x) * (1.0 - x) + t * x
}

fn well_slope(x: f64, t: f64) -> f64 {
    2.0 * x * (1.0 - x) * (1.0 - 2.0 * x) + t
}

fn well_curvature(x: f64) -> f64 {
    2.0 * (1.0 - 6.0 * x + 6.0 * x * x)
}

/// Global minimizer of `x^2 (1-x)^2 + eta q x`: Newton from both wells,
/// lower energy wins, the well at 0 on ties.
pub fn double_well_minimize(eta: f64, q: f64) -> Result<f64, SolverError> {
    let t = eta * q;
    if !(t.abs() < DOUBLE_WELL_TILT_LIMIT) {
        return Err(SolverError::InvalidArgument(format!(
            "tilt |eta q| = {} must stay below {DOUBLE_WELL_TILT_LIMIT}",
            t.abs()
        )));
    }
    let newton = |mut x: f64| {
        for _ in 0..100 {
            let step = well_slope(x, t) / well_curvature(x);
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        x
    };
    let (x0, x1) = (newton(0.0), newton(1.0));
    Ok(if well_energy(x1, t) < well_energy(x0, t) { x1 } else { x0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn profile_values() {
        let v = DissipationProfile::DoubleV;
        assert_eq!(v.evaluate(1.0).unwrap(), 1.0);
        assert_eq!(v.evaluate(4.0).unwrap(), 1.0);
        assert_eq!(v.evaluate(0.0).unwrap(), 2.0);
        assert_eq!(v.evaluate(6.0).unwrap(), 2.0);
        assert_eq!(DissipationProfile::DoubleU.evaluate(2.0).unwrap(), 2.0);
        assert!((DissipationProfile::DoubleU.evaluate(2.0 - 1e-12).unwrap() - 2.0).abs() < 1e-10);
        assert_eq!(DissipationProfile::UV.evaluate(4.0).unwrap(), 1.0);
        assert_eq!(DissipationProfile::UV.evaluate(1.0).unwrap(), 1.0);
        assert!(v.evaluate(-0.1).is_err());
        assert!(v.evaluate(6.1).is_err());
        assert_eq!(dissipation_profile("u_v", 0.0).unwrap(), 2.0);
        assert!(dissipation_profile("w", 0.0).is_err());
    }

    #[test]
    fn custom_table_interpolates() {
        let p = DissipationProfile::Custom {
            x: vec![0.0, 1.0, 3.0],
            values: vec![1.0, 3.0, 2.0],
        };
        assert_eq!(p.evaluate(0.5).unwrap(), 2.0);
        assert_eq!(p.evaluate(3.0).unwrap(), 2.0);
        assert_eq!(p.evaluate(2.0).unwrap(), 2.5);
        let bad = DissipationProfile::Custom {
            x: vec![0.0, 0.0],
            values: vec![1.0, 1.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sharp_crack_argmin() {
        let grid = build_interval_mesh(2.0, 2).unwrap();
        assert_eq!(sharp_crack_location(&grid, &[3.0, 1.0, 2.0]).unwrap(), (1, 1.0));
        assert!(sharp_crack_location(&grid, &[]).is_err());

        // both minima on nodes: tie resolved to x = 1
        let tied = build_interval_mesh(6.0, 600).unwrap();
        let samples = DissipationProfile::DoubleV.sample(&tied).unwrap();
        let (i, x) = sharp_crack_location(&tied, &samples).unwrap();
        assert_eq!(i, 100);
        assert!((x - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = samples.iter().map(|v| v + 5.0).collect();
        assert_eq!(sharp_crack_location(&tied, &shifted).unwrap().0, i);

        // 1001 nodes: neither minimum is a node, the closer node near 4 wins
        let fine = build_interval_mesh(6.0, 1000).unwrap();
        let samples = DissipationProfile::DoubleV.sample(&fine).unwrap();
        let (_, x) = sharp_crack_location(&fine, &samples).unwrap();
        assert!((x - 4.002).abs() < 1e-9);
    }

    #[test]
    fn double_well_cases() {
        assert_eq!(double_well_minimize(0.0, 0.3).unwrap(), 0.0);
        let x = double_well_minimize(0.01, 0.4).unwrap();
        assert!(x.abs() <= 0.1);
        let x = double_well_minimize(0.01, -0.4).unwrap();
        assert!((x - 1.0).abs() <= 0.1);
        assert!(double_well_minimize(1.0, 0.1).is_err());
        for q in [-0.5, -0.2, 0.1, 0.5] {
            let x = double_well_minimize(0.1, q).unwrap();
            assert!(well_slope(x, 0.1 * q).abs() < 1e-10);
        }
    }
}
