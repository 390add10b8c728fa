//! Random inputs: white-noise dissipation, Fourier hole-radius
//! perturbations and per-realization generators.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::IntervalMesh;
use crate::solvers::DissipationProfile;

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid perturbation: {0}")]
    InvalidArgument(String),
}

/// Generator handed to one realization.
pub type RealizationRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for realization `index` derived by hashing `(master_seed, index)`.
/// Independent of the order in which realizations are executed.
pub fn rng_for_realization(master_seed: u64, index: u64) -> RealizationRng {
    let mut state = splitmix64(master_seed) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019));
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform variate on `[0, 1)` from the top 53 bits of one `u64`.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform variate on `[lo, hi)`.
pub fn uniform(rng: &mut impl RngCore, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    WhiteNoiseDissipation,
    FourierRadius,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub eta: f64,
    /// Harmonic count of the radius expansion.
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    /// Cosine weights `c_j`; empty means `1/j`.
    #[serde(default)]
    pub cos_weights: Vec<f64>,
    /// Sine weights `s_j`; empty means `1/j`.
    #[serde(default)]
    pub sin_weights: Vec<f64>,
}

fn default_harmonics() -> usize {
    6
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::new(PerturbationKind::None, 0.0)
    }

    pub fn white_noise(eta: f64) -> Self {
        Self::new(PerturbationKind::WhiteNoiseDissipation, eta)
    }

    pub fn fourier_radius(eta: f64, harmonics: usize) -> Self {
        Self {
            harmonics,
            ..Self::new(PerturbationKind::FourierRadius, eta)
        }
    }

    fn new(kind: PerturbationKind, eta: f64) -> Self {
        Self {
            kind,
            eta,
            harmonics: default_harmonics(),
            cos_weights: Vec::new(),
            sin_weights: Vec::new(),
        }
    }

    fn weights(given: &[f64], j: usize) -> Vec<f64> {
        if given.is_empty() {
            (1..=j).map(|k| 1.0 / k as f64).collect()
        } else {
            given.to_vec()
        }
    }

    /// `(c_j, s_j)` for `j = 1..=J`.
    pub fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        (
            Self::weights(&self.cos_weights, self.harmonics),
            Self::weights(&self.sin_weights, self.harmonics),
        )
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(StochasticError::InvalidArgument(format!("eta must be non-negative, got {}", self.eta)));
        }
        if self.kind == PerturbationKind::FourierRadius {
            if self.harmonics == 0 {
                return Err(StochasticError::InvalidArgument("radius perturbation needs at least one harmonic".into()));
            }
            for (name, w) in [("cos_weights", &self.cos_weights), ("sin_weights", &self.sin_weights)] {
                if !w.is_empty() && w.len() != self.harmonics {
                    return Err(StochasticError::InvalidArgument(format!(
                        "{name} has {} entries for {} harmonics",
                        w.len(),
                        self.harmonics
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest possible radial offset, `eta * sum_j (|c_j| + |s_j|)`.
    pub fn max_offset(&self) -> f64 {
        let (c, s) = self.coefficients();
        self.eta * c.iter().chain(&s).map(|v| v.abs()).sum::<f64>()
    }

    /// Closed-form pointwise variance of the unscaled expansion at `phi`.
    pub fn radius_variance(&self, phi: f64) -> f64 {
        let (c, s) = self.coefficients();
        c.iter()
            .zip(&s)
            .enumerate()
            .map(|(k, (cj, sj))| {
                let j = (k + 1) as f64;
                cj * cj * (j * phi).cos().powi(2) + sj * sj * (j * phi).sin().powi(2)
            })
            .sum::<f64>()
            / 3.0
    }
}

/// One realized hole radius `r(phi) = R + eta * sum_j (c_j y_{2j-1} cos j phi + s_j y_{2j} sin j phi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusRealization {
    pub radius: f64,
    pub eta: f64,
    pub cos_weights: Vec<f64>,
    pub sin_weights: Vec<f64>,
    /// `y_1 .. y_{2J}`.
    pub draws: Vec<f64>,
}

impl RadiusRealization {
    pub fn from_draws(spec: &PerturbationSpec, radius: f64, draws: Vec<f64>) -> Result<Self, StochasticError> {
        spec.validate()?;
        let (c, s) = spec.coefficients();
        if draws.len() != 2 * c.len() {
            return Err(StochasticError::InvalidArgument(format!(
                "expected {} draws, got {}",
                2 * c.len(),
                draws.len()
            )));
        }
        if spec.max_offset() >= radius {
            return Err(StochasticError::InvalidArgument(format!(
                "perturbation bound {} is not below the radius {radius}",
                spec.max_offset()
            )));
        }
        Ok(Self {
            radius,
            eta: spec.eta,
            cos_weights: c,
            sin_weights: s,
            draws,
        })
    }

    /// Zero-mean fluctuation before scaling by `eta`.
    pub fn fluctuation(&self, phi: f64) -> f64 {
        self.cos_weights
            .iter()
            .zip(&self.sin_weights)
            .enumerate()
            .map(|(k, (c, s))| {
                let j = (k + 1) as f64;
                c * self.draws[2 * k] * (j * phi).cos() + s * self.draws[2 * k + 1] * (j * phi).sin()
            })
            .sum()
    }

    pub fn radius_at(&self, phi: f64) -> f64 {
        if self.eta == 0.0 {
            return self.radius;
        }
        self.radius + self.eta * self.fluctuation(phi)
    }
}

/// Draws `y_k ~ U[-1, 1]`, `k = 1..2J`.
pub fn sample_radius(
    spec: &PerturbationSpec,
    radius: f64,
    rng: &mut impl RngCore,
) -> Result<RadiusRealization, StochasticError> {
    spec.validate()?;
    let draws = (0..2 * spec.harmonics).map(|_| uniform(rng, -1.0, 1.0)).collect();
    RadiusRealization::from_draws(spec, radius, draws)
}

/// Nodal values `G_cA(x_i) + eta q_i` with `q_i ~ U[-1/2, 1/2]`.
pub fn white_noise_perturb(
    profile: &DissipationProfile,
    grid: &IntervalMesh,
    eta: f64,
    rng: &mut impl RngCore,
) -> Result<Vec<f64>, StochasticError> {
    if !(eta >= 0.0) {
        return Err(StochasticError::InvalidArgument(format!("eta must be non-negative, got {eta}")));
    }
    grid.nodes()
        .iter()
        .map(|&x| {
            let base = profile
                .evaluate(x)
                .map_err(|e| StochasticError::InvalidArgument(e.to_string()))?;
            let q = uniform(rng, -0.5, 0.5);
            Ok(if eta == 0.0 { base } else { base + eta * q })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |seed, i| {
            let mut r = rng_for_realization(seed, i);
            (0..1000).map(|_| uniform01(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(42, 7), draw(42, 7));
        let (a, b) = (draw(42, 0), draw(42, 1));
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
        assert_ne!(draw(1, 0), draw(2, 0));
    }

    #[test]
    fn uniform_passes_kolmogorov_smirnov() {
        let mut r = rng_for_realization(2024, 0);
        let mut x: Vec<f64> = (0..100_000).map(|_| uniform01(&mut r)).collect();
        x.sort_by(f64::total_cmp);
        let n = x.len() as f64;
        let d = x
            .iter()
            .enumerate()
            .map(|(i, v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(d < 0.01, "KS statistic {d}");
        assert!(x[0] >= 0.0 && x[x.len() - 1] < 1.0);
    }

    #[test]
    fn zero_eta_radius_is_nominal() {
        let spec = PerturbationSpec::fourier_radius(0.0, 6);
        let mut r = rng_for_realization(1, 1);
        let real = sample_radius(&spec, 0.2, &mut r).unwrap();
        for k in 0..50 {
            assert_eq!(real.radius_at(k as f64 * 0.3), 0.2);
        }
    }

    #[test]
    fn single_cosine_mode() {
        let spec = PerturbationSpec {
            cos_weights: vec![1.0],
            sin_weights: vec![1.0],
            ..PerturbationSpec::fourier_radius(0.05, 1)
        };
        let real = RadiusRealization::from_draws(&spec, 0.2, vec![1.0, 0.0]).unwrap();
        for k in 0..20 {
            let phi = -3.0 + 0.3 * k as f64;
            assert!((real.radius_at(phi) - (0.2 + 0.05 * phi.cos())).abs() < 1e-15);
        }
    }

    #[test]
    fn positivity_guard() {
        let spec = PerturbationSpec::fourier_radius(0.1, 6);
        assert!(spec.max_offset() > 0.2);
        let mut r = rng_for_realization(0, 0);
        assert!(sample_radius(&spec, 0.2, &mut r).is_err());
        assert!(sample_radius(&PerturbationSpec::fourier_radius(0.02, 6), 0.2, &mut r).is_ok());
        assert!(PerturbationSpec::fourier_radius(-1.0, 6).validate().is_err());
        assert!(PerturbationSpec::fourier_radius(0.01, 0).validate().is_err());
    }

    #[test]
    fn white_noise_support_and_mean() {
        let grid = build_interval_mesh(6.0, 1000).unwrap();
        let profile = DissipationProfile::DoubleV;
        let exact: Vec<f64> = grid.nodes().iter().map(|&x| profile.evaluate(x).unwrap()).collect();
        let mut r = rng_for_realization(3, 0);
        assert_eq!(white_noise_perturb(&profile, &grid, 0.0, &mut r).unwrap(), exact);
        let eta = 0.1;
        let v = white_noise_perturb(&profile, &grid, eta, &mut r).unwrap();
        assert!(v.iter().zip(&exact).all(|(a, b)| (a - b).abs() <= eta / 2.0));

        let small = build_interval_mesh(6.0, 2).unwrap();
        let m = 100_000;
        let mut sum = 0.0;
        for i in 0..m {
            let mut r = rng_for_realization(3, i);
            sum += white_noise_perturb(&profile, &small, eta, &mut r).unwrap()[1];
        }
        let mean = sum / m as f64;
        let bound = 3.0 * (eta / 12f64.sqrt()) / (m as f64).sqrt();
        assert!((mean - profile.evaluate(3.0).unwrap()).abs() < bound, "{mean} {bound}");
    }
}
