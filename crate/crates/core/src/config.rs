//! Run configuration: one TOML document per run.
//!
//! Unknown keys are rejected. Optional sections fall back to the defaults
//! of the chosen scenario, see [`RunConfig::resolved`].

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ClassifierParams;
use crate::fem::Dissipation;
use crate::mesh::{AntiplaneGeometry, AntiplaneMeshSpec, RefineRegion, MAX_BLEND_COMPRESSION};
use crate::solvers::{DissipationProfile, LoadSchedule, SolverParams};
use crate::stochastic::{PerturbationKind, PerturbationSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "double_well")]
    DoubleWell,
    #[serde(rename = "bar_sharp")]
    BarSharp,
    #[serde(rename = "bar_phasefield")]
    BarPhasefield,
    #[serde(rename = "antiplane_2d")]
    Antiplane2d,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::DoubleWell => "double_well",
            Scenario::BarSharp => "bar_sharp",
            Scenario::BarPhasefield => "bar_phasefield",
            Scenario::Antiplane2d => "antiplane_2d",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1D bar data shared by the sharp-crack and phase-field scenarios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarConfig {
    pub profile: DissipationProfile,
    pub length: f64,
    pub cells: usize,
    /// Axial stiffness `Y A`.
    pub stiffness: f64,
    pub length_scale: f64,
    /// Damage level counted as crack.
    pub threshold: f64,
    /// Half-width of the attractor windows.
    pub window: f64,
}

impl Default for BarConfig {
    fn default() -> Self {
        Self {
            profile: DissipationProfile::DoubleV,
            length: 6.0,
            cells: 1000,
            stiffness: 1e4,
            length_scale: 0.006,
            threshold: 0.9,
            window: 0.5,
        }
    }
}

/// Probe segment `anchor + s direction`, `s in [0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub anchor: [f64; 2],
    pub direction: [f64; 2],
    pub samples: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            anchor: [0.0, 1.0],
            direction: [1.5, -1.0],
            samples: 301,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntiplaneConfig {
    pub a: f64,
    pub shear_modulus: f64,
    pub toughness: f64,
    pub length_scale: f64,
    pub dissipation: Dissipation,
    pub tol_ir: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Refined region; defaults to a band of width `6 l` from the slit tip
    /// to the hole.
    pub refine: Option<RefineRegion>,
    /// Width of the zone over which hole-boundary displacements decay.
    pub blend_width: f64,
    pub probe: ProbeConfig,
    pub classifier: ClassifierParams,
}

impl Default for AntiplaneConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            shear_modulus: 1.0,
            toughness: 1.0,
            length_scale: 0.04,
            dissipation: Dissipation::At2,
            tol_ir: 0.01,
            h_min: 0.02,
            h_max: 0.04,
            refine: None,
            blend_width: 0.3,
            probe: ProbeConfig::default(),
            classifier: ClassifierParams::default(),
        }
    }
}

impl AntiplaneConfig {
    pub fn mesh_spec(&self) -> AntiplaneMeshSpec {
        let mut spec = AntiplaneMeshSpec::band(AntiplaneGeometry::with_scale(self.a), self.length_scale, self.h_min, self.h_max);
        if let Some(r) = &self.refine {
            spec.refine = r.clone();
        }
        spec
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Write the final field of every realization.
    pub fields: bool,
    /// Also write every loading step of every realization.
    pub snapshots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            fields: true,
            snapshots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    /// Number of Monte Carlo realizations `M`.
    pub samples: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loading: Option<LoadSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverParams>,
    #[serde(default)]
    pub bar: BarConfig,
    #[serde(default)]
    pub antiplane: AntiplaneConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_workers() -> usize {
    1
}

/// Number of loading steps of the 2D scenario. The increment is 0.1;
/// complete crack paths need about 21 of them.
pub const ANTIPLANE_STEPS: usize = 25;

impl RunConfig {
    /// Configuration with every default of `scenario`.
    pub fn new(scenario: Scenario, samples: usize) -> Self {
        let mut cfg = Self {
            scenario,
            samples,
            master_seed: 0,
            output_dir: None,
            workers: default_workers(),
            perturbation: None,
            loading: None,
            solver: None,
            bar: BarConfig::default(),
            antiplane: AntiplaneConfig::default(),
            output: OutputConfig::default(),
        };
        cfg.perturbation = Some(cfg.perturbation());
        cfg.loading = Some(cfg.loading());
        cfg.solver = Some(cfg.solver());
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// The perturbation in effect.
    pub fn perturbation(&self) -> PerturbationSpec {
        self.perturbation.clone().unwrap_or_else(|| match self.scenario {
            Scenario::DoubleWell | Scenario::BarSharp => PerturbationSpec::white_noise(0.01),
            Scenario::BarPhasefield => PerturbationSpec::white_noise(1.0),
            Scenario::Antiplane2d => PerturbationSpec::fourier_radius(0.02, 6),
        })
    }

    /// The loading schedule in effect (unused by the loading-free scenarios).
    pub fn loading(&self) -> LoadSchedule {
        self.loading.unwrap_or(match self.scenario {
            Scenario::Antiplane2d => LoadSchedule {
                increment: 0.1,
                steps: ANTIPLANE_STEPS,
            },
            _ => LoadSchedule {
                increment: 0.1,
                steps: 10,
            },
        })
    }

    pub fn solver(&self) -> SolverParams {
        self.solver.clone().unwrap_or_else(|| match self.scenario {
            Scenario::BarPhasefield => SolverParams::bar(),
            _ => SolverParams::default(),
        })
    }

    /// Output directory, `runs/<scenario>` when unset.
    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(self.scenario.as_str()))
    }

    /// Same configuration with every optional section filled in.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.perturbation = Some(self.perturbation());
        cfg.loading = Some(self.loading());
        cfg.solver = Some(self.solver());
        cfg
    }

    /// Resolved configuration without the settings that only affect how a
    /// run executes (worker count, output directory), as echoed into run
    /// artifacts.
    pub fn for_manifest(&self) -> Self {
        let mut cfg = self.resolved();
        cfg.workers = default_workers();
        cfg.output_dir = None;
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.samples == 0 {
            return invalid("samples must be at least 1".into());
        }
        let pert = self.perturbation();
        pert.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let expected = match self.scenario {
            Scenario::Antiplane2d => [PerturbationKind::FourierRadius, PerturbationKind::None],
            _ => [PerturbationKind::WhiteNoiseDissipation, PerturbationKind::None],
        };
        if !expected.contains(&pert.kind) {
            return invalid(format!("perturbation kind {:?} does not apply to {}", pert.kind, self.scenario));
        }
        let load = self.loading();
        if !(load.increment >= 0.0) || !load.increment.is_finite() {
            return invalid(format!("loading increment must be non-negative, got {}", load.increment));
        }
        self.solver().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        match self.scenario {
            Scenario::DoubleWell => {
                if pert.eta * 0.5 >= crate::solvers::DOUBLE_WELL_TILT_LIMIT {
                    return invalid(format!("eta = {} tilts the double well too far", pert.eta));
                }
            }
            Scenario::BarSharp | Scenario::BarPhasefield => {
                let b = &self.bar;
                b.profile.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
                if b.cells == 0 || !(b.length > 0.0) {
                    return invalid("bar needs a positive length and at least one cell".into());
                }
                let (lo, hi) = b.profile.domain();
                if lo > 0.0 || hi < b.length {
                    return invalid(format!("profile domain [{lo}, {hi}] does not cover the bar [0, {}]", b.length));
                }
                if !(b.stiffness > 0.0 && b.length_scale > 0.0 && b.window > 0.0) {
                    return invalid("bar stiffness, length scale and window must be positive".into());
                }
            }
            Scenario::Antiplane2d => {
                let c = &self.antiplane;
                if !(c.a > 0.0 && c.shear_modulus > 0.0 && c.toughness > 0.0 && c.length_scale > 0.0) {
                    return invalid("geometry scale and material constants must be positive".into());
                }
                if !(c.tol_ir > 0.0 && c.tol_ir < 1.0) {
                    return invalid(format!("tol_ir must lie in (0, 1), got {}", c.tol_ir));
                }
                if !(c.h_min > 0.0 && c.h_max >= c.h_min) {
                    return invalid(format!("need 0 < h_min <= h_max, got {} and {}", c.h_min, c.h_max));
                }
                if !(c.blend_width > 0.0) || c.probe.samples < 2 {
                    return invalid("blend width must be positive and the probe needs 2 samples".into());
                }
                let radius = 0.2 * c.a;
                if pert.kind == PerturbationKind::FourierRadius {
                    let offset = pert.max_offset();
                    if offset >= radius || offset >= MAX_BLEND_COMPRESSION * c.blend_width {
                        return invalid(format!(
                            "radius perturbation bound {offset} must stay below R = {radius} and {MAX_BLEND_COMPRESSION} of the blend width"
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
