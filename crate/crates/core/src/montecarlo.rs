//! Ensemble driver and estimators.
//!
//! Realization `i` draws every random input from
//! [`rng_for_realization`]`(master_seed, i)`, so an ensemble is a pure
//! function of the configuration and does not depend on the worker count.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{classify_crack_1d, classify_crack_2d, intersection_coordinate, AnalysisError, CrackClass};
use crate::config::{ConfigError, RunConfig, Scenario};
use crate::fem::{Coefficient, Dissipation, P1Geometry};
use crate::mesh::{
    build_antiplane_mesh, build_interval_mesh, build_line_probe, deform_hole_boundary, IntervalMesh, MeshError,
    PointLocator, TriMesh,
};
use crate::solvers::{
    double_well_minimize, run_quasistatic, sharp_crack_location, FractureState, PhaseFieldProblem, SolverError,
};
use crate::stochastic::{
    rng_for_realization, sample_radius, uniform, white_noise_perturb, PerturbationKind, StochasticError,
};

/// Share of failed realizations above which an ensemble is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.05;

pub const FAILED_LABEL: &str = "failed";
pub const OTHER_LABEL: &str = "other";

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Stochastic(#[from] StochasticError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{failed} of {samples} realizations failed:\n{diagnostics}")]
    TooManyFailures {
        failed: usize,
        samples: usize,
        diagnostics: String,
    },
    #[error("cannot start the worker pool: {0}")]
    Pool(String),
}

/// Energies at the converged end of one loading step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub u_bar: f64,
    pub elastic: f64,
    pub fracture: f64,
    pub total: f64,
}

impl EnergyPoint {
    fn from_state(state: &FractureState) -> Self {
        Self {
            u_bar: state.load,
            elastic: state.energy.elastic,
            fracture: state.energy.fracture,
            total: state.energy.total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub index: usize,
    pub label: String,
    /// Crack position: `x` in 1D, probe coordinate `s` in 2D.
    #[serde(default)]
    pub location: Option<f64>,
    /// 2D only: probe coordinate after every loading step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace_locations: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub energies: Vec<EnergyPoint>,
    /// Low-dimensional random inputs (`q` of the double well, `y_k` of the
    /// hole radius). Nodal white noise is reproducible from the seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub draws: Vec<f64>,
    /// Final field file, relative to the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshot_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Final phase field on the nominal mesh or grid.
    #[serde(skip)]
    pub alpha: Option<Vec<f64>>,
    /// Phase field after every step, when requested.
    #[serde(skip)]
    pub snapshots: Vec<Vec<f64>>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RealizationRecord {
    fn new(index: usize) -> Self {
        Self {
            index,
            label: OTHER_LABEL.into(),
            location: None,
            trace_locations: Vec::new(),
            energies: Vec::new(),
            draws: Vec::new(),
            field: None,
            snapshot_files: Vec::new(),
            error: None,
            alpha: None,
            snapshots: Vec::new(),
            elapsed: Duration::ZERO,
        }
    }

    pub fn failed(&self) -> bool {
        self.label == FAILED_LABEL
    }

    /// Total energy at the last loading step.
    pub fn final_energy(&self) -> Option<f64> {
        self.energies.last().map(|e| e.total)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub scenario: Scenario,
    pub samples: usize,
    pub master_seed: u64,
    pub records: Vec<RealizationRecord>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl EnsembleResult {
    pub fn labels(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.label.as_str()).collect()
    }

    /// Final fields of the realizations that produced one, by index.
    pub fn fields(&self) -> Vec<&[f64]> {
        self.records.iter().filter_map(|r| r.alpha.as_deref()).collect()
    }
}

/// Labels a scenario can produce besides `other` and `failed`.
pub fn label_set(config: &RunConfig) -> Vec<String> {
    match config.scenario {
        Scenario::DoubleWell => vec!["near_0".into(), "near_1".into()],
        Scenario::BarSharp | Scenario::BarPhasefield => {
            config.bar.profile.attractors().iter().map(|c| attractor_label(*c)).collect()
        }
        Scenario::Antiplane2d => CrackClass::CLASSIFIED.iter().map(|c| c.as_str().to_string()).collect(),
    }
}

fn attractor_label(c: f64) -> String {
    format!("near_{c}")
}

/// Shared, read-only data of one scenario.
enum Context {
    DoubleWell,
    Bar { grid: IntervalMesh },
    Antiplane { mesh: TriMesh },
}

impl Context {
    fn build(config: &RunConfig) -> Result<Self, MonteCarloError> {
        Ok(match config.scenario {
            Scenario::DoubleWell => Context::DoubleWell,
            Scenario::BarSharp | Scenario::BarPhasefield => Context::Bar {
                grid: build_interval_mesh(config.bar.length, config.bar.cells)?,
            },
            Scenario::Antiplane2d => Context::Antiplane {
                mesh: build_antiplane_mesh(&config.antiplane.mesh_spec())?,
            },
        })
    }
}

fn effective_eta(config: &RunConfig) -> f64 {
    let p = config.perturbation();
    if p.kind == PerturbationKind::None {
        0.0
    } else {
        p.eta
    }
}

fn realize(config: &RunConfig, ctx: &Context, index: usize) -> Result<RealizationRecord, MonteCarloError> {
    let mut rng = rng_for_realization(config.master_seed, index as u64);
    let mut rec = RealizationRecord::new(index);
    let eta = effective_eta(config);
    match (config.scenario, ctx) {
        (Scenario::DoubleWell, _) => {
            let q = uniform(&mut rng, -0.5, 0.5);
            let x = double_well_minimize(eta, q)?;
            rec.label = if x < 0.5 { "near_0" } else { "near_1" }.into();
            rec.location = Some(x);
            rec.draws = vec![q];
        }
        (Scenario::BarSharp, Context::Bar { grid }) => {
            let samples = white_noise_perturb(&config.bar.profile, grid, eta, &mut rng)?;
            let (_, x) = sharp_crack_location(grid, &samples)?;
            let attractors = config.bar.profile.attractors();
            rec.location = Some(x);
            rec.label = crate::analysis::nearest_attractor(x, &attractors, config.bar.window)
                .map_or_else(|| OTHER_LABEL.into(), |k| attractor_label(attractors[k]));
        }
        (Scenario::BarPhasefield, Context::Bar { grid }) => {
            let b = &config.bar;
            let toughness = white_noise_perturb(&b.profile, grid, eta, &mut rng)?;
            let geometry = P1Geometry::from_interval(grid);
            let problem = PhaseFieldProblem::bar(
                grid,
                Coefficient::Uniform(b.stiffness),
                Coefficient::from_nodal(&geometry, &toughness),
                b.length_scale,
                Dissipation::At2,
            )?;
            let states = run_quasistatic(&problem, &config.loading().values(), &config.solver())?;
            let alpha = states.last().map_or_else(|| vec![0.0; grid.n_nodes()], |s| s.alpha.clone());
            let attractors = b.profile.attractors();
            rec.location = Some(grid.nodes()[crate::analysis::argmax(&alpha)]);
            rec.label = classify_crack_1d(&alpha, grid, &attractors, b.threshold, b.window)
                .map_or_else(|| OTHER_LABEL.into(), |k| attractor_label(attractors[k]));
            rec.energies = states.iter().map(EnergyPoint::from_state).collect();
            if config.output.snapshots {
                rec.snapshots = states.iter().map(|s| s.alpha.clone()).collect();
            }
            rec.alpha = Some(alpha);
        }
        (Scenario::Antiplane2d, Context::Antiplane { mesh }) => {
            let c = &config.antiplane;
            let radius = sample_radius(&config.perturbation(), mesh.geometry().radius, &mut rng)?;
            let deformed = if eta == 0.0 {
                mesh.clone()
            } else {
                deform_hole_boundary(mesh, |phi| radius.radius_at(phi), c.blend_width)?
            };
            rec.draws = radius.draws.clone();
            let problem = PhaseFieldProblem::antiplane(
                &deformed,
                c.shear_modulus,
                c.toughness,
                c.length_scale,
                c.dissipation,
                c.tol_ir,
            )?;
            let states = run_quasistatic(&problem, &config.loading().values(), &config.solver())?;
            let alpha = states
                .last()
                .map_or_else(|| vec![0.0; deformed.n_nodes()], |s| s.alpha.clone());
            rec.label = classify_crack_2d(&alpha, &deformed, &c.classifier)?.as_str().into();
            let probe = build_line_probe(&deformed, c.probe.anchor, c.probe.direction, c.probe.samples)?;
            rec.trace_locations = states
                .iter()
                .map(|s| intersection_coordinate(&s.alpha, &deformed, &probe).ok())
                .collect();
            rec.location = intersection_coordinate(&alpha, &deformed, &probe).ok();
            rec.energies = states.iter().map(EnergyPoint::from_state).collect();
            let transfer = FieldTransfer::new(&deformed, mesh);
            if config.output.snapshots {
                rec.snapshots = states.iter().map(|s| transfer.apply(&s.alpha)).collect();
            }
            rec.alpha = Some(transfer.apply(&alpha));
        }
        _ => unreachable!("context built for another scenario"),
    }
    Ok(rec)
}

/// Interpolation of nodal fields from a deformed mesh onto the nominal one:
/// point location, nearest source node where the point falls outside.
pub struct FieldTransfer {
    weights: Vec<Vec<(usize, f64)>>,
}

impl FieldTransfer {
    pub fn new(source: &TriMesh, target: &TriMesh) -> Self {
        let locator = PointLocator::new(source);
        let weights = target
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                if source.nodes().get(i) == Some(&p) {
                    return vec![(i, 1.0)];
                }
                match locator.locate(source, p) {
                    Some((t, bary)) => {
                        let tri = source.triangles()[t];
                        (0..3).map(|k| (tri[k], bary[k])).collect()
                    }
                    None => {
                        let nearest = source
                            .nodes()
                            .iter()
                            .enumerate()
                            .map(|(j, q)| (j, (q[0] - p[0]).hypot(q[1] - p[1])))
                            .min_by(|a, b| a.1.total_cmp(&b.1))
                            .map_or(0, |(j, _)| j);
                        vec![(nearest, 1.0)]
                    }
                }
            })
            .collect();
        Self { weights }
    }

    pub fn apply(&self, field: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().map(|&(j, c)| c * field[j]).sum())
            .collect()
    }
}

/// Runs the `samples` realizations of `config` on `config.workers` threads
/// (0: all cores). Records come back sorted by index; failed realizations
/// are kept with label `failed`.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleResult, MonteCarloError> {
    config.validate()?;
    let start = Instant::now();
    let ctx = Context::build(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| MonteCarloError::Pool(e.to_string()))?;
    let records: Vec<RealizationRecord> = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| {
                let t = Instant::now();
                let mut rec = realize(config, &ctx, i).unwrap_or_else(|e| {
                    let mut rec = RealizationRecord::new(i);
                    rec.label = FAILED_LABEL.into();
                    rec.error = Some(e.to_string());
                    rec
                });
                rec.elapsed = t.elapsed();
                rec
            })
            .collect()
    });
    let failed: Vec<&RealizationRecord> = records.iter().filter(|r| r.failed()).collect();
    if failed.len() as f64 > MAX_FAILURE_RATE * config.samples as f64 {
        let diagnostics = failed
            .iter()
            .map(|r| format!("  realization {}: {}", r.index, r.error.as_deref().unwrap_or("unknown error")))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(MonteCarloError::TooManyFailures {
            failed: failed.len(),
            samples: config.samples,
            diagnostics,
        });
    }
    Ok(EnsembleResult {
        scenario: config.scenario,
        samples: config.samples,
        master_seed: config.master_seed,
        records,
        wall_time: start.elapsed(),
    })
}

fn check_fields<F: AsRef<[f64]>>(fields: &[F]) -> Result<usize, MonteCarloError> {
    let n = fields
        .first()
        .ok_or_else(|| MonteCarloError::InvalidArgument("no fields to average".into()))?
        .as_ref()
        .len();
    if fields.iter().any(|f| f.as_ref().len() != n) {
        return Err(MonteCarloError::InvalidArgument("fields live on different meshes".into()));
    }
    Ok(n)
}

/// Nodal sample mean `1/M sum_i alpha_i`.
pub fn mean_field<F: AsRef<[f64]>>(fields: &[F]) -> Result<Vec<f64>, MonteCarloError> {
    let n = check_fields(fields)?;
    let m = fields.len() as f64;
    let mut mean = vec![0.0; n];
    for f in fields {
        mean.iter_mut().zip(f.as_ref()).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= m);
    Ok(mean)
}

/// Nodal variance with the biased `1/M` normalization.
pub fn variance_field<F: AsRef<[f64]>>(fields: &[F]) -> Result<Vec<f64>, MonteCarloError> {
    let mean = mean_field(fields)?;
    let m = fields.len() as f64;
    let mut var = vec![0.0; mean.len()];
    for f in fields {
        for ((v, x), mu) in var.iter_mut().zip(f.as_ref()).zip(&mean) {
            *v += (x - mu) * (x - mu);
        }
    }
    var.iter_mut().for_each(|v| *v /= m);
    Ok(var)
}

/// `1.96 sqrt(p (1 - p) / M)`.
pub fn confidence_half_width(p: f64, samples: usize) -> f64 {
    1.96 * (p * (1.0 - p) / samples as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelProbability {
    pub label: String,
    pub count: usize,
    pub p: f64,
    pub delta95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrackStatistics {
    pub samples: usize,
    /// The requested labels, then `other` and `failed`.
    pub probabilities: Vec<LabelProbability>,
}

impl CrackStatistics {
    pub fn get(&self, label: &str) -> Option<&LabelProbability> {
        self.probabilities.iter().find(|p| p.label == label)
    }

    pub fn p(&self, label: &str) -> f64 {
        self.get(label).map_or(0.0, |p| p.p)
    }
}

/// Relative label frequencies with 95 % half-widths. Labels outside
/// `label_set` count as `other`, so the probabilities sum to one.
pub fn estimate_probabilities<S: AsRef<str>>(labels: &[S], label_set: &[String]) -> Result<CrackStatistics, MonteCarloError> {
    if labels.is_empty() {
        return Err(MonteCarloError::InvalidArgument("no realizations to count".into()));
    }
    let mut names: Vec<String> = label_set.to_vec();
    for extra in [OTHER_LABEL, FAILED_LABEL] {
        if !names.iter().any(|n| n == extra) {
            names.push(extra.into());
        }
    }
    let mut counts = vec![0usize; names.len()];
    let other = names.iter().position(|n| n == OTHER_LABEL).unwrap_or(0);
    for l in labels {
        let k = names.iter().position(|n| n == l.as_ref()).unwrap_or(other);
        counts[k] += 1;
    }
    let m = labels.len();
    let probabilities = names
        .into_iter()
        .zip(counts)
        .map(|(label, count)| {
            let p = count as f64 / m as f64;
            LabelProbability {
                label,
                count,
                p,
                delta95: confidence_half_width(p, m),
            }
        })
        .collect();
    Ok(CrackStatistics { samples: m, probabilities })
}
