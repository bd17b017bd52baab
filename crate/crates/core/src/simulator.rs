//! Euler-Maruyama simulation of landmark Brownian motion with collision monitoring.
//!
//! In coordinates the generator is `1/2 Delta_g`, so one step is
//! `q' = q - 1/2 K^{lm} Gamma^i_{lm} dt + sqrt(K) sqrt(dt) xi`. Paths stop when the
//! collision monitor fires or a step produces a state the geometry cannot handle; they are
//! truncated at that point, never padded.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::geometry::{
    christoffel_from_parts, cometric_matrix, cometric_partials, invert_spd, sqrt_psd,
    LandmarkConfig,
};
use crate::kernels::RadialKernel;
use crate::rng::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopThresholds {
    pub eps_abs: f64,
    /// Relative to the initial minimum pairwise distance.
    pub eps_rel: f64,
    /// Decades of `log10(min distance)` lost within the window that count as a collapse.
    pub decades: f64,
    pub window: usize,
}

impl Default for StopThresholds {
    fn default() -> Self {
        Self {
            eps_abs: 1e-8,
            eps_rel: 1e-6,
            decades: 3.0,
            window: 10,
        }
    }
}

impl StopThresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eps_abs >= 0.0
            && self.eps_rel >= 0.0
            && self.decades > 0.0
            && self.eps_abs.is_finite()
            && self.eps_rel.is_finite()
            && self.decades.is_finite()
            && self.window >= 2;
        if !ok {
            return Err(Error::invalid(format!("invalid stopping thresholds {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    Completed,
    CollisionSmallDistance,
    CollisionRapidDecrease,
    NumericalFailure,
}

impl StopReason {
    pub fn is_collision(self) -> bool {
        matches!(
            self,
            StopReason::CollisionSmallDistance | StopReason::CollisionRapidDecrease
        )
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Completed => "Completed",
            StopReason::CollisionSmallDistance => "CollisionSmallDistance",
            StopReason::CollisionRapidDecrease => "CollisionRapidDecrease",
            StopReason::NumericalFailure => "NumericalFailure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRecord {
    pub reason: StopReason,
    /// Index of the last recorded state.
    pub step: usize,
    pub min_distance: f64,
    pub max_norm: f64,
    pub message: Option<String>,
}

/// One simulated path: min-distance series for every recorded step and, on request, the
/// flat coordinates of every recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path_index: usize,
    pub min_distances: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
    pub stop: StopRecord,
}

/// Parameters echoed into every ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleEcho {
    pub kernel: String,
    pub dim: usize,
    pub landmarks: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub echo: EnsembleEcho,
    pub paths: Vec<PathRecord>,
}

impl TrajectoryEnsemble {
    pub fn collision_count(&self) -> usize {
        self.paths.iter().filter(|p| p.stop.reason.is_collision()).count()
    }

    /// Path whose minimum over time of the min pairwise distance is smallest.
    pub fn closest_approach(&self) -> Option<&PathRecord> {
        self.paths
            .iter()
            .min_by(|a, b| a.stop.min_distance.total_cmp(&b.stop.min_distance))
    }
}

#[derive(Debug, Clone)]
pub struct SimulationParams {
    pub kernel: RadialKernel,
    pub initial: LandmarkConfig,
    pub t_max: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub thresholds: StopThresholds,
    pub record_trajectories: bool,
    pub execution: Execution,
}

impl SimulationParams {
    pub fn new(
        kernel: RadialKernel,
        initial: LandmarkConfig,
        t_max: f64,
        steps: usize,
        paths: usize,
        seed: u64,
    ) -> Self {
        Self {
            kernel,
            initial,
            t_max,
            steps,
            paths,
            seed,
            thresholds: StopThresholds::default(),
            record_trajectories: false,
            execution: Execution::default(),
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps.max(1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invalid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.paths == 0 {
            return Err(Error::invalid("at least one path is required"));
        }
        self.thresholds.validate()
    }

    fn echo(&self) -> EnsembleEcho {
        EnsembleEcho {
            kernel: self.kernel.to_string(),
            dim: self.initial.dim(),
            landmarks: self.initial.landmarks(),
            dt: self.dt(),
            steps: self.steps,
            seed: self.seed,
        }
    }
}

pub fn min_pairwise_distance(config: &LandmarkConfig) -> f64 {
    config.min_pairwise_distance()
}

/// Deterministic Ito drift `-1/2 sum_{lm} K^{lm} Gamma^i_{lm}` at `config`.
pub fn drift(config: &LandmarkConfig, kernel: &RadialKernel) -> Result<Vec<f64>> {
    let cometric = cometric_matrix(config, kernel);
    let metric = invert_spd(&cometric)?;
    let partials = cometric_partials(config, kernel);
    let gamma = christoffel_from_parts(&cometric, &metric, &partials);
    Ok(gamma.contract(&cometric).into_iter().map(|v| -0.5 * v).collect())
}

/// One Euler-Maruyama step driven by `noise` (`n * d` standard normals).
pub fn em_step(
    config: &LandmarkConfig,
    kernel: &RadialKernel,
    dt: f64,
    noise: &[f64],
) -> Result<LandmarkConfig> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let m = config.order();
    if noise.len() != m {
        return Err(Error::invalid(format!(
            "noise has length {}, expected {m}",
            noise.len()
        )));
    }
    let cometric = cometric_matrix(config, kernel);
    let metric = invert_spd(&cometric)?;
    let partials = cometric_partials(config, kernel);
    let gamma = christoffel_from_parts(&cometric, &metric, &partials);
    let contracted = gamma.contract(&cometric);
    let root = sqrt_psd(&cometric)?;
    let root = root.as_matrix();
    let sqrt_dt = dt.sqrt();
    let next: Vec<f64> = (0..m)
        .map(|i| {
            let diffusion: f64 = (0..m).map(|j| root[(i, j)] * noise[j]).sum();
            config.as_flat()[i] - 0.5 * contracted[i] * dt + sqrt_dt * diffusion
        })
        .collect();
    if let Some(pos) = next.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("coordinate {pos} after Euler-Maruyama step")));
    }
    LandmarkConfig::new(config.dim(), next)
}

/// Checks the most recent min distances; `history` ends with the current value and holds
/// at most `thresholds.window` entries that matter.
pub fn collision_monitor(
    history: &[f64],
    reference: f64,
    thresholds: &StopThresholds,
) -> Option<StopReason> {
    let &current = history.last()?;
    if current < thresholds.eps_abs || current < thresholds.eps_rel * reference {
        return Some(StopReason::CollisionSmallDistance);
    }
    let start = history.len().saturating_sub(thresholds.window);
    let peak = history[start..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if peak.log10() - current.log10() > thresholds.decades {
        return Some(StopReason::CollisionRapidDecrease);
    }
    None
}

pub fn simulate(params: &SimulationParams) -> Result<TrajectoryEnsemble> {
    params.validate()?;
    let paths = map_indices(params.execution, params.paths, |p| simulate_path(params, p));
    Ok(TrajectoryEnsemble {
        echo: params.echo(),
        paths,
    })
}

/// Simulates path `path_index` of the ensemble described by `params`; identical to the
/// corresponding entry of [`simulate`].
pub fn simulate_path(params: &SimulationParams, path_index: usize) -> PathRecord {
    let dt = params.dt();
    let kernel = &params.kernel;
    let thresholds = &params.thresholds;
    let mut noise_stream = NoiseStream::new(params.seed, path_index as u64, params.initial.order());
    let mut noise = vec![0.0; params.initial.order()];

    let mut state = params.initial.clone();
    let reference = state.min_pairwise_distance();
    let mut min_distances = Vec::with_capacity(params.steps + 1);
    min_distances.push(reference);
    let mut states = params
        .record_trajectories
        .then(|| vec![state.as_flat().to_vec()]);
    let mut min_distance = reference;
    let mut max_norm = state.norm();

    let finish = |reason, step, min_distance, max_norm, message| StopRecord {
        reason,
        step,
        min_distance,
        max_norm,
        message,
    };

    for step in 1..=params.steps {
        noise_stream.fill_step(step as u64 - 1, &mut noise);
        let next = match em_step(&state, kernel, dt, &noise) {
            Ok(next) => next,
            Err(Error::CoincidentLandmarks { first, second }) => {
                min_distances.push(0.0);
                if let Some(s) = states.as_mut() {
                    s.push(state.as_flat().to_vec());
                }
                let message = format!("landmarks {first} and {second} coincide");
                return PathRecord {
                    path_index,
                    min_distances,
                    states,
                    stop: finish(
                        StopReason::CollisionSmallDistance,
                        step,
                        0.0,
                        max_norm,
                        Some(message),
                    ),
                };
            }
            Err(e) => {
                return PathRecord {
                    path_index,
                    min_distances,
                    states,
                    stop: finish(
                        StopReason::NumericalFailure,
                        step - 1,
                        min_distance,
                        max_norm,
                        Some(e.to_string()),
                    ),
                };
            }
        };
        state = next;
        let current = state.min_pairwise_distance();
        min_distance = min_distance.min(current);
        max_norm = max_norm.max(state.norm());
        min_distances.push(current);
        if let Some(s) = states.as_mut() {
            s.push(state.as_flat().to_vec());
        }
        if let Some(reason) = collision_monitor(&min_distances, reference, thresholds) {
            return PathRecord {
                path_index,
                min_distances,
                states,
                stop: finish(reason, step, min_distance, max_norm, None),
            };
        }
    }
    PathRecord {
        path_index,
        min_distances,
        states,
        stop: finish(StopReason::Completed, params.steps, min_distance, max_norm, None),
    }
}

/// `path_id,step,t,min_dist` for every recorded step.
pub fn write_min_distance_csv(mut out: impl Write, ensemble: &TrajectoryEnsemble) -> std::io::Result<()> {
    writeln!(out, "path_id,step,t,min_dist")?;
    let dt = ensemble.echo.dt;
    for p in &ensemble.paths {
        for (step, d) in p.min_distances.iter().enumerate() {
            writeln!(out, "{},{},{},{}", p.path_index, step, step as f64 * dt, d)?;
        }
    }
    Ok(())
}

/// `path_id,step,t,x_1_1,..,x_n_d,min_dist,stop_reason`; `stop_reason` is empty except on
/// the final row of each path. Paths without recorded states are skipped.
pub fn write_trajectory_csv(mut out: impl Write, ensemble: &TrajectoryEnsemble) -> std::io::Result<()> {
    let (n, d) = (ensemble.echo.landmarks, ensemble.echo.dim);
    write!(out, "path_id,step,t")?;
    for i in 1..=n {
        for c in 1..=d {
            write!(out, ",x_{i}_{c}")?;
        }
    }
    writeln!(out, ",min_dist,stop_reason")?;
    let dt = ensemble.echo.dt;
    for p in &ensemble.paths {
        let Some(states) = &p.states else { continue };
        let last = states.len().saturating_sub(1);
        for (step, coords) in states.iter().enumerate() {
            write!(out, "{},{},{}", p.path_index, step, step as f64 * dt)?;
            for x in coords {
                write!(out, ",{x}")?;
            }
            let reason = if step == last {
                p.stop.reason.to_string()
            } else {
                String::new()
            };
            writeln!(out, ",{},{}", p.min_distances[step], reason)?;
        }
    }
    Ok(())
}
