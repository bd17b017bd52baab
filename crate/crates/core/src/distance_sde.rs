//! One-dimensional SDE for the separation of two landmarks,
//! `dr = sigma(r) dB + b(r) dt` with
//! `sigma(r) = sqrt(2 (lambda - k(r)))` and `b(r) = ((d-1) k(r) - lambda) k'(r) / (lambda + k(r))`,
//! integrated by Euler-Maruyama with absorption at a small threshold.

use std::io::Write;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::kernels::RadialKernel;
use crate::rng::NoiseStream;

/// Which drift the distance equation uses.
///
/// `Reduced` is the closed-form `b(r)` above. `ItoCorrected` adds the second-order Itô
/// term `(d - 1)(lambda - k(r)) / r` that `r = |x - y|` picks up from the curvature of
/// the Euclidean norm when `d >= 2`; for `d = 1` the two coincide.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DriftForm {
    #[default]
    Reduced,
    ItoCorrected,
}

#[derive(Debug, Clone)]
pub struct DistanceCoefficients {
    kernel: RadialKernel,
    dim: usize,
    form: DriftForm,
}

impl DistanceCoefficients {
    pub fn new(kernel: RadialKernel, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be at least 1"));
        }
        Ok(Self {
            kernel,
            dim,
            form: DriftForm::Reduced,
        })
    }

    pub fn with_drift_form(mut self, form: DriftForm) -> Self {
        self.form = form;
        self
    }

    pub fn kernel(&self) -> &RadialKernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn drift_form(&self) -> DriftForm {
        self.form
    }

    /// `sigma(r)^2 = 2 max(lambda - k(r), 0)`.
    #[inline]
    pub fn sigma_squared(&self, r: f64) -> f64 {
        2.0 * self.kernel.deficit(r).max(0.0)
    }

    /// Diffusion coefficient; `sigma(0) = 0`.
    #[inline]
    pub fn sigma(&self, r: f64) -> f64 {
        self.sigma_squared(r).sqrt()
    }

    /// Drift `b(r)` for `r > 0`.
    pub fn drift(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::invalid(format!("drift needs r > 0, got {r}")));
        }
        Ok(self.drift_unchecked(r))
    }

    #[inline]
    pub(crate) fn drift_unchecked(&self, r: f64) -> f64 {
        let lam = self.kernel.lambda();
        let k = self.kernel.value(r);
        let dk = self.kernel.derivative(r);
        let extra = (self.dim - 1) as f64;
        let reduced = (extra * k - lam) * dk / (lam + k);
        match self.form {
            DriftForm::Reduced => reduced,
            DriftForm::ItoCorrected => reduced + extra * self.kernel.deficit(r) / r,
        }
    }
}

/// Parameters of a distance-SDE ensemble.
#[derive(Debug, Clone)]
pub struct DistanceRun {
    pub r0: f64,
    pub t_max: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    /// Absorption threshold; defaults to `1e-8 * r0`.
    pub absorb_eps: Option<f64>,
    pub execution: Execution,
}

impl DistanceRun {
    pub fn new(r0: f64, t_max: f64, steps: usize, paths: usize, seed: u64) -> Self {
        Self {
            r0,
            t_max,
            steps,
            paths,
            seed,
            absorb_eps: None,
            execution: Execution::default(),
        }
    }

    pub fn absorb_eps(&self) -> f64 {
        self.absorb_eps.unwrap_or(1e-8 * self.r0)
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.steps.max(1) as f64
    }

    fn validate(&self) -> Result<()> {
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(Error::invalid(format!("r0 must be positive, got {}", self.r0)));
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invalid(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if self.paths == 0 {
            return Err(Error::invalid("at least one path is required"));
        }
        let eps = self.absorb_eps();
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::invalid(format!(
                "absorption threshold must be nonnegative, got {eps}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub step: usize,
    pub message: String,
}

/// One sampled distance path on the grid `t_k = k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistancePath {
    pub path_index: usize,
    pub seed: u64,
    pub r0: f64,
    pub dt: f64,
    /// `values[0] = r0`; zero from `absorbed_at` onward.
    pub values: Vec<f64>,
    pub absorbed_at: Option<usize>,
    /// Set when a non-finite state aborted the path; `values` stops before that step.
    pub failure: Option<PathFailure>,
}

impl DistancePath {
    pub fn is_absorbed(&self) -> bool {
        self.absorbed_at.is_some()
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("path has at least r0")
    }

    /// First grid time at which the path reaches `level` from above, if any.
    pub fn first_passage_below(&self, level: f64) -> Option<f64> {
        self.values
            .iter()
            .position(|&r| r <= level)
            .map(|k| k as f64 * self.dt)
    }
}

/// Euler-Maruyama ensemble of the distance SDE.
pub fn simulate_distance(coeffs: &DistanceCoefficients, run: &DistanceRun) -> Result<Vec<DistancePath>> {
    run.validate()?;
    Ok(map_indices(run.execution, run.paths, |path| {
        simulate_distance_path(coeffs, run, path)
    }))
}

fn simulate_distance_path(coeffs: &DistanceCoefficients, run: &DistanceRun, path: usize) -> DistancePath {
    let dt = run.dt();
    let sqrt_dt = dt.sqrt();
    let eps = run.absorb_eps();
    let mut noise = NoiseStream::new(run.seed, path as u64, 1);
    let mut xi = [0.0];
    let mut values = Vec::with_capacity(run.steps + 1);
    values.push(run.r0);
    let mut r = run.r0;
    let mut absorbed_at = None;
    let mut failure = None;
    for step in 0..run.steps {
        noise.fill_step(step as u64, &mut xi);
        let next = r + coeffs.drift_unchecked(r) * dt + coeffs.sigma(r) * sqrt_dt * xi[0];
        if !next.is_finite() {
            failure = Some(PathFailure {
                step: step + 1,
                message: format!("non-finite distance after r = {r}"),
            });
            break;
        }
        if next <= eps {
            absorbed_at = Some(step + 1);
            values.resize(run.steps + 1, 0.0);
            break;
        }
        values.push(next);
        r = next;
    }
    DistancePath {
        path_index: path,
        seed: run.seed,
        r0: run.r0,
        dt,
        values,
        absorbed_at,
        failure,
    }
}

/// CSV dump with columns `path_id,step,t,r,absorbed`.
pub fn write_paths_csv(mut out: impl Write, paths: &[DistancePath]) -> std::io::Result<()> {
    writeln!(out, "path_id,step,t,r,absorbed")?;
    for p in paths {
        for (step, r) in p.values.iter().enumerate() {
            let absorbed = p.absorbed_at.is_some_and(|a| step >= a);
            writeln!(
                out,
                "{},{},{},{},{}",
                p.path_index,
                step,
                step as f64 * p.dt,
                r,
                absorbed
            )?;
        }
    }
    Ok(())
}
