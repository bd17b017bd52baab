//! Brownian motion on kernel-induced landmark spaces.
//!
//! The crate samples Riemannian Brownian motion of `n` landmarks in `R^d` under the
//! metric whose cometric is a radial kernel, reduces the two-landmark case to the
//! one-dimensional SDE of the inter-landmark distance, and classifies the boundary at zero
//! distance both in closed form and from the SDE coefficients.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod distance_sde;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod geometry;
pub mod kernels;
pub mod quadrature;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use classifier::{classify, classify_numerically, SingularityClassification, SingularityKind};
pub use distance_sde::{simulate_distance, DistanceCoefficients, DistancePath, DistanceRun, DriftForm};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::LandmarkConfig;
pub use kernels::{make_gaussian, make_matern, KernelSpec, RadialKernel};
pub use simulator::{em_step, simulate, SimulationParams, StopReason, StopThresholds, TrajectoryEnsemble};
