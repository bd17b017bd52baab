//! Experiment presets, config files and artifact emission.

mod run;
mod spec;
mod svg;

pub use run::{run_experiment, run_experiment_with, ArtifactManifest, KernelSummary};
pub use spec::{ExperimentSpec, PRESETS, SHIPPED_SEED};
pub use svg::{emit_svg, PlotKind, PlotSpec, Series};
