use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::simulator::{
    simulate, simulate_path, write_min_distance_csv, write_trajectory_csv, PathRecord,
    SimulationParams, TrajectoryEnsemble,
};

use super::spec::ExperimentSpec;
use super::svg::{emit_svg, PlotKind, PlotSpec, Series};

/// Per-kernel outcome of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSummary {
    pub kernel: String,
    pub collisions: usize,
    pub numerical_failures: usize,
    pub first_collision_step: Option<usize>,
    pub max_norm: f64,
    pub closest_path: usize,
    pub closest_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactManifest {
    pub files: Vec<PathBuf>,
    pub kernels: Vec<KernelSummary>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn summarize(kernel: String, ensemble: &TrajectoryEnsemble, closest: &PathRecord) -> KernelSummary {
    use crate::simulator::StopReason;
    KernelSummary {
        kernel,
        collisions: ensemble.collision_count(),
        numerical_failures: ensemble
            .paths
            .iter()
            .filter(|p| p.stop.reason == StopReason::NumericalFailure)
            .count(),
        first_collision_step: ensemble
            .paths
            .iter()
            .filter(|p| p.stop.reason.is_collision())
            .map(|p| p.stop.step)
            .min(),
        max_norm: ensemble
            .paths
            .iter()
            .map(|p| p.stop.max_norm)
            .fold(0.0, f64::max),
        closest_path: closest.path_index,
        closest_distance: closest.stop.min_distance,
    }
}

/// Runs every kernel of `spec` and writes its artifacts under `spec.outdir`.
///
/// Per kernel: `<name>_<kernel>_mindist.csv`, `<name>_<kernel>_logdist.svg`, and for the
/// path with the smallest inter-landmark distance `<name>_<kernel>_trajectory.csv` and
/// `<name>_<kernel>_positions.svg`. The resolved spec goes to `<name>_meta.txt`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ArtifactManifest> {
    run_experiment_with(spec, Execution::default())
}

pub fn run_experiment_with(spec: &ExperimentSpec, execution: Execution) -> Result<ArtifactManifest> {
    spec.validate()?;
    fs::create_dir_all(&spec.outdir).map_err(|e| Error::io(&spec.outdir, e))?;
    let initial = spec.initial_config()?;
    let mut files = Vec::new();
    let mut kernels = Vec::new();

    for kernel_spec in &spec.kernels {
        let kernel = kernel_spec.kernel()?.clone();
        let stem = format!("{}_{}", spec.name, kernel_spec.tag());
        let mut params = SimulationParams::new(
            kernel,
            initial.clone(),
            spec.t_max,
            spec.steps,
            spec.paths,
            spec.seed,
        );
        params.thresholds = spec.thresholds;
        params.execution = execution;
        let ensemble = simulate(&params)?;
        let closest = ensemble.closest_approach().expect("paths >= 1");

        params.record_trajectories = true;
        let detailed = simulate_path(&params, closest.path_index);
        debug_assert_eq!(detailed.min_distances, closest.min_distances);
        let single = TrajectoryEnsemble {
            echo: ensemble.echo.clone(),
            paths: vec![detailed],
        };

        if spec.emit_csv {
            let path = spec.outdir.join(format!("{stem}_mindist.csv"));
            let mut buf = Vec::new();
            write_min_distance_csv(&mut buf, &ensemble).map_err(|e| Error::io(&path, e))?;
            write_file(&path, &buf)?;
            files.push(path);

            let path = spec.outdir.join(format!("{stem}_trajectory.csv"));
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &single).map_err(|e| Error::io(&path, e))?;
            write_file(&path, &buf)?;
            files.push(path);
        }

        if spec.emit_svg {
            let dt = ensemble.echo.dt;
            let mut plot = PlotSpec::new(PlotKind::LogDistanceVsTime, kernel_spec.to_string());
            plot.floor = spec.thresholds.eps_abs;
            plot.x_range = Some((0.0, spec.t_max));
            let series: Vec<Series> = ensemble
                .paths
                .iter()
                .map(|p| Series {
                    samples: p
                        .min_distances
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| (k as f64 * dt, d))
                        .collect(),
                    collision: p.stop.reason.is_collision(),
                })
                .collect();
            let path = spec.outdir.join(format!("{stem}_logdist.svg"));
            write_file(&path, emit_svg(&plot, &series)?.as_bytes())?;
            files.push(path);

            let record = &single.paths[0];
            let states = record.states.as_ref().expect("recorded");
            let mut plot = PlotSpec::new(
                PlotKind::PositionVsTime,
                format!("{kernel_spec} path {}", record.path_index),
            );
            plot.y_range = Some((0.0, spec.t_max));
            let series: Vec<Series> = (0..initial.order())
                .map(|coord| Series {
                    samples: states
                        .iter()
                        .enumerate()
                        .map(|(k, s)| (k as f64 * dt, s[coord]))
                        .collect(),
                    collision: record.stop.reason.is_collision(),
                })
                .collect();
            let path = spec.outdir.join(format!("{stem}_positions.svg"));
            write_file(&path, emit_svg(&plot, &series)?.as_bytes())?;
            files.push(path);
        }

        kernels.push(summarize(kernel_spec.to_string(), &ensemble, closest));
    }

    let mut meta = String::from("# landmarkbm experiment metadata\n");
    for k in &kernels {
        meta.push_str(&format!(
            "# {}: collisions={} failures={} closest_path={} closest_distance={}\n",
            k.kernel, k.collisions, k.numerical_failures, k.closest_path, k.closest_distance
        ));
    }
    meta.push_str(&spec.to_config_string());
    let path = spec.outdir.join(format!("{}_meta.txt", spec.name));
    write_file(&path, meta.as_bytes())?;
    files.push(path);

    Ok(ArtifactManifest { files, kernels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(outdir: &Path) -> ExperimentSpec {
        let mut s = ExperimentSpec::preset("fig3", outdir).unwrap();
        s.steps = 200;
        s.paths = 3;
        s
    }

    #[test]
    fn writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(&dir.path().join("nested"));
        let m = run_experiment(&spec).unwrap();
        assert_eq!(m.files.len(), 3 * 4 + 1);
        assert!(m.files.iter().all(|f| f.exists()));
        let names: Vec<String> = m
            .files
            .iter()
            .map(|f| f.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert!(names.contains(&"fig3_matern-0.5_mindist.csv".to_string()));
        assert!(names.contains(&"fig3_matern-1.5-2_logdist.svg".to_string()));
        assert!(names.contains(&"fig3_gauss_positions.svg".to_string()));
        assert!(names.contains(&"fig3_meta.txt".to_string()));
    }

    #[test]
    fn metadata_regenerates_identical_csv() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(dir.path());
        let first = run_experiment(&spec).unwrap();
        let meta = fs::read_to_string(dir.path().join("fig3_meta.txt")).unwrap();
        let mut again = ExperimentSpec::parse(&meta).unwrap();
        assert_eq!(again, spec);
        let other = tempfile::tempdir().unwrap();
        again.outdir = other.path().to_path_buf();
        let second = run_experiment_with(&again, Execution::Sequential).unwrap();
        for (a, b) in first.files.iter().zip(&second.files) {
            if a.extension().unwrap() == "txt" {
                continue;
            }
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap(), "{}", a.display());
        }
    }

    #[test]
    fn unwritable_outdir_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let spec = small(&blocker.join("sub"));
        assert!(matches!(run_experiment(&spec), Err(Error::Io { .. })));
    }
}
