use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use landmark_bm::classifier::{classify, classify_numerically};
use landmark_bm::distance_sde::{simulate_distance, write_paths_csv, DistanceCoefficients, DistanceRun, DriftForm};
use landmark_bm::experiments::{run_experiment, ExperimentSpec};
use landmark_bm::geometry::LandmarkConfig;
use landmark_bm::kernels::KernelSpec;
use landmark_bm::simulator::{simulate, write_min_distance_csv, write_trajectory_csv, SimulationParams};
use landmark_bm::{Error, Result};

/// Brownian motion on kernel-induced landmark spaces.
#[derive(Debug, Parser)]
#[command(name = "landmarkbm", version)]
struct Cli {
    /// Master seed of the per-path noise streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, visible_alias = "out", global = true)]
    outdir: Option<PathBuf>,
    /// Kernel: matern:<nu>[:<scale>], gauss[:<scale>] or asymptotic:<D>:<gamma>[:log].
    #[arg(long, global = true)]
    kernel: Option<KernelSpec>,
    /// Ambient dimension d.
    #[arg(long, global = true)]
    dim: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate landmark Brownian motion and write min-distance (and trajectory) CSVs.
    Simulate(SimulateArgs),
    /// Simulate the two-landmark distance SDE.
    DistanceSde(DistanceArgs),
    /// Classify the zero boundary of the distance SDE from the kernel asymptotics.
    Classify {
        /// Also print the classification as JSON.
        #[arg(long)]
        detail: bool,
    },
    /// Cross-check the closed-form classification against the numerical decision tree.
    Verify {
        /// Right end of the interval (0, a] used by the integrability tests.
        #[arg(long, default_value_t = 1.0)]
        anchor: f64,
    },
    /// Run an experiment preset or config file.
    ///
    /// Presets fig1..fig5 use 20 paths, 10^4 steps on [0, 1] and the kernels
    /// matern:0.5, matern:1.5:2 and gauss, with landmarks at unit spacing. fig5 (d=2, n=3)
    /// also serves the sixth figure, which shares its setup.
    Experiment {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        /// Flat key=value config file; `#` starts a comment.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2)]
    landmarks: usize,
    /// Comma-separated flat coordinates; unit spacing on the first axis by default.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    initial: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    paths: usize,
    /// Also write full trajectories.
    #[arg(long)]
    trajectories: bool,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    #[arg(long, default_value_t = 1.0)]
    r0: f64,
    #[arg(long, default_value_t = 1.0)]
    t_max: f64,
    #[arg(long, default_value_t = 10_000)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    /// Absorption threshold; 1e-8 * r0 by default.
    #[arg(long)]
    absorb_eps: Option<f64>,
    /// Add the (d-1)(lambda-k)/r term that the radial part of |u| picks up for d >= 2.
    #[arg(long)]
    ito_corrected: bool,
}

const DEFAULT_KERNEL: &str = "matern:0.5";
const DEFAULT_SEED: u64 = 1;

fn kernel_or_default(cli: &Cli) -> KernelSpec {
    cli.kernel
        .clone()
        .unwrap_or_else(|| DEFAULT_KERNEL.parse().expect("valid default kernel"))
}

fn outdir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.outdir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LANDMARKBM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidArgument(format!("LANDMARKBM_THREADS must be a nonnegative integer, got `{raw}`"))
    })?;
    #[cfg(feature = "parallel")]
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let dim = cli.dim.unwrap_or(1);
    let seed = cli.seed.unwrap_or(DEFAULT_SEED);
    match &cli.command {
        Command::Classify { detail } => {
            let spec = kernel_or_default(&cli);
            let a = spec.asymptotics();
            let c = classify(a.gamma, a.has_log, dim)?;
            println!(
                "kernel={spec} d={dim} gamma={} kind={} collision={} complete={}",
                a.gamma, c.kind, c.collision_possible, c.brownian_complete
            );
            if *detail {
                println!("{}", serde_json::to_string_pretty(&c).expect("serializable"));
            }
        }
        Command::Verify { anchor } => {
            let spec = kernel_or_default(&cli);
            let a = spec.asymptotics();
            let analytic = classify(a.gamma, a.has_log, dim)?;
            let numerical = classify_numerically(spec.kernel()?, dim, *anchor)?;
            match numerical.kind() {
                Some(kind) => {
                    let agree = kind == analytic.kind;
                    println!(
                        "kernel={spec} d={dim} analytic={} numerical={kind} agreement={agree}",
                        analytic.kind
                    );
                    if !agree {
                        return Err(Error::Inconclusive(format!(
                            "numerical {kind} disagrees with analytic {}",
                            analytic.kind
                        )));
                    }
                }
                None => {
                    let stage = numerical.inconclusive_stage.unwrap_or("unknown");
                    println!(
                        "kernel={spec} d={dim} analytic={} numerical=inconclusive stage={stage}",
                        analytic.kind
                    );
                    return Err(Error::Inconclusive(stage.to_string()));
                }
            }
        }
        Command::Simulate(args) => {
            let spec = kernel_or_default(&cli);
            let initial = match &args.initial {
                Some(coords) => LandmarkConfig::new(dim, coords.clone())?,
                None => LandmarkConfig::unit_spacing(args.landmarks, dim)?,
            };
            let mut params = SimulationParams::new(
                spec.kernel()?.clone(),
                initial,
                args.t_max,
                args.steps,
                args.paths,
                seed,
            );
            params.record_trajectories = args.trajectories;
            let ensemble = simulate(&params)?;
            let dir = outdir(&cli)?;
            let path = dir.join(format!("simulate_{}_mindist.csv", spec.tag()));
            write_min_distance_csv(create(&path)?, &ensemble).map_err(io_at(&path))?;
            println!("{}", path.display());
            if args.trajectories {
                let path = dir.join(format!("simulate_{}_trajectory.csv", spec.tag()));
                write_trajectory_csv(create(&path)?, &ensemble).map_err(io_at(&path))?;
                println!("{}", path.display());
            }
            eprintln!(
                "{} of {} paths stopped on a collision",
                ensemble.collision_count(),
                ensemble.paths.len()
            );
        }
        Command::DistanceSde(args) => {
            let spec = kernel_or_default(&cli);
            let form = if args.ito_corrected {
                DriftForm::ItoCorrected
            } else {
                DriftForm::Reduced
            };
            let coeffs = DistanceCoefficients::new(spec.kernel()?.clone(), dim)?.with_drift_form(form);
            let mut run = DistanceRun::new(args.r0, args.t_max, args.steps, args.paths, seed);
            run.absorb_eps = args.absorb_eps;
            let paths = simulate_distance(&coeffs, &run)?;
            let dir = outdir(&cli)?;
            let path = dir.join(format!("distance_{}_d{dim}.csv", spec.tag()));
            write_paths_csv(create(&path)?, &paths).map_err(io_at(&path))?;
            println!("{}", path.display());
            eprintln!(
                "{} of {} paths absorbed",
                paths.iter().filter(|p| p.is_absorbed()).count(),
                paths.len()
            );
        }
        Command::Experiment { preset, config } => {
            let mut spec = match (preset, config) {
                (Some(name), _) => ExperimentSpec::preset(name, ".")?,
                (None, Some(path)) => {
                    let text = fs::read_to_string(path).map_err(io_at(path))?;
                    ExperimentSpec::parse(&text)?
                }
                (None, None) => unreachable!("clap requires one of --preset/--config"),
            };
            if let Some(dir) = &cli.outdir {
                spec.outdir = dir.clone();
            }
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            if let Some(kernel) = &cli.kernel {
                spec.kernels = vec![kernel.clone()];
            }
            if let Some(d) = cli.dim {
                spec.dim = d;
                spec.initial = LandmarkConfig::unit_spacing(spec.landmarks, d)?.into_flat();
            }
            let manifest = run_experiment(&spec)?;
            for f in &manifest.files {
                println!("{}", f.display());
            }
            for k in &manifest.kernels {
                eprintln!(
                    "{}: {} of {} paths stopped on a collision",
                    k.kernel, k.collisions, spec.paths
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
