//! Experiment specifications, presets and the flat `key=value` config format.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::geometry::LandmarkConfig;
use crate::kernels::KernelSpec;
use crate::simulator::StopThresholds;

pub const PRESETS: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "fig5"];
pub const SHIPPED_SEED: u64 = 1;

const PRESET_KERNELS: [&str; 3] = ["matern:0.5", "matern:1.5:2", "gauss"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Prefix of every output file name.
    pub name: String,
    pub kernels: Vec<KernelSpec>,
    pub dim: usize,
    pub landmarks: usize,
    /// Flat landmark-major coordinates of the start configuration.
    pub initial: Vec<f64>,
    pub t_max: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub thresholds: StopThresholds,
    pub outdir: PathBuf,
    pub emit_csv: bool,
    pub emit_svg: bool,
}

impl ExperimentSpec {
    /// Resolves a named preset: 20 paths, `10^4` steps on `[0, 1]`, the three experiment
    /// kernels, landmarks at unit spacing on the first axis. `fig5` also covers the
    /// `d = 2, n = 3` layout of the sixth figure.
    pub fn preset(name: &str, outdir: impl Into<PathBuf>) -> Result<Self> {
        let (dim, landmarks) = match name {
            "fig1" => (1, 2),
            "fig2" => (2, 2),
            "fig3" => (1, 3),
            "fig4" => (1, 4),
            "fig5" => (2, 3),
            _ => {
                return Err(Error::invalid(format!(
                    "unknown preset `{name}` (expected one of {})",
                    PRESETS.join(", ")
                )))
            }
        };
        let kernels = PRESET_KERNELS
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<KernelSpec>>>()?;
        Ok(Self {
            name: name.to_string(),
            kernels,
            dim,
            landmarks,
            initial: LandmarkConfig::unit_spacing(landmarks, dim)?.into_flat(),
            t_max: 1.0,
            steps: 10_000,
            paths: 20,
            seed: SHIPPED_SEED,
            thresholds: StopThresholds::default(),
            outdir: outdir.into(),
            emit_csv: true,
            emit_svg: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(Error::invalid(format!(
                "experiment name `{}` must be nonempty and use [A-Za-z0-9_-]",
                self.name
            )));
        }
        if self.kernels.is_empty() {
            return Err(Error::invalid("at least one kernel is required"));
        }
        for k in &self.kernels {
            k.kernel()?;
        }
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(Error::invalid(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.steps == 0 || self.paths == 0 {
            return Err(Error::invalid("steps and paths must be at least 1"));
        }
        self.initial_config()?;
        self.thresholds.validate()
    }

    pub fn initial_config(&self) -> Result<LandmarkConfig> {
        let config = LandmarkConfig::new(self.dim, self.initial.clone())?;
        if config.landmarks() != self.landmarks {
            return Err(Error::invalid(format!(
                "initial configuration has {} landmarks, expected {}",
                config.landmarks(),
                self.landmarks
            )));
        }
        Ok(config)
    }

    /// Renders the spec in the config format; [`ExperimentSpec::parse`] inverts it exactly.
    pub fn to_config_string(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            writeln!(out, "{k}={v}").expect("writing to a String");
        };
        line("name", self.name.clone());
        line(
            "kernels",
            join(&self.kernels.iter().map(ToString::to_string).collect::<Vec<_>>()),
        );
        line("dim", self.dim.to_string());
        line("landmarks", self.landmarks.to_string());
        line(
            "initial",
            join(&self.initial.iter().map(ToString::to_string).collect::<Vec<_>>()),
        );
        line("t_max", self.t_max.to_string());
        line("steps", self.steps.to_string());
        line("paths", self.paths.to_string());
        line("seed", self.seed.to_string());
        line("eps_abs", self.thresholds.eps_abs.to_string());
        line("eps_rel", self.thresholds.eps_rel.to_string());
        line("decades", self.thresholds.decades.to_string());
        line("window", self.thresholds.window.to_string());
        line("outdir", self.outdir.display().to_string());
        line("emit_csv", self.emit_csv.to_string());
        line("emit_svg", self.emit_svg.to_string());
        out
    }

    /// Parses the config format: one `key=value` per line, `#` starts a comment.
    ///
    /// `preset=<name>` seeds every field from that preset; later keys override it. Without
    /// a preset every field except `initial`, `thresholds` and the emit flags is required.
    /// A missing `initial` means unit spacing.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                message: format!("expected key=value, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::Config {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push((line_no, key, value.trim().to_string()));
        }

        let preset = entries.iter().find(|(_, k, _)| k == "preset");
        let mut draft = Draft::default();
        if let Some((line, _, name)) = preset {
            let base = Self::preset(name, ".").map_err(|e| Error::Config {
                line: *line,
                message: e.to_string(),
            })?;
            draft = Draft::from(base);
        }
        for (line, key, value) in &entries {
            let err = |message: String| Error::Config {
                line: *line,
                message,
            };
            draft.set(key, value).map_err(|e| err(e.to_string()))?;
        }
        draft.finish()
    }
}

#[derive(Default)]
struct Draft {
    name: Option<String>,
    kernels: Option<Vec<KernelSpec>>,
    dim: Option<usize>,
    landmarks: Option<usize>,
    initial: Option<Vec<f64>>,
    t_max: Option<f64>,
    steps: Option<usize>,
    paths: Option<usize>,
    seed: Option<u64>,
    thresholds: StopThresholds,
    outdir: Option<PathBuf>,
    emit_csv: bool,
    emit_svg: bool,
    initial_explicit: bool,
}

impl From<ExperimentSpec> for Draft {
    fn from(s: ExperimentSpec) -> Self {
        Self {
            name: Some(s.name),
            kernels: Some(s.kernels),
            dim: Some(s.dim),
            landmarks: Some(s.landmarks),
            initial: Some(s.initial),
            t_max: Some(s.t_max),
            steps: Some(s.steps),
            paths: Some(s.paths),
            seed: Some(s.seed),
            thresholds: s.thresholds,
            outdir: Some(s.outdir),
            emit_csv: s.emit_csv,
            emit_svg: s.emit_svg,
            initial_explicit: false,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("bad value `{value}` for `{key}`")))
}

impl Draft {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "preset" => {}
            "name" => self.name = Some(value.to_string()),
            "kernels" => {
                self.kernels = Some(
                    value
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<Vec<KernelSpec>>>()?,
                )
            }
            "dim" => self.dim = Some(parse_value(key, value)?),
            "landmarks" => self.landmarks = Some(parse_value(key, value)?),
            "initial" => {
                self.initial = Some(
                    value
                        .split(',')
                        .map(|s| parse_value(key, s.trim()))
                        .collect::<Result<Vec<f64>>>()?,
                );
                self.initial_explicit = true;
            }
            "t_max" => self.t_max = Some(parse_value(key, value)?),
            "steps" => self.steps = Some(parse_value(key, value)?),
            "paths" => self.paths = Some(parse_value(key, value)?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "eps_abs" => self.thresholds.eps_abs = parse_value(key, value)?,
            "eps_rel" => self.thresholds.eps_rel = parse_value(key, value)?,
            "decades" => self.thresholds.decades = parse_value(key, value)?,
            "window" => self.thresholds.window = parse_value(key, value)?,
            "outdir" => self.outdir = Some(PathBuf::from(value)),
            "emit_csv" => self.emit_csv = parse_value(key, value)?,
            "emit_svg" => self.emit_svg = parse_value(key, value)?,
            _ => return Err(Error::invalid(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<ExperimentSpec> {
        let missing = |k: &str| Error::Config {
            line: 0,
            message: format!("missing required key `{k}`"),
        };
        let dim = self.dim.ok_or_else(|| missing("dim"))?;
        let landmarks = self.landmarks.ok_or_else(|| missing("landmarks"))?;
        let initial = match (self.initial_explicit, self.initial) {
            (true, Some(v)) => v,
            _ => LandmarkConfig::unit_spacing(landmarks, dim)?.into_flat(),
        };
        let spec = ExperimentSpec {
            name: self.name.ok_or_else(|| missing("name"))?,
            kernels: self.kernels.ok_or_else(|| missing("kernels"))?,
            dim,
            landmarks,
            initial,
            t_max: self.t_max.ok_or_else(|| missing("t_max"))?,
            steps: self.steps.ok_or_else(|| missing("steps"))?,
            paths: self.paths.ok_or_else(|| missing("paths"))?,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            thresholds: self.thresholds,
            outdir: self.outdir.unwrap_or_else(|| PathBuf::from(".")),
            emit_csv: self.emit_csv,
            emit_svg: self.emit_svg,
        };
        spec.validate()?;
        Ok(spec)
    }
}
