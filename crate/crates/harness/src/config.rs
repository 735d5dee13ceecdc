//! Experiment settings and the `key=value` config file format.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use csim::coupling::TargetDistribution;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Csim,
    Grid,
    Resonator,
    Denoiser,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Csim, Method::Grid, Method::Resonator, Method::Denoiser];

    pub fn name(self) -> &'static str {
        match self {
            Method::Csim => "csim",
            Method::Grid => "grid",
            Method::Resonator => "resonator",
            Method::Denoiser => "denoiser",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim().to_ascii_lowercase())
            .with_context(|| format!("unknown method `{s}` (expected csim, grid, resonator or denoiser)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Sweep,
    Convergence,
    Bundle,
    Displacement,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Sweep => "sweep",
            Experiment::Convergence => "convergence",
            Experiment::Bundle => "bundle",
            Experiment::Displacement => "displacement",
        }
    }
}

/// Everything an experiment run depends on. Two runs with equal specs write
/// byte-identical CSV and JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub n: usize,
    /// Value dimensions to run; most experiments take one, convergence takes several.
    pub dims: Vec<usize>,
    pub trials: usize,
    pub noise_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub couplings_per_phase: usize,
    pub coupling_dist: TargetDistribution,
    pub grid_spacing: f64,
    /// Radius of the ball values are drawn from.
    pub radius: f64,
    /// Largest bundle size for the bundle experiment.
    pub max_items: usize,
    pub resonator_iters: usize,
    /// SSP dimension of the denoiser arm, which is trained at a smaller scale.
    pub denoiser_n: usize,
    pub denoiser_samples: usize,
    pub denoiser_epochs: usize,
    /// Trained networks are cached here by their training inputs.
    pub denoiser_cache: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        let mut spec = Self {
            experiment,
            n: 1024,
            dims: vec![1],
            trials: 100,
            noise_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            methods: Method::ALL.to_vec(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            couplings_per_phase: 10,
            coupling_dist: TargetDistribution::Uniform,
            grid_spacing: 0.1,
            radius: 5.0,
            max_items: 5,
            resonator_iters: 100,
            denoiser_n: 256,
            denoiser_samples: 10_000,
            denoiser_epochs: 50,
            denoiser_cache: None,
        };
        match experiment {
            Experiment::Sweep => {}
            Experiment::Convergence => {
                spec.dims = vec![1, 2, 3];
                spec.noise_grid = vec![0.5];
                spec.methods = vec![Method::Csim];
            }
            Experiment::Bundle => {
                spec.noise_grid = vec![];
                spec.methods = vec![Method::Csim];
            }
            Experiment::Displacement => {
                spec.dims = vec![2];
                spec.trials = 1;
                spec.noise_grid = vec![];
                spec.methods = vec![Method::Csim];
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        if self.n < 2 {
            bail!("n must be >= 2, got {}", self.n);
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            bail!("value dimensions must be non-empty and >= 1, got {:?}", self.dims);
        }
        if let Some(s) = self.noise_grid.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            bail!("noise levels must be finite and >= 0, got {s}");
        }
        if matches!(self.experiment, Experiment::Sweep | Experiment::Convergence) && self.noise_grid.is_empty() {
            bail!("{} needs at least one noise level", self.experiment.name());
        }
        if self.methods.is_empty() {
            bail!("at least one method is required");
        }
        if !(self.grid_spacing > 0.0) || !(self.radius > 0.0) {
            bail!("grid spacing and radius must be > 0");
        }
        if self.experiment == Experiment::Displacement && self.dims != [2] {
            bail!("displacement runs in two dimensions, got d = {:?}", self.dims);
        }
        if self.experiment == Experiment::Bundle && self.max_items == 0 {
            bail!("max-items must be >= 1");
        }
        if self.methods.contains(&Method::Denoiser) && (self.denoiser_n < 2 || self.denoiser_samples == 0 || self.denoiser_epochs == 0) {
            bail!("denoiser arm needs denoiser-n >= 2 and a positive training budget");
        }
        Ok(())
    }

    /// Applies one `key=value` setting. Keys match the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let parse_err = || format!("invalid value `{value}` for `{key}`");
        match key.trim() {
            "n" => self.n = value.parse().with_context(parse_err)?,
            "d" => self.dims = parse_list(value).with_context(parse_err)?,
            "trials" => self.trials = value.parse().with_context(parse_err)?,
            "sigma" => self.noise_grid = parse_list(value).with_context(parse_err)?,
            "methods" => self.methods = parse_list(value).with_context(parse_err)?,
            "seed" => self.seed = value.parse().with_context(parse_err)?,
            "out" => self.output_dir = PathBuf::from(value),
            "couplings-per-phase" => self.couplings_per_phase = value.parse().with_context(parse_err)?,
            "coupling-dist" => {
                self.coupling_dist = value.parse().map_err(|e| anyhow::anyhow!("{e}")).with_context(parse_err)?
            }
            "grid-spacing" => self.grid_spacing = value.parse().with_context(parse_err)?,
            "radius" => self.radius = value.parse().with_context(parse_err)?,
            "max-items" => self.max_items = value.parse().with_context(parse_err)?,
            "resonator-iters" => self.resonator_iters = value.parse().with_context(parse_err)?,
            "denoiser-n" => self.denoiser_n = value.parse().with_context(parse_err)?,
            "denoiser-samples" => self.denoiser_samples = value.parse().with_context(parse_err)?,
            "denoiser-epochs" => self.denoiser_epochs = value.parse().with_context(parse_err)?,
            "denoiser-cache" => {
                self.denoiser_cache = if value == "none" || value.is_empty() { None } else { Some(value.into()) }
            }
            other => bail!("unknown setting `{other}`"),
        }
        Ok(())
    }

    /// Applies every setting in a config file. Blank lines and `#` comments
    /// are skipped; later lines override earlier ones.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').with_context(|| format!("line {}: expected key=value", lineno + 1))?;
            self.set(key, value).with_context(|| format!("line {}", lineno + 1))?;
        }
        Ok(())
    }
}

/// Comma- or whitespace-separated list.
fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, T::Err> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(str::parse).collect()
}
