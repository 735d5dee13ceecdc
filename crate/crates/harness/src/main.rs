use std::fs;
use std::io::{self, Read};
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use csim::fhrr::{encode, SspVector};
use csim_harness::config::{Experiment, ExperimentSpec};
use csim_harness::experiments::{
    build_codec, run_bundle, run_convergence, run_displacement, run_sweep, write_bundle, write_convergence,
    write_displacement, write_sweep,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "csim", version, about = "Phase-coupled SSP decoding experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare methods over a grid of noise levels.
    Sweep(Common),
    /// Count iterations of both decoder stages.
    Convergence(Common),
    /// Clean up values queried from bundles of 1..max-items items.
    Bundle(Common),
    /// Decode the displacement between two bundled objects.
    Displacement(Common),
    /// Decode one SSP read from a JSON file (`-` for stdin).
    Decode {
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Encode a value and print the SSP as JSON.
    Encode {
        /// Comma-separated value, e.g. `1.5,-2.3`.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// `key=value` settings file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Value dimensions, comma-separated.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Noise level; repeat or comma-separate for several.
    #[arg(long)]
    sigma: Vec<String>,
    /// Comma-separated subset of csim,grid,resonator,denoiser.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    couplings_per_phase: Option<usize>,
    /// uniform, gaussian or laplace.
    #[arg(long)]
    coupling_dist: Option<String>,
    #[arg(long)]
    grid_spacing: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    max_items: Option<usize>,
    #[arg(long)]
    resonator_iters: Option<usize>,
    #[arg(long)]
    denoiser_n: Option<usize>,
    #[arg(long)]
    denoiser_samples: Option<usize>,
    #[arg(long)]
    denoiser_epochs: Option<usize>,
    /// Directory for trained denoisers; `none` disables caching.
    #[arg(long)]
    denoiser_cache: Option<String>,
}

impl Common {
    fn spec(&self, experiment: Experiment) -> Result<ExperimentSpec> {
        let mut spec = ExperimentSpec::new(experiment);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            spec.apply_config(&text).with_context(|| format!("in {}", path.display()))?;
        }
        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut push = |key, v: Option<String>| {
            if let Some(v) = v {
                flags.push((key, v));
            }
        };
        push("n", self.n.map(|v| v.to_string()));
        push("d", self.d.clone());
        push("trials", self.trials.map(|v| v.to_string()));
        push("sigma", (!self.sigma.is_empty()).then(|| self.sigma.join(",")));
        push("methods", self.methods.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("couplings-per-phase", self.couplings_per_phase.map(|v| v.to_string()));
        push("coupling-dist", self.coupling_dist.clone());
        push("grid-spacing", self.grid_spacing.map(|v| v.to_string()));
        push("radius", self.radius.map(|v| v.to_string()));
        push("max-items", self.max_items.map(|v| v.to_string()));
        push("resonator-iters", self.resonator_iters.map(|v| v.to_string()));
        push("denoiser-n", self.denoiser_n.map(|v| v.to_string()));
        push("denoiser-samples", self.denoiser_samples.map(|v| v.to_string()));
        push("denoiser-epochs", self.denoiser_epochs.map(|v| v.to_string()));
        push("denoiser-cache", self.denoiser_cache.clone());
        for (key, value) in flags {
            spec.set(key, &value).with_context(|| format!("--{key}"))?;
        }
        Ok(spec)
    }

    fn single_d(spec: &ExperimentSpec) -> Result<usize> {
        match spec.dims[..] {
            [d] => Ok(d),
            _ => bail!("expected a single value dimension, got {:?}", spec.dims),
        }
    }
}

/// An SSP given either as `{"phases": [...]}` or as a bare phase array.
#[derive(Deserialize)]
#[serde(untagged)]
enum SspInput {
    Ssp(SspVector),
    Phases(Vec<f64>),
}

#[derive(Serialize)]
struct DecodeReport {
    x_hat: Vec<f64>,
    similarity: f64,
    iters_coupled: usize,
    iters_direct: usize,
    converged: bool,
}

fn read_input(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn run_experiment(common: &Common, experiment: Experiment) -> Result<()> {
    let spec = common.spec(experiment)?;
    let dir = spec.output_dir.clone();
    let started = Instant::now();
    match experiment {
        Experiment::Sweep => write_sweep(&dir, &run_sweep(&spec)?)?,
        Experiment::Convergence => write_convergence(&dir, &run_convergence(&spec)?)?,
        Experiment::Bundle => write_bundle(&dir, &run_bundle(&spec)?)?,
        Experiment::Displacement => write_displacement(&dir, &run_displacement(&spec)?)?,
    }
    eprintln!("{} finished in {:.1} s; outputs in {}", experiment.name(), started.elapsed().as_secs_f64(), dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sweep(c) => run_experiment(&c, Experiment::Sweep),
        Command::Convergence(c) => run_experiment(&c, Experiment::Convergence),
        Command::Bundle(c) => run_experiment(&c, Experiment::Bundle),
        Command::Displacement(c) => run_experiment(&c, Experiment::Displacement),
        Command::Decode { input, common } => {
            let spec = common.spec(Experiment::Sweep)?;
            let d = Common::single_d(&spec)?;
            let u = match serde_json::from_str(&read_input(&input)?).context("parsing the SSP")? {
                SspInput::Ssp(u) => u,
                SspInput::Phases(p) => SspVector::from_phases(p)?,
            };
            if u.dim() != spec.n {
                bail!("SSP has {} phases but n = {}", u.dim(), spec.n);
            }
            let codec = build_codec(&spec, d)?;
            let r = codec.decoder.decode(&u)?;
            let report = DecodeReport {
                x_hat: r.x_hat,
                similarity: r.final_similarity,
                iters_coupled: r.iters_coupled,
                iters_direct: r.iters_direct,
                converged: r.converged,
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Encode { x, common } => {
            let spec = common.spec(Experiment::Sweep)?;
            let x: Vec<f64> = x
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("parsing --x")?;
            if common.d.is_some() && Common::single_d(&spec)? != x.len() {
                bail!("--x has {} components but d = {:?}", x.len(), spec.dims);
            }
            let a = csim_harness::experiments::encoding_matrix(&spec, spec.n, x.len())?;
            println!("{}", serde_json::to_string(&encode(&a, &x)?)?);
            Ok(())
        }
    }
}
