//! Experiment runners. Each takes an [`ExperimentSpec`], returns in-memory
//! tables, and has a matching `write_*` that emits CSV, JSON and SVG.
//!
//! Every random draw is seeded from `(spec.seed, tags)` through
//! [`derive_seed`], so trials can run in any order on any number of threads
//! and still produce identical tables.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use csim::coupling::{build_coupling_matrix, default_uniform_scale, CouplingMatrix, CouplingSpec};
use csim::decoder::{CsimDecoder, DecodeConfig};
use csim::fhrr::{make_encoding_matrix, EncodingMatrix};
use csim::rng::derive_seed;
use serde::Serialize;

use crate::config::ExperimentSpec;

mod bundle;
mod convergence;
mod displacement;
mod sweep;

pub use bundle::{run_bundle, write_bundle, BundleOutput, BundleSummary, HistogramRow};
pub use convergence::{run_convergence, write_convergence, ConvergenceOutput, ConvergenceSummary};
pub use displacement::{
    run_displacement, write_displacement, DisplacementOutput, DisplacementReport, DisplacementTrial, MapRow,
    PipelineResult, Variant,
};
pub use sweep::{run_sweep, write_sweep, SweepOutput, SweepSummary};

/// Seed-derivation tags; one per independent random stream.
pub(crate) mod tags {
    pub const ENCODING: u64 = 1;
    pub const COUPLING: u64 = 2;
    pub const VALUE: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const DENOISER_TRAINING: u64 = 5;
    pub const BUNDLE: u64 = 6;
    pub const DISPLACEMENT: u64 = 7;
}

/// Encoding matrix, coupling matrix and decoder for one `(n, d)`.
pub struct Codec {
    pub a: EncodingMatrix,
    pub coupling: CouplingMatrix,
    pub decoder: CsimDecoder,
}

pub fn encoding_matrix(spec: &ExperimentSpec, n: usize, d: usize) -> Result<EncodingMatrix> {
    Ok(make_encoding_matrix(n, d, derive_seed(spec.seed, &[tags::ENCODING, n as u64, d as u64]))?)
}

pub fn build_codec(spec: &ExperimentSpec, d: usize) -> Result<Codec> {
    let a = encoding_matrix(spec, spec.n, d)?;
    let cspec = CouplingSpec {
        distribution: spec.coupling_dist,
        scale: default_uniform_scale(d, spec.radius)?,
        min_couplings: spec.couplings_per_phase,
        seed: derive_seed(spec.seed, &[tags::COUPLING, spec.n as u64, d as u64]),
    };
    let coupling = build_coupling_matrix(&a, &cspec).context("building the coupling matrix")?;
    let decoder = CsimDecoder::new(&a, &coupling, DecodeConfig::default())?;
    Ok(Codec { a, coupling, decoder })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub(crate) fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
