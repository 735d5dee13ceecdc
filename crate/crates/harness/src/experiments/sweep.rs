//! Method comparison across noise levels.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use csim::baselines::{
    train_denoiser, DenoiseOutput, DenoiserConfig, DenoiserTask, GridEvaluator, GridSpec, MlpDenoiser,
    ResonatorConfig, ResonatorNetwork,
};
use csim::corruption::{corrupt, NoiseModel};
use csim::fhrr::{encode, similarity, EncodingMatrix, SspVector};
use csim::rng::{derive_seed, sample_ball, seeded};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_codec, create_file, encoding_matrix, ensure_dir, tags, write_json, write_text, Codec};
use crate::config::{ExperimentSpec, Method};
use crate::plot::{LineChart, Series};
use crate::records::{euclidean, write_csv, Moments, TrialRecord, FAIL_DISTANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: Method,
    pub d: usize,
    pub sigma: f64,
    pub trials: usize,
    pub errors: usize,
    pub similarity_error: Moments,
    pub euclidean_error: Moments,
    pub fail_fraction: f64,
    pub iters_coupled: Moments,
    pub iters_direct: Moments,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SweepSummary>,
    /// Seconds per record, parallel to `records`. Kept out of the CSV and
    /// JSON so those stay reproducible.
    pub wall_times: Vec<f64>,
}

/// The trial's true value, shared by every noise level and method.
pub(crate) fn trial_value(spec: &ExperimentSpec, d: usize, trial: usize) -> Vec<f64> {
    let mut r = seeded(derive_seed(spec.seed, &[tags::VALUE, d as u64, trial as u64]));
    sample_ball(d, spec.radius, &mut r)
}

pub(crate) fn noise_seed(spec: &ExperimentSpec, d: usize, level: usize, trial: usize) -> u64 {
    derive_seed(spec.seed, &[tags::NOISE, d as u64, level as u64, trial as u64])
}

struct Arms {
    codec: Codec,
    grid: Option<GridEvaluator>,
    resonator: Option<ResonatorNetwork>,
    denoiser_a: Option<EncodingMatrix>,
}

fn cached_denoiser(spec: &ExperimentSpec, a: &EncodingMatrix, cfg: &DenoiserConfig) -> Result<MlpDenoiser> {
    let path: Option<PathBuf> = spec.denoiser_cache.as_ref().map(|dir| {
        dir.join(format!(
            "denoiser_n{}_d{}_sigma{}_seed{}_samples{}_epochs{}.json",
            a.n(),
            a.d(),
            cfg.sigma,
            cfg.seed,
            cfg.n_samples,
            cfg.epochs
        ))
    });
    if let Some(p) = &path {
        if let Ok(text) = fs::read_to_string(p) {
            if let Ok(net) = serde_json::from_str::<MlpDenoiser>(&text) {
                return Ok(net);
            }
        }
    }
    let net = train_denoiser(a, cfg).with_context(|| format!("training the denoiser at sigma={}", cfg.sigma))?;
    if let Some(p) = &path {
        if let Some(dir) = p.parent() {
            ensure_dir(dir)?;
        }
        write_json(p, &net)?;
    }
    Ok(net)
}

/// Trains one decode-task network per noise level, in noise-grid order.
pub fn train_denoisers(spec: &ExperimentSpec, a: &EncodingMatrix) -> Result<Vec<MlpDenoiser>> {
    spec.noise_grid
        .par_iter()
        .map(|&sigma| {
            let cfg = DenoiserConfig {
                task: DenoiserTask::Decode,
                sigma,
                n_samples: spec.denoiser_samples,
                epochs: spec.denoiser_epochs,
                radius: spec.radius,
                seed: derive_seed(spec.seed, &[tags::DENOISER_TRAINING, a.n() as u64, a.d() as u64, sigma.to_bits()]),
                ..Default::default()
            };
            cached_denoiser(spec, a, &cfg)
        })
        .collect()
}

fn failed(method: Method, d: usize, sigma: f64, trial: usize, x_true: &[f64], err: impl ToString) -> TrialRecord {
    TrialRecord {
        method,
        d,
        sigma,
        trial,
        x_true: x_true.to_vec(),
        x_hat: vec![],
        similarity_error: f64::NAN,
        euclidean_error: f64::NAN,
        fail: true,
        iters_coupled: 0,
        iters_direct: 0,
        converged: false,
        error: Some(err.to_string()),
    }
}

struct Estimate {
    x_hat: Vec<f64>,
    iters: (usize, usize),
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn record(
    method: Method,
    d: usize,
    sigma: f64,
    trial: usize,
    x_true: &[f64],
    a: &EncodingMatrix,
    u: &SspVector,
    est: csim::Result<Estimate>,
) -> TrialRecord {
    let est = match est {
        Ok(e) => e,
        Err(e) => return failed(method, d, sigma, trial, x_true, e),
    };
    let sim = encode(a, &est.x_hat).and_then(|v| similarity(u, &v));
    match sim {
        Ok(s) => {
            let dist = euclidean(&est.x_hat, x_true);
            TrialRecord {
                method,
                d,
                sigma,
                trial,
                x_true: x_true.to_vec(),
                x_hat: est.x_hat,
                similarity_error: 1.0 - s.re,
                euclidean_error: dist,
                fail: !(dist <= FAIL_DISTANCE),
                iters_coupled: est.iters.0,
                iters_direct: est.iters.1,
                converged: est.converged,
                error: None,
            }
        }
        Err(e) => failed(method, d, sigma, trial, x_true, e),
    }
}

fn run_trial(
    spec: &ExperimentSpec,
    arms: &Arms,
    nets: &[MlpDenoiser],
    d: usize,
    level: usize,
    trial: usize,
) -> Vec<(TrialRecord, f64)> {
    let sigma = spec.noise_grid[level];
    let x_true = trial_value(spec, d, trial);
    let model = NoiseModel::ComponentGaussian { sigma };
    let seed = noise_seed(spec, d, level, trial);
    let a = &arms.codec.a;
    let u = encode(a, &x_true).and_then(|clean| corrupt(&clean, &model, seed));

    spec.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let rec = match method {
                Method::Denoiser => {
                    let a_den = arms.denoiser_a.as_ref().expect("denoiser arm prepared");
                    match encode(a_den, &x_true).and_then(|clean| corrupt(&clean, &model, seed)) {
                        Ok(u_den) => {
                            let est = nets[level].denoise(&u_den).map(|out| match out {
                                DenoiseOutput::Value(x_hat) => Estimate { x_hat, iters: (0, 0), converged: true },
                                DenoiseOutput::Ssp(_) => unreachable!("sweep networks use the decode task"),
                            });
                            record(method, d, sigma, trial, &x_true, a_den, &u_den, est)
                        }
                        Err(e) => failed(method, d, sigma, trial, &x_true, e),
                    }
                }
                _ => match &u {
                    Err(e) => failed(method, d, sigma, trial, &x_true, e),
                    Ok(u) => {
                        let est = match method {
                            Method::Csim => arms.codec.decoder.decode(u).map(|r| Estimate {
                                x_hat: r.x_hat,
                                iters: (r.iters_coupled, r.iters_direct),
                                converged: r.converged,
                            }),
                            Method::Grid => arms
                                .grid
                                .as_ref()
                                .expect("grid arm prepared")
                                .search(u)
                                .map(|g| Estimate { x_hat: g.x, iters: (0, 0), converged: true }),
                            Method::Resonator => arms
                                .resonator
                                .as_ref()
                                .expect("resonator arm prepared")
                                .decode(u)
                                .map(|r| Estimate { x_hat: r.x_hat, iters: (0, 0), converged: r.converged }),
                            Method::Denoiser => unreachable!(),
                        };
                        record(method, d, sigma, trial, &x_true, a, u, est)
                    }
                },
            };
            (rec, start.elapsed().as_secs_f64())
        })
        .collect()
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SweepSummary> {
    let mut keys: Vec<(usize, Method, u64)> = records.iter().map(|r| (r.d, r.method, r.sigma.to_bits())).collect();
    keys.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(f64::from_bits(a.2).total_cmp(&f64::from_bits(b.2))));
    keys.dedup();
    keys.into_iter()
        .map(|(d, method, bits)| {
            let sigma = f64::from_bits(bits);
            let group: Vec<&TrialRecord> =
                records.iter().filter(|r| r.d == d && r.method == method && r.sigma.to_bits() == bits).collect();
            let ok = || group.iter().filter(|r| r.error.is_none());
            SweepSummary {
                method,
                d,
                sigma,
                trials: group.len(),
                errors: group.len() - ok().count(),
                similarity_error: Moments::of(ok().map(|r| r.similarity_error)),
                euclidean_error: Moments::of(ok().map(|r| r.euclidean_error)),
                fail_fraction: group.iter().filter(|r| r.fail).count() as f64 / group.len() as f64,
                iters_coupled: Moments::of(ok().map(|r| r.iters_coupled as f64)),
                iters_direct: Moments::of(ok().map(|r| r.iters_direct as f64)),
            }
        })
        .collect()
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut wall_times = Vec::new();
    for &d in &spec.dims {
        let grid_spec = GridSpec::symmetric(d, spec.radius, spec.grid_spacing)?;
        let codec = build_codec(spec, d)?;
        let grid =
            spec.methods.contains(&Method::Grid).then(|| GridEvaluator::new(&codec.a, &grid_spec)).transpose()?;
        let resonator = spec
            .methods
            .contains(&Method::Resonator)
            .then(|| {
                let cfg = ResonatorConfig { max_iters: spec.resonator_iters, ..Default::default() };
                ResonatorNetwork::new(&codec.a, &grid_spec, cfg)
            })
            .transpose()?;
        let denoiser_a = spec
            .methods
            .contains(&Method::Denoiser)
            .then(|| encoding_matrix(spec, spec.denoiser_n, d))
            .transpose()?;
        let nets = match &denoiser_a {
            Some(a) => train_denoisers(spec, a)?,
            None => Vec::new(),
        };
        let arms = Arms { codec, grid, resonator, denoiser_a };

        for level in 0..spec.noise_grid.len() {
            let rows: Vec<Vec<(TrialRecord, f64)>> =
                (0..spec.trials).into_par_iter().map(|t| run_trial(spec, &arms, &nets, d, level, t)).collect();
            for (rec, secs) in rows.into_iter().flatten() {
                records.push(rec);
                wall_times.push(secs);
            }
        }
    }
    let summary = summarize(&records);
    Ok(SweepOutput { records, summary, wall_times })
}

fn metric_chart(summary: &[SweepSummary], title: &str, y_label: &str, pick: impl Fn(&SweepSummary) -> (f64, Option<f64>)) -> String {
    let mut keys: Vec<(usize, Method)> = summary.iter().map(|s| (s.d, s.method)).collect();
    keys.dedup();
    let series = keys
        .into_iter()
        .map(|(d, method)| Series {
            name: format!("{method} (d={d})"),
            points: summary
                .iter()
                .filter(|s| s.d == d && s.method == method)
                .map(|s| {
                    let (y, band) = pick(s);
                    (s.sigma, y, band)
                })
                .collect(),
        })
        .collect();
    LineChart { title: title.into(), x_label: "noise sigma".into(), y_label: y_label.into(), series }.render()
}

pub fn write_sweep(dir: &Path, out: &SweepOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_csv(&out.records, create_file(&dir.join("sweep.csv"))?)?;
    write_json(&dir.join("sweep_summary.json"), &out.summary)?;
    let s = &out.summary;
    write_text(
        &dir.join("sweep_similarity.svg"),
        &metric_chart(s, "Similarity error", "1 - Re similarity", |m| {
            (m.similarity_error.mean, Some(m.similarity_error.std))
        }),
    )?;
    write_text(
        &dir.join("sweep_distance.svg"),
        &metric_chart(s, "Distance error", "Euclidean error", |m| (m.euclidean_error.mean, Some(m.euclidean_error.std))),
    )?;
    write_text(&dir.join("sweep_fail.svg"), &metric_chart(s, "Failure fraction", "fraction with error > 0.1", |m| {
        (m.fail_fraction, None)
    }))?;

    let mut timing = String::from("# wall-clock seconds per trial; varies between runs\nmethod d sigma trial seconds\n");
    for (r, secs) in out.records.iter().zip(&out.wall_times) {
        let _ = writeln!(timing, "{} {} {} {} {secs:.6}", r.method, r.d, r.sigma, r.trial);
    }
    write_text(&dir.join("sweep_timing.txt"), &timing)
}
