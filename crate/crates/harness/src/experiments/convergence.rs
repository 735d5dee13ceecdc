//! Iterations to convergence of both decoder stages.

use std::path::Path;

use anyhow::Result;
use csim::corruption::{corrupt, NoiseModel};
use csim::fhrr::{encode, similarity};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{noise_seed, trial_value};
use super::{build_codec, create_file, ensure_dir, write_json, write_text};
use crate::config::{ExperimentSpec, Method};
use crate::plot::{LineChart, Series};
use crate::records::{euclidean, median, write_csv, Moments, TrialRecord, FAIL_DISTANCE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub d: usize,
    pub sigma: f64,
    pub trials: usize,
    pub iters_coupled: Moments,
    pub iters_direct: Moments,
    pub iters_total: Moments,
    pub median_coupled: f64,
    pub median_direct: f64,
    pub median_total: f64,
    pub max_total: usize,
    pub converged_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<ConvergenceSummary>,
}

pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceOutput> {
    spec.validate()?;
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &d in &spec.dims {
        let codec = build_codec(spec, d)?;
        for (level, &sigma) in spec.noise_grid.iter().enumerate() {
            let rows: Vec<TrialRecord> = (0..spec.trials)
                .into_par_iter()
                .map(|t| {
                    let x_true = trial_value(spec, d, t);
                    let model = NoiseModel::ComponentGaussian { sigma };
                    let outcome = encode(&codec.a, &x_true)
                        .and_then(|clean| corrupt(&clean, &model, noise_seed(spec, d, level, t)))
                        .and_then(|u| {
                            let r = codec.decoder.decode(&u)?;
                            let s = similarity(&u, &r.cleaned_ssp)?;
                            Ok((r, s.re))
                        });
                    match outcome {
                        Ok((r, sim)) => {
                            let dist = euclidean(&r.x_hat, &x_true);
                            TrialRecord {
                                method: Method::Csim,
                                d,
                                sigma,
                                trial: t,
                                x_true,
                                x_hat: r.x_hat,
                                similarity_error: 1.0 - sim,
                                euclidean_error: dist,
                                fail: !(dist <= FAIL_DISTANCE),
                                iters_coupled: r.iters_coupled,
                                iters_direct: r.iters_direct,
                                converged: r.converged,
                                error: None,
                            }
                        }
                        Err(e) => TrialRecord {
                            method: Method::Csim,
                            d,
                            sigma,
                            trial: t,
                            x_true,
                            x_hat: vec![],
                            similarity_error: f64::NAN,
                            euclidean_error: f64::NAN,
                            fail: true,
                            iters_coupled: 0,
                            iters_direct: 0,
                            converged: false,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            let ok: Vec<&TrialRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
            let coupled: Vec<f64> = ok.iter().map(|r| r.iters_coupled as f64).collect();
            let direct: Vec<f64> = ok.iter().map(|r| r.iters_direct as f64).collect();
            let total: Vec<f64> = ok.iter().map(|r| (r.iters_coupled + r.iters_direct) as f64).collect();
            summary.push(ConvergenceSummary {
                d,
                sigma,
                trials: rows.len(),
                iters_coupled: Moments::of(coupled.iter().copied()),
                iters_direct: Moments::of(direct.iter().copied()),
                iters_total: Moments::of(total.iter().copied()),
                median_coupled: median(&coupled),
                median_direct: median(&direct),
                median_total: median(&total),
                max_total: ok.iter().map(|r| r.iters_coupled + r.iters_direct).max().unwrap_or(0),
                converged_fraction: rows.iter().filter(|r| r.converged).count() as f64 / rows.len() as f64,
            });
            records.extend(rows);
        }
    }
    Ok(ConvergenceOutput { records, summary })
}

type Pick = fn(&ConvergenceSummary) -> Moments;

pub fn write_convergence(dir: &Path, out: &ConvergenceOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_csv(&out.records, create_file(&dir.join("convergence.csv"))?)?;
    write_json(&dir.join("convergence_summary.json"), &out.summary)?;

    let mut sigmas: Vec<f64> = out.summary.iter().map(|s| s.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut series = Vec::new();
    for sigma in sigmas {
        let rows: Vec<&ConvergenceSummary> = out.summary.iter().filter(|s| s.sigma == sigma).collect();
        let stages: [(&str, Pick); 3] = [
            ("coupled", |s| s.iters_coupled),
            ("direct", |s| s.iters_direct),
            ("total", |s| s.iters_total),
        ];
        for (name, pick) in stages {
            series.push(Series {
                name: format!("{name} (sigma={sigma})"),
                points: rows.iter().map(|s| (s.d as f64, pick(s).mean, Some(pick(s).std))).collect(),
            });
        }
    }
    let chart = LineChart {
        title: "Iterations to convergence".into(),
        x_label: "value dimension d".into(),
        y_label: "iterations".into(),
        series,
    };
    write_text(&dir.join("convergence.svg"), &chart.render())
}
