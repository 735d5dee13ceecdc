//! Displacement between two objects stored in one bundle.
//!
//! `M = normalize(T ⊗ P(t) + S ⊗ P(s))` holds a triangle at `t` and a square
//! at `s`. Querying gives noisy `p_T = M ⊘ T` and `p_S = M ⊘ S`, and
//! `p_T ⊘ p_S` should encode `t − s`. The cleaned pipeline runs CSim on
//! `p_T` and `p_S` first.

use std::path::Path;

use anyhow::Result;
use csim::baselines::{GridEvaluator, GridSpec};
use csim::corruption::{build_bundle, NormalizePolicy};
use csim::fhrr::{encode, similarity, unbind, SspVector};
use csim::rng::{derive_seed, seeded};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_codec, create_file, ensure_dir, tags, write_json, write_text, Codec};
use crate::config::ExperimentSpec;
use crate::plot::{heatmaps, Heatmap};
use crate::records::euclidean;

pub const TRIANGLE: [f64; 2] = [1.5, -2.3];
pub const SQUARE: [f64; 2] = [-0.7, 0.3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Both objects in one normalized bundle.
    Shared,
    /// Each object alone in its own bundle, so queries are exact.
    Separate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub x_hat: Vec<f64>,
    pub error: f64,
    /// `Re⟨p, encode(A, t − s)⟩` for the pipeline's displacement vector `p`.
    pub similarity_at_truth: f64,
    pub map_peak: f64,
    pub map_peak_at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementTrial {
    pub trial: usize,
    pub variant: Variant,
    pub triangle_hat: Vec<f64>,
    pub square_hat: Vec<f64>,
    pub raw: PipelineResult,
    pub cleaned: PipelineResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplacementReport {
    pub triangle: Vec<f64>,
    pub square: Vec<f64>,
    pub displacement: Vec<f64>,
    pub trials: Vec<DisplacementTrial>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub x: f64,
    pub y: f64,
    pub raw: f64,
    pub cleaned: f64,
}

#[derive(Debug, Clone)]
pub struct DisplacementOutput {
    pub report: DisplacementReport,
    /// Similarity maps of the first shared-bundle trial.
    pub maps: Vec<MapRow>,
}

pub fn truth() -> [f64; 2] {
    [TRIANGLE[0] - SQUARE[0], TRIANGLE[1] - SQUARE[1]]
}

struct Pipelines {
    trial: DisplacementTrial,
    raw_map: Vec<f64>,
    cleaned_map: Vec<f64>,
}

fn pipeline(codec: &Codec, grid: &GridEvaluator, p: &SspVector) -> csim::Result<(PipelineResult, Vec<f64>)> {
    let truth = truth();
    let decoded = codec.decoder.decode(p)?;
    let map = grid.similarity_map(p)?;
    let best = grid.search(p)?;
    Ok((
        PipelineResult {
            error: euclidean(&decoded.x_hat, &truth),
            x_hat: decoded.x_hat,
            similarity_at_truth: similarity(p, &encode(&codec.a, &truth)?)?.re,
            map_peak: best.similarity,
            map_peak_at: best.x,
        },
        map,
    ))
}

fn run_trial(spec: &ExperimentSpec, codec: &Codec, grid: &GridEvaluator, trial: usize, variant: Variant) -> csim::Result<Pipelines> {
    let mut r = seeded(derive_seed(spec.seed, &[tags::DISPLACEMENT, trial as u64]));
    let t_role = SspVector::random(spec.n, &mut r)?;
    let s_role = SspVector::random(spec.n, &mut r)?;
    let t_item = (t_role.clone(), encode(&codec.a, &TRIANGLE)?);
    let s_item = (s_role.clone(), encode(&codec.a, &SQUARE)?);

    let (p_t, p_s) = match variant {
        Variant::Shared => {
            let m = build_bundle(&[t_item, s_item], NormalizePolicy::AtEnd)?;
            (unbind(&m, &t_role)?, unbind(&m, &s_role)?)
        }
        Variant::Separate => {
            let m_t = build_bundle(&[t_item], NormalizePolicy::AtEnd)?;
            let m_s = build_bundle(&[s_item], NormalizePolicy::AtEnd)?;
            (unbind(&m_t, &t_role)?, unbind(&m_s, &s_role)?)
        }
    };

    let raw_disp = unbind(&p_t, &p_s)?;
    let t_hat = codec.decoder.decode(&p_t)?;
    let s_hat = codec.decoder.decode(&p_s)?;
    let cleaned_disp = unbind(&t_hat.cleaned_ssp, &s_hat.cleaned_ssp)?;

    let (raw, raw_map) = pipeline(codec, grid, &raw_disp)?;
    let (cleaned, cleaned_map) = pipeline(codec, grid, &cleaned_disp)?;
    Ok(Pipelines {
        trial: DisplacementTrial { trial, variant, triangle_hat: t_hat.x_hat, square_hat: s_hat.x_hat, raw, cleaned },
        raw_map,
        cleaned_map,
    })
}

pub fn run_displacement(spec: &ExperimentSpec) -> Result<DisplacementOutput> {
    spec.validate()?;
    let codec = build_codec(spec, 2)?;
    let grid = GridEvaluator::new(&codec.a, &GridSpec::symmetric(2, spec.radius, spec.grid_spacing)?)?;
    let jobs: Vec<(usize, Variant)> =
        (0..spec.trials).flat_map(|t| [(t, Variant::Shared), (t, Variant::Separate)]).collect();
    let results: Vec<Pipelines> = jobs
        .par_iter()
        .map(|&(t, v)| run_trial(spec, &codec, &grid, t, v))
        .collect::<csim::Result<_>>()?;

    let first = &results[0];
    let axes = grid.axes();
    let mut maps = Vec::with_capacity(first.raw_map.len());
    for (i, &x) in axes[0].iter().enumerate() {
        for (j, &y) in axes[1].iter().enumerate() {
            let k = i * axes[1].len() + j;
            maps.push(MapRow { x, y, raw: first.raw_map[k], cleaned: first.cleaned_map[k] });
        }
    }
    let report = DisplacementReport {
        triangle: TRIANGLE.to_vec(),
        square: SQUARE.to_vec(),
        displacement: truth().to_vec(),
        trials: results.into_iter().map(|p| p.trial).collect(),
    };
    Ok(DisplacementOutput { report, maps })
}

pub fn write_displacement(dir: &Path, out: &DisplacementOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join("displacement_report.json"), &out.report)?;
    let mut w = csv::Writer::from_writer(create_file(&dir.join("displacement_maps.csv"))?);
    w.write_record(["x", "y", "raw", "cleaned"])?;
    for m in &out.maps {
        w.write_record([m.x.to_string(), m.y.to_string(), m.raw.to_string(), m.cleaned.to_string()])?;
    }
    w.flush()?;

    let mut xs: Vec<f64> = out.maps.iter().map(|m| m.x).collect();
    xs.dedup();
    let ny = out.maps.len() / xs.len().max(1);
    let ys: Vec<f64> = out.maps[..ny].iter().map(|m| m.y).collect();
    let truth = truth();
    let first = &out.report.trials[0];
    let panel = |title: &str, values: Vec<f64>, decoded: &[f64]| Heatmap {
        title: title.into(),
        xs: xs.clone(),
        ys: ys.clone(),
        values,
        markers: vec![
            (truth[0], truth[1], '×', "black".into()),
            (decoded[0], decoded[1], '+', "red".into()),
        ],
    };
    let svg = heatmaps(
        "Similarity maps of the displacement SSP",
        &[
            panel("raw", out.maps.iter().map(|m| m.raw).collect(), &first.raw.x_hat),
            panel("cleaned", out.maps.iter().map(|m| m.cleaned).collect(), &first.cleaned.x_hat),
        ],
    );
    write_text(&dir.join("displacement_maps.svg"), &svg)
}
