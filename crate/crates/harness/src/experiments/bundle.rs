//! Cleanup of values queried out of normalized bundles.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::Result;
use csim::corruption::{bundle_query, circular_std, phase_errors, NormalizePolicy};
use csim::fhrr::{encode, similarity, SspVector};
use csim::rng::{derive_seed, sample_ball, seeded};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{build_codec, create_file, ensure_dir, tags, write_json, write_text, Codec};
use crate::config::ExperimentSpec;
use crate::plot::{Histogram, LineChart, Series};
use crate::records::{euclidean, write_csv, BundleRecord, Moments, FAIL_DISTANCE};

pub const HISTOGRAM_BINS: usize = 72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSummary {
    pub d: usize,
    pub items: usize,
    pub trials: usize,
    pub errors: usize,
    pub euclidean_error: Moments,
    pub similarity_error: Moments,
    pub fail_fraction: f64,
    /// Circular standard deviation of all phase errors pooled over trials.
    pub pooled_phase_error_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub d: usize,
    pub items: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone)]
pub struct BundleOutput {
    pub records: Vec<BundleRecord>,
    pub summary: Vec<BundleSummary>,
    pub histogram: Vec<HistogramRow>,
}

fn bin_edges() -> Vec<f64> {
    (0..=HISTOGRAM_BINS).map(|k| -PI + 2.0 * PI * k as f64 / HISTOGRAM_BINS as f64).collect()
}

fn bin_of(e: f64) -> usize {
    let t = (e + PI) / (2.0 * PI);
    ((t * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1)
}

struct Query {
    record: BundleRecord,
    errors: Vec<f64>,
}

fn run_query(spec: &ExperimentSpec, codec: &Codec, d: usize, items: usize, trial: usize) -> Query {
    let mut r = seeded(derive_seed(spec.seed, &[tags::BUNDLE, d as u64, items as u64, trial as u64]));
    let x_true = sample_ball(d, spec.radius, &mut r);
    let fail = |e: csim::Error, x_true: Vec<f64>| Query {
        record: BundleRecord {
            d,
            items,
            trial,
            x_true,
            x_hat: vec![],
            similarity_error: f64::NAN,
            euclidean_error: f64::NAN,
            fail: true,
            phase_error_std: f64::NAN,
            error: Some(e.to_string()),
        },
        errors: vec![],
    };

    let outcome = (|| -> csim::Result<(Vec<f64>, Vec<f64>, f64)> {
        let clean = encode(&codec.a, &x_true)?;
        let mut payloads = Vec::with_capacity(items);
        for k in 0..items {
            let role = SspVector::random(spec.n, &mut r)?;
            let filler = if k == 0 { clean.clone() } else { encode(&codec.a, &sample_ball(d, spec.radius, &mut r))? };
            payloads.push((role, filler));
        }
        let noisy = bundle_query(&payloads, 0, NormalizePolicy::AtEnd)?;
        let errors = phase_errors(&noisy, &clean)?;
        let decoded = codec.decoder.decode(&noisy)?;
        let sim = similarity(&noisy, &decoded.cleaned_ssp)?.re;
        Ok((decoded.x_hat, errors, sim))
    })();

    match outcome {
        Ok((x_hat, errors, sim)) => {
            let dist = euclidean(&x_hat, &x_true);
            Query {
                record: BundleRecord {
                    d,
                    items,
                    trial,
                    x_true,
                    x_hat,
                    similarity_error: 1.0 - sim,
                    euclidean_error: dist,
                    fail: !(dist <= FAIL_DISTANCE),
                    phase_error_std: circular_std(&errors),
                    error: None,
                },
                errors,
            }
        }
        Err(e) => fail(e, x_true),
    }
}

pub fn run_bundle(spec: &ExperimentSpec) -> Result<BundleOutput> {
    spec.validate()?;
    let edges = bin_edges();
    let mut out = BundleOutput { records: vec![], summary: vec![], histogram: vec![] };
    for &d in &spec.dims {
        let codec = build_codec(spec, d)?;
        for items in 1..=spec.max_items {
            let queries: Vec<Query> =
                (0..spec.trials).into_par_iter().map(|t| run_query(spec, &codec, d, items, t)).collect();
            let pooled: Vec<f64> = queries.iter().flat_map(|q| q.errors.iter().copied()).collect();
            let mut counts = vec![0u64; HISTOGRAM_BINS];
            for &e in &pooled {
                counts[bin_of(e)] += 1;
            }
            out.histogram.extend(counts.iter().enumerate().map(|(k, &count)| HistogramRow {
                d,
                items,
                bin_lo: edges[k],
                bin_hi: edges[k + 1],
                count,
            }));
            let recs: Vec<BundleRecord> = queries.into_iter().map(|q| q.record).collect();
            let ok = || recs.iter().filter(|r| r.error.is_none());
            out.summary.push(BundleSummary {
                d,
                items,
                trials: recs.len(),
                errors: recs.len() - ok().count(),
                euclidean_error: Moments::of(ok().map(|r| r.euclidean_error)),
                similarity_error: Moments::of(ok().map(|r| r.similarity_error)),
                fail_fraction: recs.iter().filter(|r| r.fail).count() as f64 / recs.len() as f64,
                pooled_phase_error_std: if pooled.is_empty() { f64::NAN } else { circular_std(&pooled) },
            });
            out.records.extend(recs);
        }
    }
    Ok(out)
}

pub fn write_bundle(dir: &Path, out: &BundleOutput) -> Result<()> {
    ensure_dir(dir)?;
    write_csv(&out.records, create_file(&dir.join("bundle.csv"))?)?;
    write_json(&dir.join("bundle_summary.json"), &out.summary)?;

    let mut w = csv::Writer::from_writer(create_file(&dir.join("bundle_phase_hist.csv"))?);
    w.write_record(["d", "items", "bin_lo", "bin_hi", "count"])?;
    for h in &out.histogram {
        w.write_record([h.d.to_string(), h.items.to_string(), h.bin_lo.to_string(), h.bin_hi.to_string(), h.count.to_string()])?;
    }
    w.flush()?;

    let mut dims: Vec<usize> = out.summary.iter().map(|s| s.d).collect();
    dims.dedup();
    let series = dims
        .iter()
        .map(|&d| Series {
            name: format!("csim (d={d})"),
            points: out
                .summary
                .iter()
                .filter(|s| s.d == d)
                .map(|s| (s.items as f64, s.euclidean_error.mean, Some(s.euclidean_error.std)))
                .collect(),
        })
        .collect();
    let chart = LineChart {
        title: "Cleanup error for bundled SSPs".into(),
        x_label: "items in bundle".into(),
        y_label: "Euclidean error".into(),
        series,
    };
    write_text(&dir.join("bundle_error.svg"), &chart.render())?;

    let first = dims.first().copied().unwrap_or(1);
    let mut keys: Vec<usize> =
        out.histogram.iter().filter(|h| h.d == first && h.items >= 2).map(|h| h.items).collect();
    keys.dedup();
    let hist = Histogram {
        title: format!("Phase error of bundle queries (d={first})"),
        x_label: "phase error (rad)".into(),
        edges: bin_edges(),
        series: keys
            .into_iter()
            .map(|items| {
                let counts = out.histogram.iter().filter(|h| h.d == first && h.items == items).map(|h| h.count).collect();
                (format!("{items} items"), counts)
            })
            .collect(),
    };
    write_text(&dir.join("bundle_phase_hist.svg"), &hist.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bins_cover_the_circle() {
        assert_eq!(bin_of(-PI), 0);
        assert_eq!(bin_of(PI), HISTOGRAM_BINS - 1);
        assert_eq!(bin_of(0.0), HISTOGRAM_BINS / 2);
        assert_eq!(bin_edges().len(), HISTOGRAM_BINS + 1);
    }
}
