//! Per-trial records, their CSV form, and summary statistics.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::Method;

/// Outcome of one method on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub d: usize,
    pub sigma: f64,
    pub trial: usize,
    pub x_true: Vec<f64>,
    pub x_hat: Vec<f64>,
    /// `1 − Re⟨u, encode(A, x̂)⟩` against the corrupted input.
    pub similarity_error: f64,
    pub euclidean_error: f64,
    pub fail: bool,
    pub iters_coupled: usize,
    pub iters_direct: usize,
    pub converged: bool,
    /// Set when the method returned an error; the metrics are then NaN.
    pub error: Option<String>,
}

/// Outcome of cleaning up one bundle query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleRecord {
    pub d: usize,
    pub items: usize,
    pub trial: usize,
    pub x_true: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub similarity_error: f64,
    pub euclidean_error: f64,
    pub fail: bool,
    /// Circular standard deviation of the query's phase errors.
    pub phase_error_std: f64,
    pub error: Option<String>,
}

pub const FAIL_DISTANCE: f64 = 0.1;

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// CSV row mapping. Vector fields are space-separated inside one cell and
/// floats use Rust's shortest round-trip formatting.
pub trait CsvRow: Sized {
    const HEADER: &'static [&'static str];
    fn to_fields(&self) -> Vec<String>;
    fn from_fields(fields: &csv::StringRecord) -> Result<Self>;
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn split(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(|t| t.parse().with_context(|| format!("bad number `{t}`"))).collect()
}

fn field(r: &csv::StringRecord, i: usize) -> Result<&str> {
    r.get(i).with_context(|| format!("missing column {i}"))
}

fn parse<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let s = field(r, i)?;
    s.parse().with_context(|| format!("bad value `{s}` in column {i}"))
}

fn optional(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

impl CsvRow for TrialRecord {
    const HEADER: &'static [&'static str] = &[
        "method",
        "d",
        "sigma",
        "trial",
        "x_true",
        "x_hat",
        "similarity_error",
        "euclidean_error",
        "fail",
        "iters_coupled",
        "iters_direct",
        "converged",
        "error",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.method.to_string(),
            self.d.to_string(),
            self.sigma.to_string(),
            self.trial.to_string(),
            join(&self.x_true),
            join(&self.x_hat),
            self.similarity_error.to_string(),
            self.euclidean_error.to_string(),
            self.fail.to_string(),
            self.iters_coupled.to_string(),
            self.iters_direct.to_string(),
            self.converged.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            method: field(r, 0)?.parse()?,
            d: parse(r, 1)?,
            sigma: parse(r, 2)?,
            trial: parse(r, 3)?,
            x_true: split(field(r, 4)?)?,
            x_hat: split(field(r, 5)?)?,
            similarity_error: parse(r, 6)?,
            euclidean_error: parse(r, 7)?,
            fail: parse(r, 8)?,
            iters_coupled: parse(r, 9)?,
            iters_direct: parse(r, 10)?,
            converged: parse(r, 11)?,
            error: optional(field(r, 12)?),
        })
    }
}

impl CsvRow for BundleRecord {
    const HEADER: &'static [&'static str] = &[
        "d",
        "items",
        "trial",
        "x_true",
        "x_hat",
        "similarity_error",
        "euclidean_error",
        "fail",
        "phase_error_std",
        "error",
    ];

    fn to_fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.items.to_string(),
            self.trial.to_string(),
            join(&self.x_true),
            join(&self.x_hat),
            self.similarity_error.to_string(),
            self.euclidean_error.to_string(),
            self.fail.to_string(),
            self.phase_error_std.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }

    fn from_fields(r: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            d: parse(r, 0)?,
            items: parse(r, 1)?,
            trial: parse(r, 2)?,
            x_true: split(field(r, 3)?)?,
            x_hat: split(field(r, 4)?)?,
            similarity_error: parse(r, 5)?,
            euclidean_error: parse(r, 6)?,
            fail: parse(r, 7)?,
            phase_error_std: parse(r, 8)?,
            error: optional(field(r, 9)?),
        })
    }
}

pub fn write_csv<T: CsvRow, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.write_record(row.to_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: CsvRow, R: Read>(input: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(T::HEADER.iter().copied()) {
        bail!("unexpected CSV header {:?}", r.headers()?);
    }
    r.records().map(|rec| T::from_fields(&rec?)).collect()
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    /// Non-finite values are skipped; an empty input gives NaN moments.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_and_median() {
        let m = Moments::of([1.0, 2.0, 3.0, f64::NAN]);
        assert_eq!(m.mean, 2.0);
        assert_eq!(m.std, 1.0);
        assert!(Moments::of([]).mean.is_nan());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn trial_records_round_trip() {
        let rows = vec![
            TrialRecord {
                method: Method::Grid,
                d: 2,
                sigma: 0.30000000000000004,
                trial: 3,
                x_true: vec![1.5, -2.3],
                x_hat: vec![1.4999999999999998, -2.3],
                similarity_error: 0.123456789,
                euclidean_error: 1e-17,
                fail: false,
                iters_coupled: 0,
                iters_direct: 0,
                converged: true,
                error: None,
            },
            TrialRecord {
                method: Method::Denoiser,
                d: 1,
                sigma: 0.5,
                trial: 0,
                x_true: vec![0.1],
                x_hat: vec![],
                similarity_error: f64::NAN,
                euclidean_error: f64::NAN,
                fail: true,
                iters_coupled: 0,
                iters_direct: 0,
                converged: false,
                error: Some("zero component, \"quoted\"".into()),
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back: Vec<TrialRecord> = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1].error, rows[1].error);
        assert!(back[1].similarity_error.is_nan());
        assert!(back[1].x_hat.is_empty());
    }
}
