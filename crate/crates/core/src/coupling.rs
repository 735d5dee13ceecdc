//! Coupling matrix construction.
//!
//! A coupling row `(i, j, s)` combines two observed phases into `φ_i + s·φ_j`
//! with effective base phases `A_i + s·A_j`. Rows are chosen so that the norms
//! of the effective base phases follow a target distribution concentrated
//! near zero, which turns the coupled objective into a low-frequency,
//! wide-basin function of `x`.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fhrr::{wrap_phase, EncodingMatrix};
use crate::rng;

/// Shape of the target distribution for effective base-phase magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetDistribution {
    Uniform,
    Triangular,
    Gaussian,
    Laplace,
}

impl TargetDistribution {
    /// Draws a target magnitude `|t|`, where `t` is symmetric around zero.
    fn sample_magnitude<R: Rng + ?Sized>(self, scale: f64, rng: &mut R) -> f64 {
        match self {
            Self::Uniform => scale * rng.random::<f64>(),
            Self::Triangular => scale * (rng.random::<f64>() + rng.random::<f64>() - 1.0).abs(),
            Self::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                scale * z.abs()
            }
            Self::Laplace => -scale * (1.0 - rng.random::<f64>()).ln(),
        }
    }
}

impl fmt::Display for TargetDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Uniform => "uniform",
            Self::Triangular => "triangular",
            Self::Gaussian => "gaussian",
            Self::Laplace => "laplace",
        })
    }
}

impl FromStr for TargetDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Self::Uniform),
            "triangular" => Ok(Self::Triangular),
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            other => Err(Error::InvalidParameter(format!("unknown coupling distribution `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub distribution: TargetDistribution,
    /// Half-width (uniform, triangular), standard deviation (gaussian) or
    /// diversity (laplace).
    pub scale: f64,
    pub min_couplings: usize,
    pub seed: u64,
}

impl CouplingSpec {
    pub const DEFAULT_MIN_COUPLINGS: usize = 10;

    /// Uniform targets on `[0, π/(2√d·B)]` with the default coverage.
    pub fn uniform_for(d: usize, bound: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            distribution: TargetDistribution::Uniform,
            scale: default_uniform_scale(d, bound)?,
            min_couplings: Self::DEFAULT_MIN_COUPLINGS,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling scale must be > 0, got {}", self.scale)));
        }
        if self.min_couplings == 0 {
            return Err(Error::InvalidParameter("min_couplings must be >= 1".into()));
        }
        Ok(())
    }
}

/// Half-width `π/(2·√d·B)` of the uniform band that keeps every coupled
/// term single-peaked over values bounded by `B`.
pub fn default_uniform_scale(d: usize, bound: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("value dimension must be >= 1".into()));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidParameter(format!("bound must be > 0, got {bound}")));
    }
    Ok(PI / (2.0 * (d as f64).sqrt() * bound))
}

/// One row of the coupling matrix: `C[k,i] = 1`, `C[k,j] = sign`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize, i8)", into = "(usize, usize, i8)")]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub sign: i8,
}

impl From<(usize, usize, i8)> for Coupling {
    fn from((i, j, sign): (usize, usize, i8)) -> Self {
        Self { i, j, sign }
    }
}

impl From<Coupling> for (usize, usize, i8) {
    fn from(c: Coupling) -> Self {
        (c.i, c.j, c.sign)
    }
}

impl Coupling {
    /// Canonical form with `i < j`. Swapping a difference row negates it,
    /// which leaves every cosine term unchanged.
    fn canonical(i: usize, j: usize, sign: i8) -> Self {
        if i < j {
            Self { i, j, sign }
        } else {
            Self { i: j, j: i, sign }
        }
    }

    #[inline]
    fn s(&self) -> f64 {
        f64::from(self.sign)
    }

    /// `C_k·v` for an n-vector `v` (unwrapped).
    #[inline]
    pub fn combine(&self, v: &[f64]) -> f64 {
        v[self.i] + self.s() * v[self.j]
    }
}

/// Sparse `n_c × n` matrix of signed phase pairings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CouplingRepr", into = "CouplingRepr")]
pub struct CouplingMatrix {
    n: usize,
    rows: Vec<Coupling>,
}

#[derive(Serialize, Deserialize)]
struct CouplingRepr {
    dims: (usize, usize),
    rows: Vec<Coupling>,
}

impl TryFrom<CouplingRepr> for CouplingMatrix {
    type Error = Error;

    fn try_from(r: CouplingRepr) -> Result<Self> {
        check_dim(r.dims.0, r.rows.len())?;
        CouplingMatrix::new(r.dims.1, r.rows)
    }
}

impl From<CouplingMatrix> for CouplingRepr {
    fn from(c: CouplingMatrix) -> Self {
        CouplingRepr { dims: (c.rows.len(), c.n), rows: c.rows }
    }
}

impl CouplingMatrix {
    pub fn new(n: usize, rows: Vec<Coupling>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("coupling rows"));
        }
        for (k, r) in rows.iter().enumerate() {
            if r.i >= n || r.j >= n || r.i == r.j || !(r.sign == 1 || r.sign == -1) {
                return Err(Error::InvalidParameter(format!(
                    "coupling row {k} = ({}, {}, {}) is invalid for n = {n}",
                    r.i, r.j, r.sign
                )));
            }
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Coupling] {
        &self.rows
    }

    /// Number of rows each phase index participates in.
    pub fn participation(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for r in &self.rows {
            counts[r.i] += 1;
            counts[r.j] += 1;
        }
        counts
    }

    /// `C·A` as row-major `n_c × d` entries.
    pub fn combined_base_phases(&self, a: &EncodingMatrix) -> Result<Vec<f64>> {
        check_dim(self.n, a.n())?;
        let d = a.d();
        let mut out = Vec::with_capacity(self.rows.len() * d);
        for r in &self.rows {
            let (ai, aj) = (a.row(r.i), a.row(r.j));
            out.extend(ai.iter().zip(aj).map(|(p, q)| p + r.s() * q));
        }
        Ok(out)
    }

    /// Euclidean norms `‖C_k·A‖` of the effective base phases.
    pub fn combined_norms(&self, a: &EncodingMatrix) -> Result<Vec<f64>> {
        Ok(self
            .combined_base_phases(a)?
            .chunks_exact(a.d())
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect())
    }

    /// Dense `n_c × n` form, for inspection and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![0.0; self.n];
                row[r.i] = 1.0;
                row[r.j] = r.s();
                row
            })
            .collect()
    }
}

/// `wrap(C·φ)`: the observed coupled phases.
pub fn coupled_phases(c: &CouplingMatrix, phases: &[f64]) -> Result<Vec<f64>> {
    check_dim(c.n, phases.len())?;
    Ok(c.rows.iter().map(|r| wrap_phase(r.combine(phases))).collect())
}

/// Selects couplings whose effective base-phase norms track draws from the
/// spec's target distribution while covering every phase index at least
/// `min_couplings` times.
///
/// Rounds visit the still-under-covered indices in shuffled order. Each visit
/// draws a target magnitude and adds the unused partner row (either sign)
/// whose norm is closest to it.
pub fn build_coupling_matrix(a: &EncodingMatrix, spec: &CouplingSpec) -> Result<CouplingMatrix> {
    spec.validate()?;
    let n = a.n();
    if n < 2 {
        return Err(Error::InfeasibleSpec(format!("need n >= 2 phases to couple, got {n}")));
    }
    // Index i can appear in at most 2(n-1) distinct rows.
    if spec.min_couplings > 2 * (n - 1) {
        return Err(Error::InfeasibleSpec(format!(
            "min_couplings = {} exceeds the {} distinct rows available per phase at n = {n}",
            spec.min_couplings,
            2 * (n - 1)
        )));
    }

    let mut rng = rng::seeded(spec.seed);
    let mut counts = vec![0usize; n];
    let mut used: HashSet<Coupling> = HashSet::new();
    let mut rows = Vec::new();
    let mut pending: Vec<usize> = (0..n).collect();

    while !pending.is_empty() {
        pending.shuffle(&mut rng);
        for &anchor in &pending {
            if counts[anchor] >= spec.min_couplings {
                continue;
            }
            let target = spec.distribution.sample_magnitude(spec.scale, &mut rng);
            let row = best_partner(a, anchor, target, &used).ok_or_else(|| {
                Error::InfeasibleSpec(format!("phase {anchor} has no unused partner left"))
            })?;
            used.insert(row);
            counts[row.i] += 1;
            counts[row.j] += 1;
            rows.push(row);
        }
        pending.retain(|&i| counts[i] < spec.min_couplings);
    }

    CouplingMatrix::new(n, rows)
}

fn best_partner(a: &EncodingMatrix, anchor: usize, target: f64, used: &HashSet<Coupling>) -> Option<Coupling> {
    let base = a.row(anchor);
    let mut best: Option<(f64, Coupling)> = None;
    for j in (0..a.n()).filter(|&j| j != anchor) {
        let other = a.row(j);
        for sign in [-1i8, 1] {
            let s = f64::from(sign);
            let norm = base
                .iter()
                .zip(other)
                .map(|(p, q)| (p + s * q) * (p + s * q))
                .sum::<f64>()
                .sqrt();
            let miss = (norm - target).abs();
            if best.is_some_and(|(m, _)| m <= miss) {
                continue;
            }
            let row = Coupling::canonical(anchor, j, sign);
            if !used.contains(&row) {
                best = Some((miss, row));
            }
        }
    }
    best.map(|(_, row)| row)
}
