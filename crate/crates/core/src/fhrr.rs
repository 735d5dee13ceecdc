//! FHRR algebra over unit-modulus complex vectors.
//!
//! Vectors are stored as phases in `(-π, π]`; binding is phase addition,
//! the complex form is only materialized for similarity and bundling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng;

pub const TAU: f64 = 2.0 * PI;

/// Normalization floor used by [`normalize`].
pub const DEFAULT_MODULUS_FLOOR: f64 = 1e-12;

/// Canonicalizes an angle into `(-π, π]`. Values already in range are
/// returned unchanged (bit for bit).
#[inline]
pub fn wrap_phase(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = (theta + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Absolute circular distance between two angles, in `[0, π]`.
#[inline]
pub fn circular_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// A unitary FHRR vector `e^{iφ}`, stored by its phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SspRepr", into = "SspRepr")]
pub struct SspVector {
    phases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SspRepr {
    phases: Vec<f64>,
}

impl TryFrom<SspRepr> for SspVector {
    type Error = Error;

    fn try_from(r: SspRepr) -> Result<Self> {
        SspVector::from_phases(r.phases)
    }
}

impl From<SspVector> for SspRepr {
    fn from(v: SspVector) -> Self {
        SspRepr { phases: v.phases }
    }
}

impl SspVector {
    /// Builds a vector from arbitrary finite phases, wrapping each into `(-π, π]`.
    pub fn from_phases(mut phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Empty("phase vector"));
        }
        if let Some(i) = phases.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("phase {i} is not finite")));
        }
        for p in &mut phases {
            *p = wrap_phase(*p);
        }
        Ok(Self { phases })
    }

    /// The all-zero-phase vector, identity for binding.
    pub fn identity(n: usize) -> Result<Self> {
        Self::from_phases(vec![0.0; n])
    }

    /// A vector with i.i.d. uniform phases on `(-π, π]`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("phase vector"));
        }
        Ok(Self {
            phases: (0..n).map(|_| uniform_phase(rng)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn into_phases(self) -> Vec<f64> {
        self.phases
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }

    /// Largest per-element circular distance to `other`.
    pub fn max_phase_error(&self, other: &SspVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .phases
            .iter()
            .zip(&other.phases)
            .map(|(&a, &b)| circular_distance(a, b))
            .fold(0.0, f64::max))
    }
}

/// Uniform draw on `(-π, π]`.
pub(crate) fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    PI - TAU * u
}

/// Normalized complex inner product `(1/n) Σ u_k conj(v_k)`.
pub fn similarity(u: &SspVector, v: &SspVector) -> Result<Complex64> {
    check_dim(u.dim(), v.dim())?;
    let n = u.dim() as f64;
    let (re, im) = u
        .phases
        .iter()
        .zip(&v.phases)
        .fold((0.0, 0.0), |(re, im), (&a, &b)| {
            let (s, c) = (a - b).sin_cos();
            (re + c, im + s)
        });
    Ok(Complex64::new(re / n, im / n))
}

pub fn bind(u: &SspVector, v: &SspVector) -> Result<SspVector> {
    check_dim(u.dim(), v.dim())?;
    Ok(SspVector {
        phases: u.phases.iter().zip(&v.phases).map(|(a, b)| wrap_phase(a + b)).collect(),
    })
}

pub fn unbind(u: &SspVector, v: &SspVector) -> Result<SspVector> {
    check_dim(u.dim(), v.dim())?;
    Ok(SspVector {
        phases: u.phases.iter().zip(&v.phases).map(|(a, b)| wrap_phase(a - b)).collect(),
    })
}

/// Raises `u` to a real power by scaling its principal phases.
pub fn fractional_bind(u: &SspVector, m: f64) -> SspVector {
    SspVector {
        phases: u.phases.iter().map(|p| wrap_phase(m * p)).collect(),
    }
}

/// Un-normalized superposition of unitary vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleVector {
    components: Vec<Complex64>,
}

impl BundleVector {
    pub fn from_components(components: Vec<Complex64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Empty("bundle"));
        }
        if components.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite bundle component".into()));
        }
        Ok(Self { components })
    }

    pub fn from_ssp(u: &SspVector) -> Self {
        Self { components: u.to_complex() }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    /// Adds a unitary vector into the bundle in place.
    pub fn add(&mut self, u: &SspVector) -> Result<()> {
        check_dim(self.dim(), u.dim())?;
        for (c, &p) in self.components.iter_mut().zip(&u.phases) {
            *c += Complex64::from_polar(1.0, p);
        }
        Ok(())
    }

    pub fn mean_modulus(&self) -> f64 {
        self.components.iter().map(|c| c.norm()).sum::<f64>() / self.dim() as f64
    }
}

pub fn bundle(vs: &[SspVector]) -> Result<BundleVector> {
    let first = vs.first().ok_or(Error::Empty("bundle input list"))?;
    let mut b = BundleVector::from_ssp(first);
    for v in &vs[1..] {
        b.add(v)?;
    }
    Ok(b)
}

/// Projects a bundle back to unit modulus, using [`DEFAULT_MODULUS_FLOOR`].
pub fn normalize(b: &BundleVector) -> Result<SspVector> {
    normalize_with_floor(b, DEFAULT_MODULUS_FLOOR)
}

pub fn normalize_with_floor(b: &BundleVector, floor: f64) -> Result<SspVector> {
    let phases = b
        .components
        .iter()
        .enumerate()
        .map(|(index, c)| {
            let modulus = c.norm();
            if modulus < floor {
                Err(Error::ZeroComponent { index, modulus })
            } else {
                Ok(wrap_phase(c.arg()))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SspVector { phases })
}

/// Base phases `A` (n × d): row `i` maps a d-vector to the phase of element `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct EncodingMatrix {
    n: usize,
    d: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    d: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for EncodingMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        check_dim(r.n, r.rows.len())?;
        let mut entries = Vec::with_capacity(r.n * r.d);
        for row in &r.rows {
            check_dim(r.d, row.len())?;
            entries.extend_from_slice(row);
        }
        EncodingMatrix::new(r.n, r.d, entries)
    }
}

impl From<EncodingMatrix> for MatrixRepr {
    fn from(a: EncodingMatrix) -> Self {
        MatrixRepr {
            n: a.n,
            d: a.d,
            rows: a.entries.chunks(a.d).map(<[f64]>::to_vec).collect(),
        }
    }
}

impl EncodingMatrix {
    /// Wraps row-major entries.
    pub fn new(n: usize, d: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidParameter(format!(
                "encoding matrix needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        check_dim(n * d, entries.len())?;
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidParameter("non-finite base phase".into()));
        }
        Ok(Self { n, d, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        Self::try_from(MatrixRepr { n: rows.len(), d, rows: rows.to_vec() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.d)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Unwrapped product `A·x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        Ok(self.rows().map(|r| dot(r, x)).collect())
    }

    /// `Aᵀ·y` for an n-vector `y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, y.len())?;
        let mut out = vec![0.0; self.d];
        for (r, &w) in self.rows().zip(y) {
            for (o, &a) in out.iter_mut().zip(r) {
                *o += a * w;
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Samples an n × d matrix of i.i.d. uniform base phases on `(-π, π]`.
pub fn make_encoding_matrix(n: usize, d: usize, seed: u64) -> Result<EncodingMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "encoding matrix needs n >= 1 and d >= 1, got {n}x{d}"
        )));
    }
    let mut rng = rng::seeded(seed);
    let entries = (0..n * d).map(|_| uniform_phase(&mut rng)).collect();
    EncodingMatrix::new(n, d, entries)
}

/// Fractional power encoding `e^{iA·x}`.
pub fn encode(a: &EncodingMatrix, x: &[f64]) -> Result<SspVector> {
    SspVector::from_phases(a.apply(x)?)
}
