//! Exhaustive grid search over a box of candidate values.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fhrr::{EncodingMatrix, SspVector};

pub const DEFAULT_SPACING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bounds: Vec<(f64, f64)>,
    pub spacing: f64,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, spacing: f64) -> Result<Self> {
        let spec = Self { bounds, spacing };
        spec.validate()?;
        Ok(spec)
    }

    /// `[-bound, bound]` on every axis.
    pub fn symmetric(d: usize, bound: f64, spacing: f64) -> Result<Self> {
        Self::new(vec![(-bound, bound); d], spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.is_empty() {
            return Err(Error::Empty("grid"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid spacing must be > 0, got {}", self.spacing)));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidParameter(format!("grid bounds need lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// `lo, lo + s, ...` up to and including `hi` when it lies on the lattice.
    pub fn axis_points(&self, k: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[k];
        let steps = ((hi - lo) / self.spacing + 1e-9).floor() as usize;
        (0..=steps).map(|i| lo + i as f64 * self.spacing).collect()
    }

    pub fn candidate_count(&self) -> usize {
        (0..self.dim()).map(|k| self.axis_points(k).len()).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub x: Vec<f64>,
    /// `Re⟨u, encode(A, x)⟩` at the returned point.
    pub similarity: f64,
    pub evaluated: usize,
}

/// Grid search bound to one encoding matrix.
///
/// The SSP of a grid point factors over axes, so per-axis tables of
/// `e^{-i A_{:,k} g}` let the search sweep the grid as nested partial products
/// instead of re-encoding every candidate.
#[derive(Debug, Clone)]
pub struct GridEvaluator {
    n: usize,
    spec: GridSpec,
    axes: Vec<Vec<f64>>,
    /// `tables[k][g * n + i] = e^{-i A_ik axes[k][g]}`.
    tables: Vec<Vec<Complex64>>,
}

impl GridEvaluator {
    pub fn new(a: &EncodingMatrix, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        check_dim(a.d(), spec.dim())?;
        let n = a.n();
        let axes: Vec<Vec<f64>> = (0..spec.dim()).map(|k| spec.axis_points(k)).collect();
        let tables = axes
            .iter()
            .enumerate()
            .map(|(k, points)| {
                let col = a.column(k);
                points
                    .iter()
                    .flat_map(|&g| col.iter().map(move |&ak| Complex64::from_polar(1.0, -ak * g)))
                    .collect()
            })
            .collect();
        Ok(Self { n, spec: spec.clone(), axes, tables })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Calls `f(index, similarity)` for every grid point in lexicographic
    /// order (first axis outermost).
    pub fn for_each(&self, u: &SspVector, mut f: impl FnMut(&[usize], f64)) -> Result<()> {
        check_dim(self.n, u.dim())?;
        let mut index = vec![0usize; self.axes.len()];
        self.recurse(0, u.to_complex(), &mut index, &mut f);
        Ok(())
    }

    fn recurse(&self, k: usize, partial: Vec<Complex64>, index: &mut [usize], f: &mut impl FnMut(&[usize], f64)) {
        let n = self.n;
        let last = k + 1 == self.axes.len();
        for g in 0..self.axes[k].len() {
            index[k] = g;
            let table = &self.tables[k][g * n..(g + 1) * n];
            if last {
                let sum: f64 = partial.iter().zip(table).map(|(p, t)| (p * t).re).sum();
                f(index, sum / n as f64);
            } else {
                let next = partial.iter().zip(table).map(|(p, t)| p * t).collect();
                self.recurse(k + 1, next, index, f);
            }
        }
    }

    pub fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().zip(&self.axes).map(|(&g, axis)| axis[g]).collect()
    }

    pub fn search(&self, u: &SspVector) -> Result<GridResult> {
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut evaluated = 0;
        self.for_each(u, |index, value| {
            evaluated += 1;
            if best.as_ref().is_none_or(|(_, b)| value > *b) {
                best = Some((index.to_vec(), value));
            }
        })?;
        let (index, similarity) = best.ok_or(Error::Empty("grid"))?;
        Ok(GridResult { x: self.point(&index), similarity, evaluated })
    }

    /// Similarity at every grid point, in [`for_each`](Self::for_each) order.
    pub fn similarity_map(&self, u: &SspVector) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.spec.candidate_count());
        self.for_each(u, |_, v| out.push(v))?;
        Ok(out)
    }
}

pub fn grid_search(a: &EncodingMatrix, u: &SspVector, spec: &GridSpec) -> Result<GridResult> {
    GridEvaluator::new(a, spec)?.search(u)
}

pub fn similarity_map(a: &EncodingMatrix, u: &SspVector, spec: &GridSpec) -> Result<Vec<f64>> {
    GridEvaluator::new(a, spec)?.similarity_map(u)
}
