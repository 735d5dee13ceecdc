//! Resonator network with least-squares codebook projections.
//!
//! Each value axis `k` has a codebook whose columns are the one-dimensional
//! SSPs `e^{i A_{:,k} g}` for the grid points `g`. An SSP of a grid point is
//! the binding of one column from each codebook, so the resonator repeatedly
//! unbinds the other estimates, projects onto the codebook's column space and
//! renormalizes.
//!
//! The codebook Gram matrix is numerically singular (the columns are samples
//! of a band-limited kernel at fine spacing), so the projection is formed from
//! an SVD of the codebook and keeps only singular directions above a relative
//! tolerance rather than inverting normal equations.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use crate::error::{check_dim, Error, Result};
use crate::fhrr::{circular_distance, EncodingMatrix, SspVector, DEFAULT_MODULUS_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorConfig {
    pub max_iters: usize,
    /// Converged once no phase moves more than this during a full sweep.
    pub phase_tolerance: f64,
    /// Singular values below `rank_tolerance · σ_max` are dropped.
    pub rank_tolerance: f64,
}

impl Default for ResonatorConfig {
    fn default() -> Self {
        Self { max_iters: 100, phase_tolerance: 1e-6, rank_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorResult {
    pub factors: Vec<SspVector>,
    pub x_hat: Vec<f64>,
    /// Full sweeps over all factors.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
struct Codebook {
    values: Vec<f64>,
    /// `n × m` column matrix.
    columns: DMatrix<Complex64>,
    /// Orthonormal basis of the retained column space, `n × r`.
    basis: DMatrix<Complex64>,
    basis_adjoint: DMatrix<Complex64>,
}

impl Codebook {
    fn project(&self, v: &[Complex64]) -> Vec<Complex64> {
        let v = DMatrix::from_column_slice(v.len(), 1, v);
        let coeffs = &self.basis_adjoint * v;
        (&self.basis * coeffs).iter().copied().collect()
    }

    /// Grid value whose column best matches `est`; ties go to the smaller value.
    ///
    /// Factors are only determined up to opposite global phases (`e^{iψ}c_0`,
    /// `e^{-iψ}c_1` bind to the same vector), so the match uses the modulus
    /// of the similarity rather than its real part.
    fn decode(&self, est: &SspVector) -> f64 {
        let z = est.to_complex();
        let mut best = (0, f64::NEG_INFINITY);
        for (j, col) in self.columns.column_iter().enumerate() {
            let s = z.iter().zip(col.iter()).map(|(a, b)| a * b.conj()).sum::<Complex64>().norm();
            if s > best.1 {
                best = (j, s);
            }
        }
        self.values[best.0]
    }
}

#[derive(Debug, Clone)]
pub struct ResonatorNetwork {
    n: usize,
    codebooks: Vec<Codebook>,
    cfg: ResonatorConfig,
}

impl ResonatorNetwork {
    pub fn new(a: &EncodingMatrix, spec: &GridSpec, cfg: ResonatorConfig) -> Result<Self> {
        spec.validate()?;
        check_dim(a.d(), spec.dim())?;
        if cfg.max_iters == 0 || !(cfg.phase_tolerance > 0.0) || !(cfg.rank_tolerance > 0.0) {
            return Err(Error::InvalidParameter("resonator iterations and tolerances must be positive".into()));
        }
        let n = a.n();
        let codebooks = (0..a.d())
            .map(|k| {
                let values = spec.axis_points(k);
                let col = a.column(k);
                let columns =
                    DMatrix::from_fn(n, values.len(), |i, j| Complex64::from_polar(1.0, col[i] * values[j]));
                let svd = columns.clone().svd(true, false);
                let u = svd.u.expect("left singular vectors requested");
                let smax = svd.singular_values.max();
                let keep: Vec<usize> = (0..svd.singular_values.len())
                    .filter(|&j| svd.singular_values[j] > cfg.rank_tolerance * smax)
                    .collect();
                let basis = u.select_columns(&keep);
                let basis_adjoint = basis.adjoint();
                Codebook { values, columns, basis, basis_adjoint }
            })
            .collect();
        Ok(Self { n, codebooks, cfg })
    }

    pub fn rank(&self, k: usize) -> usize {
        self.codebooks[k].basis.ncols()
    }

    /// Starting estimate for axis `k`: the normalized superposition of its codebook.
    pub fn superposition(&self, k: usize) -> SspVector {
        let cols = &self.codebooks[k].columns;
        let phases = cols.row_iter().map(|row| row.iter().sum::<Complex64>().arg()).collect();
        SspVector::from_phases(phases).expect("codebook rows are finite")
    }

    /// One Gauss–Seidel sweep; returns the largest phase change.
    pub fn sweep(&self, u: &SspVector, estimates: &mut [SspVector]) -> Result<f64> {
        check_dim(self.n, u.dim())?;
        check_dim(self.codebooks.len(), estimates.len())?;
        let mut largest = 0.0f64;
        for k in 0..estimates.len() {
            let target: Vec<Complex64> = (0..self.n)
                .map(|i| {
                    let others: f64 = estimates
                        .iter()
                        .enumerate()
                        .filter(|&(m, _)| m != k)
                        .map(|(_, e)| e.phases()[i])
                        .sum();
                    Complex64::from_polar(1.0, u.phases()[i] - others)
                })
                .collect();
            let projected = self.codebooks[k].project(&target);
            let old = estimates[k].phases();
            let phases: Vec<f64> = projected
                .iter()
                .zip(old)
                .map(|(z, &prev)| if z.norm() < DEFAULT_MODULUS_FLOOR { prev } else { z.arg() })
                .collect();
            for (p, q) in phases.iter().zip(old) {
                largest = largest.max(circular_distance(*p, *q));
            }
            estimates[k] = SspVector::from_phases(phases)?;
        }
        Ok(largest)
    }

    pub fn decode(&self, u: &SspVector) -> Result<ResonatorResult> {
        let init = (0..self.codebooks.len()).map(|k| self.superposition(k)).collect();
        self.decode_from(u, init)
    }

    pub fn decode_from(&self, u: &SspVector, mut estimates: Vec<SspVector>) -> Result<ResonatorResult> {
        check_dim(self.codebooks.len(), estimates.len())?;
        for e in &estimates {
            check_dim(self.n, e.dim())?;
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.cfg.max_iters {
            iterations += 1;
            if self.sweep(u, &mut estimates)? < self.cfg.phase_tolerance {
                converged = true;
                break;
            }
        }
        let x_hat = estimates.iter().zip(&self.codebooks).map(|(e, cb)| cb.decode(e)).collect();
        Ok(ResonatorResult { factors: estimates, x_hat, iterations, converged })
    }
}

pub fn resonator_decode(
    a: &EncodingMatrix,
    u: &SspVector,
    spec: &GridSpec,
    max_iters: usize,
) -> Result<ResonatorResult> {
    let cfg = ResonatorConfig { max_iters, ..Default::default() };
    ResonatorNetwork::new(a, spec, cfg)?.decode(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fhrr::{encode, make_encoding_matrix};
    use crate::rng;
    use rand::Rng;

    fn factor(a: &EncodingMatrix, k: usize, value: f64) -> SspVector {
        let mut x = vec![0.0; a.d()];
        x[k] = value;
        encode(a, &x).unwrap()
    }

    #[test]
    fn projection_preserves_codebook_columns() {
        let a = make_encoding_matrix(512, 2, 7).unwrap();
        let spec = GridSpec::symmetric(2, 5.0, 0.1).unwrap();
        let net = ResonatorNetwork::new(&a, &spec, ResonatorConfig::default()).unwrap();
        for k in 0..2 {
            assert!(net.rank(k) <= 101);
            for &g in &[-5.0, -1.3, 0.0, 4.2] {
                let col = factor(&a, k, g).to_complex();
                let p = net.codebooks[k].project(&col);
                let err = p.iter().zip(&col).map(|(p, c)| (p - c).norm()).fold(0.0, f64::max);
                assert!(err < 1e-9, "k={k} g={g} err={err}");
            }
        }
    }

    #[test]
    fn true_factors_are_a_fixed_point() {
        let a = make_encoding_matrix(1024, 2, 3).unwrap();
        let spec = GridSpec::symmetric(2, 5.0, 0.1).unwrap();
        let net = ResonatorNetwork::new(&a, &spec, ResonatorConfig::default()).unwrap();
        let axis = spec.axis_points(0);
        let x = [axis[17], axis[88]];
        let u = encode(&a, &x).unwrap();
        let truth = vec![factor(&a, 0, x[0]), factor(&a, 1, x[1])];
        let mut est = truth.clone();
        net.sweep(&u, &mut est).unwrap();
        for (e, t) in est.iter().zip(&truth) {
            assert!(e.max_phase_error(t).unwrap() < 1e-9);
        }
    }

    #[test]
    fn one_true_factor_converges_within_two_sweeps() {
        let a = make_encoding_matrix(1024, 2, 4).unwrap();
        let spec = GridSpec::symmetric(2, 5.0, 0.1).unwrap();
        let net = ResonatorNetwork::new(&a, &spec, ResonatorConfig::default()).unwrap();
        let axis = spec.axis_points(0);
        let x = vec![axis[30], axis[61]];
        let u = encode(&a, &x).unwrap();
        // Axis 0 is updated first, so it sees the true factor on axis 1 straight away.
        let init = vec![net.superposition(0), factor(&a, 1, x[1])];
        let out = net.decode_from(&u, init).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2, "{}", out.iterations);
        assert_eq!(out.x_hat, x);
    }

    #[test]
    fn recovers_on_grid_noiseless_values() {
        let a = make_encoding_matrix(1024, 2, 5).unwrap();
        let spec = GridSpec::symmetric(2, 5.0, 0.1).unwrap();
        let net = ResonatorNetwork::new(&a, &spec, ResonatorConfig::default()).unwrap();
        let axis = spec.axis_points(0);
        let mut r = rng::seeded(1);
        for _ in 0..5 {
            let x = vec![axis[r.random_range(0..101)], axis[r.random_range(0..101)]];
            let out = net.decode(&encode(&a, &x).unwrap()).unwrap();
            assert_eq!(out.x_hat, x);
        }
    }

    #[test]
    fn one_dimension_is_a_single_projection() {
        let a = make_encoding_matrix(256, 1, 6).unwrap();
        let spec = GridSpec::symmetric(1, 5.0, 0.1).unwrap();
        let u = encode(&a, &[2.3]).unwrap();
        let out = resonator_decode(&a, &u, &spec, 50).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 2);
        assert!((out.x_hat[0] - 2.3).abs() < 1e-9);
    }

    #[test]
    fn dimension_checks() {
        let a = make_encoding_matrix(64, 2, 6).unwrap();
        assert!(ResonatorNetwork::new(&a, &GridSpec::symmetric(1, 5.0, 0.1).unwrap(), Default::default()).is_err());
        let net = ResonatorNetwork::new(&a, &GridSpec::symmetric(2, 5.0, 0.5).unwrap(), Default::default()).unwrap();
        assert!(net.decode(&SspVector::identity(32).unwrap()).is_err());
    }
}
