//! The CSim decoder.
//!
//! Decoding maximizes the blended objective
//! `E(x) = λ·E_D(x) + (1 − λ)·E_C(x)` by gradient ascent, where
//!
//! - `E_D(x) = (1/n) Σ cos(φ_i − A_i·x)` is the direct least-circular-distance
//!   objective (the real part of the similarity to `e^{iA·x}`), and
//! - `E_C(x) = (1/n_c) Σ cos(C_k·φ − C_k·A·x)` is the phase-coupled objective.
//!
//! The default schedule runs a coupled stage (λ = 0) from `x = 0` to land in
//! the right basin, then a direct stage (λ = 1) to sharpen the estimate.
//! Both gradients keep their `1/n` and `1/n_c` normalizations so they are the
//! exact derivatives of the objectives.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupled_phases, CouplingMatrix};
use crate::error::{check_dim, Error, Result};
use crate::fhrr::{dot, encode, EncodingMatrix, SspVector};

/// Objective values may dip by this much without counting as a decrease.
const ASCENT_SLACK: f64 = 1e-12;
const MAX_HALVINGS: usize = 40;

pub fn objective_direct(a: &EncodingMatrix, phases: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(a.n(), phases.len())?;
    check_dim(a.d(), x.len())?;
    let sum: f64 = a.rows().zip(phases).map(|(row, &p)| (p - dot(row, x)).cos()).sum();
    Ok(sum / a.n() as f64)
}

pub fn objective_coupled(c: &CouplingMatrix, a: &EncodingMatrix, phases: &[f64], x: &[f64]) -> Result<f64> {
    check_dim(a.n(), phases.len())?;
    check_dim(c.n(), a.n())?;
    check_dim(a.d(), x.len())?;
    let sum: f64 = c
        .rows()
        .iter()
        .map(|r| {
            let slope_x = r.combine(&a.rows().map(|row| dot(row, x)).collect::<Vec<_>>());
            (r.combine(phases) - slope_x).cos()
        })
        .sum();
    Ok(sum / c.len() as f64)
}

/// `λ·E_D + (1 − λ)·E_C`.
pub fn objective_blended(
    c: &CouplingMatrix,
    a: &EncodingMatrix,
    phases: &[f64],
    x: &[f64],
    lambda: f64,
) -> Result<f64> {
    Ok(lambda * objective_direct(a, phases, x)? + (1.0 - lambda) * objective_coupled(c, a, phases, x)?)
}

/// `(1/n) Σ A_iᵀ sin(φ_i − A_i·x)`.
pub fn grad_direct(a: &EncodingMatrix, phases: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.n(), phases.len())?;
    check_dim(a.d(), x.len())?;
    let weights: Vec<f64> = a
        .rows()
        .zip(phases)
        .map(|(row, &p)| (p - dot(row, x)).sin() / a.n() as f64)
        .collect();
    a.apply_transpose(&weights)
}

/// `(1/n_c) Σ (C_k·A)ᵀ sin(C_k·φ − C_k·A·x)`.
pub fn grad_coupled(c: &CouplingMatrix, a: &EncodingMatrix, phases: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.n(), phases.len())?;
    check_dim(a.d(), x.len())?;
    let slopes = c.combined_base_phases(a)?;
    let m = c.len() as f64;
    let mut g = vec![0.0; a.d()];
    for (r, slope) in c.rows().iter().zip(slopes.chunks_exact(a.d())) {
        let w = (r.combine(phases) - dot(slope, x)).sin() / m;
        for (gk, s) in g.iter_mut().zip(slope) {
            *gk += s * w;
        }
    }
    Ok(g)
}

pub fn grad_blended(
    c: &CouplingMatrix,
    a: &EncodingMatrix,
    phases: &[f64],
    x: &[f64],
    lambda: f64,
) -> Result<Vec<f64>> {
    let gd = grad_direct(a, phases, x)?;
    let gc = grad_coupled(c, a, phases, x)?;
    Ok(gd.iter().zip(&gc).map(|(d, c)| lambda * d + (1.0 - lambda) * c).collect())
}

/// Frequency-domain form of the direct gradient: `Re(−(i/n)·Aᵀ(u ⊙ conj(v)))`
/// with `v = e^{iA·x}` the current clean estimate.
pub fn grad_complex_direct(a: &EncodingMatrix, u: &SspVector, v: &SspVector) -> Result<Vec<f64>> {
    check_dim(a.n(), u.dim())?;
    check_dim(a.n(), v.dim())?;
    let scale = Complex64::new(0.0, -1.0 / a.n() as f64);
    let products: Vec<Complex64> = u
        .to_complex()
        .into_iter()
        .zip(v.to_complex())
        .map(|(uk, vk)| uk * vk.conj())
        .collect();
    let mut g = vec![Complex64::new(0.0, 0.0); a.d()];
    for (row, p) in a.rows().zip(&products) {
        for (gk, &ak) in g.iter_mut().zip(row) {
            *gk += ak * p;
        }
    }
    Ok(g.into_iter().map(|gk| (scale * gk).re).collect())
}

/// Step-size rule for gradient ascent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// `γ = scale / λ_max`, where `λ_max` is the largest eigenvalue of the
    /// stage's mean outer product of base phases (its curvature at a noiseless
    /// optimum). Scale 1.0 makes each stage's step a scalar Gauss–Newton step.
    Curvature(f64),
    /// The same raw `γ` for every stage.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub step: StepSize,
    pub max_iters_coupled: usize,
    pub max_iters_direct: usize,
    /// A stage stops once every element of the increment is below this.
    pub x_tolerance: f64,
    /// λ used in the first stage; 0 is pure coupled ascent.
    pub coupled_lambda: f64,
    /// Starting point; `None` is the origin.
    pub init_x: Option<Vec<f64>>,
    /// Heavy-ball momentum coefficient in `[0, 1)`.
    pub momentum: f64,
    /// Halve a step that would lower the objective.
    pub backtracking: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            step: StepSize::Curvature(1.0),
            max_iters_coupled: 1000,
            max_iters_direct: 1000,
            x_tolerance: 0.01,
            coupled_lambda: 0.0,
            init_x: None,
            momentum: 0.0,
            backtracking: true,
        }
    }
}

impl DecodeConfig {
    fn validate(&self, d: usize) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        match self.step {
            StepSize::Curvature(s) | StepSize::Fixed(s) if !(s > 0.0 && s.is_finite()) => {
                return invalid(format!("step size must be > 0, got {s}"));
            }
            _ => {}
        }
        if self.max_iters_coupled == 0 || self.max_iters_direct == 0 {
            return invalid("iteration caps must be >= 1".into());
        }
        if !(self.x_tolerance > 0.0) {
            return invalid(format!("x_tolerance must be > 0, got {}", self.x_tolerance));
        }
        if !(0.0..=1.0).contains(&self.coupled_lambda) {
            return invalid(format!("coupled_lambda must lie in [0, 1], got {}", self.coupled_lambda));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return invalid(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if let Some(init) = &self.init_x {
            check_dim(d, init.len())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coupled,
    Direct,
}

impl Stage {
    fn name(self) -> &'static str {
        match self {
            Stage::Coupled => "coupled",
            Stage::Direct => "direct",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub stage: Stage,
    pub iteration: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub x_hat: Vec<f64>,
    pub cleaned_ssp: SspVector,
    pub iters_coupled: usize,
    pub iters_direct: usize,
    /// Both stages stopped on the tolerance rather than the cap.
    pub converged: bool,
    pub objective_trace: Vec<TracePoint>,
    /// `Re ⟨u, cleaned_ssp⟩`.
    pub final_similarity: f64,
    pub step_coupled: f64,
    pub step_direct: f64,
}

/// Result of a single ascent stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub step: f64,
    pub trace: Vec<TracePoint>,
}

/// Mean-cosine objective over a set of terms `cos(observed_k − slope_k·x)`.
struct Terms<'a> {
    d: usize,
    slopes: &'a [f64],
    observed: Vec<f64>,
}

impl Terms<'_> {
    fn len(&self) -> usize {
        self.observed.len()
    }

    /// Mean cosine and gradient in `x`, with term `k`'s model phase supplied
    /// by `model(k)`.
    fn eval(&self, model: impl Fn(usize) -> f64) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; self.d];
        for (k, (&obs, slope)) in self.observed.iter().zip(self.slopes.chunks_exact(self.d)).enumerate() {
            let (s, c) = (obs - model(k)).sin_cos();
            value += c;
            for (g, a) in grad.iter_mut().zip(slope) {
                *g += a * s;
            }
        }
        let m = self.len() as f64;
        grad.iter_mut().for_each(|g| *g /= m);
        (value / m, grad)
    }
}

/// Observed quantities for one input vector.
struct Observation<'a> {
    direct: Terms<'a>,
    coupled: Terms<'a>,
}

/// Optimizer state: either the value `x` itself or the cleaned phases `θ`.
trait AscentState: Clone {
    fn eval(&self, dec: &CsimDecoder, obs: &Observation, lambda: f64) -> (f64, Vec<f64>);
    fn advance(&mut self, dec: &CsimDecoder, dx: &[f64]);
}

#[derive(Clone)]
struct ValueState(Vec<f64>);

impl AscentState for ValueState {
    fn eval(&self, _: &CsimDecoder, obs: &Observation, lambda: f64) -> (f64, Vec<f64>) {
        let x = &self.0;
        blend(
            lambda,
            || obs.direct.eval(|k| dot(&obs.direct.slopes[k * x.len()..(k + 1) * x.len()], x)),
            || obs.coupled.eval(|k| dot(&obs.coupled.slopes[k * x.len()..(k + 1) * x.len()], x)),
        )
    }

    fn advance(&mut self, _: &CsimDecoder, dx: &[f64]) {
        self.0.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
    }
}

#[derive(Clone)]
struct PhaseState {
    /// Unwrapped cleaned phases.
    theta: Vec<f64>,
}

impl AscentState for PhaseState {
    fn eval(&self, dec: &CsimDecoder, obs: &Observation, lambda: f64) -> (f64, Vec<f64>) {
        let theta = &self.theta;
        let rows = dec.coupling.rows();
        blend(lambda, || obs.direct.eval(|k| theta[k]), || obs.coupled.eval(|k| rows[k].combine(theta)))
    }

    fn advance(&mut self, dec: &CsimDecoder, dx: &[f64]) {
        for (t, row) in self.theta.iter_mut().zip(dec.a.rows()) {
            *t += dot(row, dx);
        }
    }
}

fn blend(
    lambda: f64,
    direct: impl FnOnce() -> (f64, Vec<f64>),
    coupled: impl FnOnce() -> (f64, Vec<f64>),
) -> (f64, Vec<f64>) {
    if lambda >= 1.0 {
        return direct();
    }
    if lambda <= 0.0 {
        return coupled();
    }
    let (vd, gd) = direct();
    let (vc, gc) = coupled();
    let g = gd.iter().zip(&gc).map(|(d, c)| lambda * d + (1.0 - lambda) * c).collect();
    (lambda * vd + (1.0 - lambda) * vc, g)
}

/// Largest eigenvalue of `(1/m) Σ s_k s_kᵀ` for row-major slopes.
fn curvature(slopes: &[f64], d: usize) -> f64 {
    let m = (slopes.len() / d) as f64;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for s in slopes.chunks_exact(d) {
        for p in 0..d {
            for q in 0..d {
                gram[(p, q)] += s[p] * s[q] / m;
            }
        }
    }
    SymmetricEigen::new(gram).eigenvalues.max()
}

/// Decoder bound to one encoding matrix and coupling matrix.
///
/// Construction precomputes `C·A` and the per-stage curvatures so repeated
/// decodes against the same base phases only pay for the ascent itself.
#[derive(Debug, Clone)]
pub struct CsimDecoder {
    a: EncodingMatrix,
    coupling: CouplingMatrix,
    coupled_slopes: Vec<f64>,
    curvature_direct: f64,
    curvature_coupled: f64,
    cfg: DecodeConfig,
}

impl CsimDecoder {
    pub fn new(a: &EncodingMatrix, c: &CouplingMatrix, cfg: DecodeConfig) -> Result<Self> {
        check_dim(a.n(), c.n())?;
        cfg.validate(a.d())?;
        let coupled_slopes = c.combined_base_phases(a)?;
        let curvature_direct = curvature(a.entries(), a.d());
        let curvature_coupled = curvature(&coupled_slopes, a.d());
        if !(curvature_direct > 0.0 && curvature_coupled > 0.0) {
            return Err(Error::InvalidParameter("base phases have zero curvature".into()));
        }
        Ok(Self {
            a: a.clone(),
            coupling: c.clone(),
            coupled_slopes,
            curvature_direct,
            curvature_coupled,
            cfg,
        })
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.cfg
    }

    pub fn encoding(&self) -> &EncodingMatrix {
        &self.a
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    /// Effective step size for a stage run at weight `lambda`.
    pub fn step_for(&self, lambda: f64) -> f64 {
        match self.cfg.step {
            StepSize::Fixed(g) => g,
            StepSize::Curvature(scale) => {
                let curv = lambda * self.curvature_direct + (1.0 - lambda) * self.curvature_coupled;
                scale / curv
            }
        }
    }

    fn observe(&self, u: &SspVector) -> Result<Observation<'_>> {
        check_dim(self.a.n(), u.dim())?;
        Ok(Observation {
            direct: Terms { d: self.a.d(), slopes: self.a.entries(), observed: u.phases().to_vec() },
            coupled: Terms {
                d: self.a.d(),
                slopes: &self.coupled_slopes,
                observed: coupled_phases(&self.coupling, u.phases())?,
            },
        })
    }

    fn init(&self) -> Vec<f64> {
        self.cfg.init_x.clone().unwrap_or_else(|| vec![0.0; self.a.d()])
    }

    #[allow(clippy::too_many_arguments)]
    fn ascend<S: AscentState>(
        &self,
        obs: &Observation,
        mut state: S,
        stage: Stage,
        lambda: f64,
        max_iters: usize,
        trace: &mut Vec<TracePoint>,
    ) -> Result<(S, usize, bool)> {
        let gamma = self.step_for(lambda);
        let non_finite = |iteration| Error::NonFiniteObjective { stage: stage.name(), iteration };
        let finite = |v: f64, g: &[f64]| v.is_finite() && g.iter().all(|x| x.is_finite());

        let (mut value, mut grad) = state.eval(self, obs, lambda);
        if !finite(value, &grad) {
            return Err(non_finite(0));
        }
        trace.push(TracePoint { stage, iteration: 0, objective: value });
        let mut velocity = vec![0.0; grad.len()];

        for iteration in 1..=max_iters {
            let mut dx: Vec<f64> = velocity
                .iter()
                .zip(&grad)
                .map(|(v, g)| self.cfg.momentum * v + gamma * g)
                .collect();
            let mut next = state.clone();
            next.advance(self, &dx);
            let (mut next_value, mut next_grad) = next.eval(self, obs, lambda);

            if self.cfg.backtracking {
                let mut halvings = 0;
                while !(next_value >= value - ASCENT_SLACK) && halvings < MAX_HALVINGS {
                    dx.iter_mut().for_each(|v| *v *= 0.5);
                    next = state.clone();
                    next.advance(self, &dx);
                    (next_value, next_grad) = next.eval(self, obs, lambda);
                    halvings += 1;
                }
                if !(next_value >= value - ASCENT_SLACK) {
                    // No ascent direction at machine precision: stay put.
                    dx.iter_mut().for_each(|v| *v = 0.0);
                    next = state.clone();
                    (next_value, next_grad) = (value, grad.clone());
                }
            }
            if !finite(next_value, &next_grad) {
                return Err(non_finite(iteration));
            }

            state = next;
            value = next_value;
            grad = next_grad;
            trace.push(TracePoint { stage, iteration, objective: value });
            let largest = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            velocity = dx;
            if largest < self.cfg.x_tolerance {
                return Ok((state, iteration, true));
            }
        }
        Ok((state, max_iters, false))
    }

    /// Runs one ascent stage at weight `lambda` from `init`.
    pub fn run_stage(&self, u: &SspVector, lambda: f64, init: &[f64], max_iters: usize) -> Result<StageOutcome> {
        check_dim(self.a.d(), init.len())?;
        let obs = self.observe(u)?;
        let stage = if lambda >= 1.0 { Stage::Direct } else { Stage::Coupled };
        let mut trace = Vec::new();
        let (state, iterations, converged) =
            self.ascend(&obs, ValueState(init.to_vec()), stage, lambda, max_iters, &mut trace)?;
        Ok(StageOutcome { x: state.0, iterations, converged, step: self.step_for(lambda), trace })
    }

    /// Two-stage decode: coupled ascent, then direct ascent.
    pub fn decode(&self, u: &SspVector) -> Result<DecodeResult> {
        let obs = self.observe(u)?;
        let mut trace = Vec::new();
        let lambda = self.cfg.coupled_lambda;
        let (state, iters_coupled, conv_c) = self.ascend(
            &obs,
            ValueState(self.init()),
            Stage::Coupled,
            lambda,
            self.cfg.max_iters_coupled,
            &mut trace,
        )?;
        let (state, iters_direct, conv_d) =
            self.ascend(&obs, state, Stage::Direct, 1.0, self.cfg.max_iters_direct, &mut trace)?;
        let x_hat = state.0;
        let cleaned_ssp = encode(&self.a, &x_hat)?;
        let final_similarity = crate::fhrr::similarity(u, &cleaned_ssp)?.re;
        Ok(DecodeResult {
            x_hat,
            cleaned_ssp,
            iters_coupled,
            iters_direct,
            converged: conv_c && conv_d,
            objective_trace: trace,
            final_similarity,
            step_coupled: self.step_for(lambda),
            step_direct: self.step_for(1.0),
        })
    }

    /// Clean-up without an explicit value: iterates the phases `θ` directly
    /// (`θ ← θ + γ·A·∇E`) under the same schedule as [`decode`](Self::decode).
    pub fn cleanup_phases(&self, u: &SspVector) -> Result<SspVector> {
        let obs = self.observe(u)?;
        let init = self.init();
        let state = PhaseState { theta: self.a.apply(&init)? };
        let mut trace = Vec::new();
        let lambda = self.cfg.coupled_lambda;
        let (state, _, _) =
            self.ascend(&obs, state, Stage::Coupled, lambda, self.cfg.max_iters_coupled, &mut trace)?;
        let (state, _, _) = self.ascend(&obs, state, Stage::Direct, 1.0, self.cfg.max_iters_direct, &mut trace)?;
        SspVector::from_phases(state.theta)
    }
}

pub fn decode(a: &EncodingMatrix, c: &CouplingMatrix, u: &SspVector, cfg: &DecodeConfig) -> Result<DecodeResult> {
    CsimDecoder::new(a, c, cfg.clone())?.decode(u)
}

pub fn cleanup_phases(a: &EncodingMatrix, c: &CouplingMatrix, u: &SspVector, cfg: &DecodeConfig) -> Result<SspVector> {
    CsimDecoder::new(a, c, cfg.clone())?.cleanup_phases(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::{corrupt, NoiseModel};
    use crate::coupling::{build_coupling_matrix, Coupling, CouplingSpec};
    use crate::fhrr::{make_encoding_matrix, similarity, wrap_phase};
    use crate::rng;
    use rand::Rng;
    use std::f64::consts::PI;

    fn setup(n: usize, d: usize, seed: u64) -> (EncodingMatrix, CouplingMatrix) {
        let a = make_encoding_matrix(n, d, seed).unwrap();
        let c = build_coupling_matrix(&a, &CouplingSpec::uniform_for(d, 5.0, seed + 1).unwrap()).unwrap();
        (a, c)
    }

    fn single_row() -> (EncodingMatrix, CouplingMatrix) {
        let a = EncodingMatrix::from_rows(&[vec![1.0], vec![0.9]]).unwrap();
        let c = CouplingMatrix::new(2, vec![Coupling { i: 0, j: 1, sign: -1 }]).unwrap();
        (a, c)
    }

    #[test]
    fn direct_objective_examples() {
        let (a, _) = setup(64, 2, 1);
        let x = [1.2, -0.7];
        let u = encode(&a, &x).unwrap();
        assert!((objective_direct(&a, u.phases(), &x).unwrap() - 1.0).abs() < 1e-12);

        let flipped: Vec<f64> = a.apply(&x).unwrap().iter().map(|p| wrap_phase(p + PI)).collect();
        assert!((objective_direct(&a, &flipped, &x).unwrap() + 1.0).abs() < 1e-12);

        let y = [0.3, 2.0];
        let sim = similarity(&u, &encode(&a, &y).unwrap()).unwrap().re;
        assert!((objective_direct(&a, u.phases(), &y).unwrap() - sim).abs() < 1e-12);
        assert!(objective_direct(&a, u.phases(), &[1.0]).is_err());
    }

    #[test]
    fn coupled_objective_examples() {
        let (a, c) = setup(64, 1, 2);
        let u = encode(&a, &[3.3]).unwrap();
        assert!((objective_coupled(&c, &a, u.phases(), &[3.3]).unwrap() - 1.0).abs() < 1e-12);

        let (a, c) = single_row();
        let v = objective_coupled(&c, &a, &[0.5, 0.45], &[0.5]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(grad_coupled(&c, &a, &[0.5, 0.45], &[0.5]).unwrap()[0].abs() < 1e-12);
    }

    #[test]
    fn direct_gradient_examples() {
        let (a, _) = setup(64, 3, 4);
        let x = [0.1, 2.0, -4.0];
        let u = encode(&a, &x).unwrap();
        assert!(grad_direct(&a, u.phases(), &x).unwrap().iter().all(|g| g.abs() < 1e-12));
        let (a, c) = setup(64, 3, 4);
        assert!(grad_coupled(&c, &a, u.phases(), &x).unwrap().iter().all(|g| g.abs() < 1e-12));

        let one = EncodingMatrix::from_rows(&[vec![2.0]]).unwrap();
        let g = grad_direct(&one, &[0.4], &[0.1]).unwrap();
        assert!((g[0] - 2.0 * 0.2f64.sin()).abs() < 1e-15);
        assert!((g[0] - 0.39734).abs() < 1e-5);
    }

    #[test]
    fn complex_gradient_examples() {
        let one = EncodingMatrix::from_rows(&[vec![1.0]]).unwrap();
        let u = SspVector::from_phases(vec![PI / 2.0]).unwrap();
        let v = SspVector::from_phases(vec![0.0]).unwrap();
        assert!((grad_complex_direct(&one, &u, &v).unwrap()[0] - 1.0).abs() < 1e-15);

        let (a, _) = setup(32, 2, 3);
        let w = encode(&a, &[1.0, 1.0]).unwrap();
        assert!(grad_complex_direct(&a, &w, &w).unwrap().iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn blended_objective_interpolates() {
        let (a, c) = setup(64, 1, 9);
        let u = corrupt(&encode(&a, &[1.0]).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.3 }, 1).unwrap();
        let x = [0.4];
        let d = objective_direct(&a, u.phases(), &x).unwrap();
        let cc = objective_coupled(&c, &a, u.phases(), &x).unwrap();
        let e = objective_blended(&c, &a, u.phases(), &x, 0.25).unwrap();
        assert!((e - (0.25 * d + 0.75 * cc)).abs() < 1e-14);
        let g = grad_blended(&c, &a, u.phases(), &x, 0.25).unwrap();
        let gd = grad_direct(&a, u.phases(), &x).unwrap();
        let gc = grad_coupled(&c, &a, u.phases(), &x).unwrap();
        assert!((g[0] - (0.25 * gd[0] + 0.75 * gc[0])).abs() < 1e-14);
    }

    #[test]
    fn internal_terms_agree_with_public_objectives() {
        let (a, c) = setup(128, 2, 5);
        let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
        let u = corrupt(&encode(&a, &[2.0, -1.0]).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.4 }, 2).unwrap();
        let obs = dec.observe(&u).unwrap();
        let x = vec![0.5, 0.25];
        for lambda in [0.0, 0.3, 1.0] {
            let (v, g) = ValueState(x.clone()).eval(&dec, &obs, lambda);
            assert!((v - objective_blended(&c, &a, u.phases(), &x, lambda).unwrap()).abs() < 1e-12);
            let expect = grad_blended(&c, &a, u.phases(), &x, lambda).unwrap();
            assert!(g.iter().zip(&expect).all(|(p, q)| (p - q).abs() < 1e-12));

            let theta = PhaseState { theta: a.apply(&x).unwrap() };
            let (vt, gt) = theta.eval(&dec, &obs, lambda);
            assert!((vt - v).abs() < 1e-12);
            assert!(gt.iter().zip(&g).all(|(p, q)| (p - q).abs() < 1e-12));
        }
    }

    #[test]
    fn noiseless_origin_takes_one_iteration_per_stage() {
        let (a, c) = setup(256, 2, 6);
        let u = encode(&a, &[0.0, 0.0]).unwrap();
        let r = decode(&a, &c, &u, &DecodeConfig::default()).unwrap();
        assert_eq!(r.x_hat, vec![0.0, 0.0]);
        assert_eq!((r.iters_coupled, r.iters_direct), (1, 1));
        assert!(r.converged);
        assert_eq!(r.cleaned_ssp, u);
    }

    #[test]
    fn noiseless_recovery() {
        let mut r = rng::seeded(12);
        for d in 1..=3 {
            let (a, c) = setup(1024, d, 30 + d as u64);
            let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
            for _ in 0..10 {
                let x = rng::sample_ball(d, 5.0, &mut r);
                let out = dec.decode(&encode(&a, &x).unwrap()).unwrap();
                let err = out.x_hat.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                assert!(err < 0.01, "d={d} x={x:?} err={err}");
                assert!(out.converged);
            }
        }
    }

    #[test]
    fn result_invariants_and_trace() {
        let (a, c) = setup(512, 1, 7);
        let u = corrupt(&encode(&a, &[-2.5]).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.5 }, 3).unwrap();
        let r = decode(&a, &c, &u, &DecodeConfig::default()).unwrap();
        assert!(r.cleaned_ssp.max_phase_error(&encode(&a, &r.x_hat).unwrap()).unwrap() == 0.0);
        assert!((r.final_similarity - objective_direct(&a, u.phases(), &r.x_hat).unwrap()).abs() < 1e-12);
        assert_eq!(r.objective_trace.len(), r.iters_coupled + r.iters_direct + 2);
        for stage in [Stage::Coupled, Stage::Direct] {
            let values: Vec<f64> =
                r.objective_trace.iter().filter(|t| t.stage == stage).map(|t| t.objective).collect();
            assert!(values.windows(2).all(|w| w[1] >= w[0] - 1e-10), "{stage:?}: {values:?}");
        }
        let json = serde_json::to_string(&r).unwrap();
        let back: DecodeResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.x_hat, r.x_hat);
        assert_eq!(back.objective_trace.len(), r.objective_trace.len());
    }

    #[test]
    fn stationarity_at_convergence() {
        let (a, c) = setup(1024, 2, 8);
        let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
        let gamma = dec.step_for(1.0);
        let mut r = rng::seeded(4);
        for t in 0..10 {
            let x = rng::sample_ball(2, 5.0, &mut r);
            let u = corrupt(&encode(&a, &x).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.5 }, t).unwrap();
            let out = dec.decode(&u).unwrap();
            assert!(out.converged);
            let g = grad_direct(&a, u.phases(), &out.x_hat).unwrap();
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(gmax < 10.0 * 0.01 / gamma, "{gmax}");
        }
    }

    #[test]
    fn monotone_ascent_without_backtracking_below_stability_threshold() {
        let (a, c) = setup(512, 1, 10);
        let mut r = rng::seeded(2);
        for t in 0..10 {
            let x = rng::sample_ball(1, 5.0, &mut r);
            let u = corrupt(&encode(&a, &x).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.5 }, t).unwrap();
            let mut scale = 1.0;
            let monotone = |scale: f64| {
                let cfg = DecodeConfig { step: StepSize::Curvature(scale), backtracking: false, ..Default::default() };
                let out = decode(&a, &c, &u, &cfg).unwrap();
                [Stage::Coupled, Stage::Direct].iter().all(|&s| {
                    let v: Vec<f64> =
                        out.objective_trace.iter().filter(|p| p.stage == s).map(|p| p.objective).collect();
                    v.windows(2).all(|w| w[1] >= w[0] - 1e-10)
                })
            };
            let mut found = false;
            for _ in 0..12 {
                if monotone(scale) {
                    found = true;
                    break;
                }
                scale *= 0.5;
            }
            assert!(found, "trial {t}: no monotone step found");
        }
    }

    #[test]
    fn cleanup_matches_decode_then_encode() {
        let (a, c) = setup(512, 2, 11);
        let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
        let mut r = rng::seeded(6);
        for t in 0..20 {
            let x = rng::sample_ball(2, 5.0, &mut r);
            let sigma = r.random_range(0.0..0.6);
            let u = corrupt(&encode(&a, &x).unwrap(), &NoiseModel::ComponentGaussian { sigma }, t).unwrap();
            let via_x = dec.decode(&u).unwrap().cleaned_ssp;
            let via_theta = dec.cleanup_phases(&u).unwrap();
            assert!(via_theta.max_phase_error(&via_x).unwrap() < 1e-9);
        }
        // The stopping rule leaves an O(tolerance³) residual, so exact
        // reproduction needs a tolerance well below the default.
        let tight = DecodeConfig { x_tolerance: 1e-10, ..Default::default() };
        let dec = CsimDecoder::new(&a, &c, tight).unwrap();
        let clean = encode(&a, &[1.0, -2.0]).unwrap();
        assert!(dec.cleanup_phases(&clean).unwrap().max_phase_error(&clean).unwrap() < 1e-9);
    }

    #[test]
    fn finite_difference_gradients() {
        let mut r = rng::seeded(3);
        let h = 1e-6;
        for trial in 0..20 {
            let d = 1 + trial % 3;
            let (a, c) = setup(64, d, 100 + trial as u64);
            let phases: Vec<f64> = (0..64).map(|_| r.random_range(-PI..PI)).collect();
            let x: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
            let check = |f: &dyn Fn(&[f64]) -> f64, g: Vec<f64>| {
                for k in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                    let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                    assert!(rel < 1e-5, "fd {fd} vs analytic {}", g[k]);
                }
            };
            check(&|x| objective_direct(&a, &phases, x).unwrap(), grad_direct(&a, &phases, &x).unwrap());
            check(&|x| objective_coupled(&c, &a, &phases, x).unwrap(), grad_coupled(&c, &a, &phases, &x).unwrap());
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let (a, c) = setup(32, 1, 1);
        let bad = [
            DecodeConfig { step: StepSize::Fixed(0.0), ..Default::default() },
            DecodeConfig { max_iters_direct: 0, ..Default::default() },
            DecodeConfig { x_tolerance: 0.0, ..Default::default() },
            DecodeConfig { momentum: 1.0, ..Default::default() },
            DecodeConfig { init_x: Some(vec![0.0, 0.0]), ..Default::default() },
        ];
        for cfg in bad {
            assert!(CsimDecoder::new(&a, &c, cfg).is_err());
        }
    }

    #[test]
    fn oversized_fixed_step_reports_non_finite() {
        let (a, c) = setup(32, 1, 1);
        let u = encode(&a, &[2.0]).unwrap();
        let cfg = DecodeConfig { step: StepSize::Fixed(1e308), backtracking: false, ..Default::default() };
        assert!(matches!(decode(&a, &c, &u, &cfg), Err(Error::NonFiniteObjective { .. })));
    }

    #[test]
    fn momentum_still_recovers_noiseless_values() {
        let (a, c) = setup(512, 1, 13);
        let cfg = DecodeConfig { momentum: 0.5, ..Default::default() };
        let out = decode(&a, &c, &encode(&a, &[3.7]).unwrap(), &cfg).unwrap();
        assert!((out.x_hat[0] - 3.7).abs() < 0.01);
    }
}
