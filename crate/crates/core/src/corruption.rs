//! Noise models for SSPs: complex-component Gaussian noise, von Mises phase
//! noise and bundle interference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::fhrr::{self, wrap_phase, BundleVector, SspVector, DEFAULT_MODULUS_FLOOR};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizePolicy {
    /// One normalization after every item has been added.
    AtEnd,
    /// Normalize after each addition; earlier items get diluted.
    PerAdd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum NoiseModel {
    ComponentGaussian { sigma: f64 },
    VonMisesPhase { kappa: f64 },
    /// Store the vector in a bundle of `items` role/filler pairs (random
    /// distractors), then query it back out.
    Bundle { items: usize, policy: NormalizePolicy },
}

impl NoiseModel {
    fn validate(&self) -> Result<()> {
        match *self {
            Self::ComponentGaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")))
            }
            Self::VonMisesPhase { kappa } if !(kappa > 0.0) || kappa.is_nan() => {
                Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")))
            }
            Self::Bundle { items: 0, .. } => Err(Error::InvalidParameter("bundle needs >= 1 item".into())),
            _ => Ok(()),
        }
    }
}

pub fn corrupt(u: &SspVector, model: &NoiseModel, seed: u64) -> Result<SspVector> {
    corrupt_with(u, model, &mut rng::seeded(seed))
}

pub fn corrupt_with<R: Rng + ?Sized>(u: &SspVector, model: &NoiseModel, rng: &mut R) -> Result<SspVector> {
    model.validate()?;
    match *model {
        NoiseModel::ComponentGaussian { sigma } => {
            if sigma == 0.0 {
                return Ok(u.clone());
            }
            let noise = Normal::new(0.0, sigma).expect("sigma validated");
            let components = u
                .to_complex()
                .into_iter()
                .map(|c| c + Complex64::new(noise.sample(rng), noise.sample(rng)))
                .collect();
            fhrr::normalize(&BundleVector::from_components(components)?)
        }
        NoiseModel::VonMisesPhase { kappa } => {
            let phases = u.phases().iter().map(|&p| p + sample_von_mises(kappa, rng)).collect();
            SspVector::from_phases(phases)
        }
        NoiseModel::Bundle { items, policy } => {
            let n = u.dim();
            let mut payloads = Vec::with_capacity(items);
            payloads.push((SspVector::random(n, rng)?, u.clone()));
            for _ in 1..items {
                payloads.push((SspVector::random(n, rng)?, SspVector::random(n, rng)?));
            }
            bundle_query(&payloads, 0, policy)
        }
    }
}

/// Draws a von Mises(0, κ) angle (Best & Fisher rejection sampler). Very
/// large κ falls back to the wrapped-normal limit `N(0, 1/κ)`.
pub fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa > 1e6 {
        let z: f64 = StandardNormal.sample(rng);
        return wrap_phase(z / kappa.sqrt());
    }
    if kappa < 1e-8 {
        return fhrr::uniform_phase(rng);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if rng.random::<bool>() { theta } else { -theta };
        }
    }
}

/// Builds `M = Σ role_k ⊗ filler_k` (normalized per `policy`) and returns
/// `M ⊘ role_q`, a corrupted copy of `filler_q`.
pub fn bundle_query(
    payloads: &[(SspVector, SspVector)],
    query_index: usize,
    policy: NormalizePolicy,
) -> Result<SspVector> {
    let memory = build_bundle(payloads, policy)?;
    let (role, _) = payloads.get(query_index).ok_or_else(|| {
        Error::InvalidParameter(format!("query index {query_index} out of range for {} items", payloads.len()))
    })?;
    fhrr::unbind(&memory, role)
}

/// The normalized memory vector `M` for a list of role/filler pairs.
pub fn build_bundle(payloads: &[(SspVector, SspVector)], policy: NormalizePolicy) -> Result<SspVector> {
    let (first_role, first_filler) = payloads.first().ok_or(Error::Empty("bundle payloads"))?;
    let n = first_role.dim();
    let mut bound = Vec::with_capacity(payloads.len());
    for (role, filler) in payloads {
        check_dim(n, role.dim())?;
        check_dim(n, filler.dim())?;
        bound.push(fhrr::bind(role, filler)?);
    }
    if bound.len() == 1 {
        return fhrr::bind(first_role, first_filler);
    }
    match policy {
        NormalizePolicy::AtEnd => fhrr::normalize(&fhrr::bundle(&bound)?),
        NormalizePolicy::PerAdd => {
            let mut memory = bound[0].clone();
            for item in &bound[1..] {
                let mut b = BundleVector::from_ssp(&memory);
                b.add(item)?;
                memory = fhrr::normalize_with_floor(&b, DEFAULT_MODULUS_FLOOR)?;
            }
            Ok(memory)
        }
    }
}

/// Per-element wrapped phase error `wrap(noisy − clean)`.
pub fn phase_errors(noisy: &SspVector, clean: &SspVector) -> Result<Vec<f64>> {
    check_dim(clean.dim(), noisy.dim())?;
    Ok(noisy
        .phases()
        .iter()
        .zip(clean.phases())
        .map(|(a, b)| wrap_phase(a - b))
        .collect())
}

/// Circular standard deviation `sqrt(−2 ln R)`, `R` the mean resultant length.
pub fn circular_std(angles: &[f64]) -> f64 {
    let n = angles.len() as f64;
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let r = ((s / n).powi(2) + (c / n).powi(2)).sqrt().min(1.0);
    (-2.0 * r.ln()).max(0.0).sqrt()
}
