//! Fourier Holographic Reduced Representation (FHRR) algebra with fractional
//! power encoding, plus the phase-coupled least-circular-distance decoder
//! ("CSim") for decoding and cleaning up spatial semantic pointers (SSPs).
//!
//! The crate is organised by concern:
//!
//! - [`fhrr`]: unitary phase vectors, binding, bundling and encoding.
//! - [`coupling`]: selection of signed phase pairs (the coupling matrix).
//! - [`decoder`]: direct and coupled objectives, gradients and the two-stage
//!   gradient-ascent decoder.
//! - [`corruption`]: component noise, von Mises phase noise and bundle queries.
//! - [`baselines`]: grid search, a resonator network and a denoising MLP.

pub mod baselines;
pub mod corruption;
pub mod coupling;
pub mod decoder;
mod error;
pub mod fhrr;
pub mod rng;

pub use error::{Error, Result};
pub use fhrr::{BundleVector, EncodingMatrix, SspVector};
