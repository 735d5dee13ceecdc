//! Comparison methods: exhaustive grid search, a resonator network and a
//! denoising MLP.

pub mod denoiser;
pub mod grid;
pub mod resonator;

pub use denoiser::{
    denoise, train_denoiser, Adam, AdamState, DenoiseOutput, DenoiserConfig, DenoiserTask, MlpDenoiser,
};
pub use grid::{grid_search, similarity_map, GridEvaluator, GridResult, GridSpec};
pub use resonator::{resonator_decode, ResonatorConfig, ResonatorNetwork, ResonatorResult};
