//! Experiment harness for the `csim` decoder: noise sweeps against the
//! baselines, convergence counts, bundle cleanup and the displacement demo.

pub mod config;
pub mod experiments;
pub mod plot;
pub mod records;
