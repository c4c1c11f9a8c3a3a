//! Oversampling for imbalanced tabular classification.
//!
//! The main method ([`pipeline::run_ensy`]) synthesizes candidate rows for a
//! class from per-feature distributions fitted on all *other* classes
//! (Gaussian mixtures for numeric features, empirical CDFs for categorical
//! ones) and keeps only the candidates a validator classifier assigns to the
//! class. Random oversampling and SMOTE-NC are included as baselines, along
//! with a confusion-matrix based evaluation harness and a small synthetic
//! benchmark.

pub mod baselines;
pub mod bench;
pub mod catsampler;
pub mod cli;
pub mod data;
pub mod error;
pub mod generator;
pub mod gmm;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod validator;

pub use error::{Error, Result};
