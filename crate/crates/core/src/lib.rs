//! Stepwise training of a pair classifier across label-confidence tiers.
//!
//! The network first learns from a large, noisy low-confidence slice of the
//! positive records, then continues (same weights, same optimizer state) on
//! progressively higher-confidence slices after the lower tiers are filtered
//! out. Around that procedure the crate provides:
//!
//! - [`nn`]: dense networks with hand-written backprop, BCE loss and Adam.
//! - [`vae`]: variational autoencoders that compress bit-vector features.
//! - [`dataset`]: bit-vector stores, interaction tables, confidence tiers,
//!   negative sampling and a synthetic tiered-noise generator.
//! - [`ftl`]: the stepwise trainer, single-tier baselines and experiments.
//! - [`diagnostics`]: per-layer weight drift between snapshots.
//!
//! Everything is `f64`, single-threaded and seeded through [`RngStream`], so
//! identical inputs give bit-identical outputs.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod format;
pub mod ftl;
pub mod nn;
pub mod rng;
pub mod tensor;
pub mod vae;

pub use error::{Error, Result};
pub use nn::{Activation, AdamState, DenseLayer, DenseNetwork};
pub use rng::RngStream;
pub use tensor::Tensor2;
