//! Everything between raw files and training batches.

mod bits;
mod features;
mod interactions;
mod latent;
mod negatives;
pub mod synth;

pub use bits::BitVectorStore;
pub use features::{make_features, FeatureContext};
pub use interactions::{
    percentile_cutoff, tier_filter, InteractionRecord, InteractionTable, LabeledPair, PairSet,
    TierSpec, MAX_SCORE,
};
pub use latent::LatentStore;
pub use negatives::{sample_negatives, NegativeSampler};
pub use synth::{synth_generate, GroundTruth, SynthConfig, SynthOutput, SynthTier};

use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Ids end up in tab-separated files, so they may not contain separators.
pub(crate) fn check_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err("empty id".into());
    }
    if id.contains(['\t', '\n', '\r']) {
        return Err(format!("id {id:?} contains a tab or newline"));
    }
    Ok(())
}
