use super::{LabeledPair, LatentStore};
use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Classifier input for a pair: `[protein features ‖ compound features]`.
pub fn make_features(
    pair: &LabeledPair,
    compound_latents: &LatentStore,
    protein_latents: &LatentStore,
) -> Result<(Vec<f64>, u8)> {
    let mut out = Vec::with_capacity(protein_latents.dim() + compound_latents.dim());
    write_features(pair, compound_latents, protein_latents, &mut out)?;
    Ok((out, pair.label()))
}

fn write_features(
    pair: &LabeledPair,
    compounds: &LatentStore,
    proteins: &LatentStore,
    out: &mut Vec<f64>,
) -> Result<()> {
    let p = proteins
        .get(&pair.protein_id)
        .ok_or_else(|| Error::Data(format!("no features for protein {}", pair.protein_id)))?;
    let c = compounds
        .get(&pair.compound_id)
        .ok_or_else(|| Error::Data(format!("no features for compound {}", pair.compound_id)))?;
    out.extend_from_slice(p);
    out.extend_from_slice(c);
    Ok(())
}

/// Feature stores for both sides of a pair.
#[derive(Debug, Clone)]
pub struct FeatureContext {
    pub compounds: LatentStore,
    pub proteins: LatentStore,
}

impl FeatureContext {
    pub fn new(compounds: LatentStore, proteins: LatentStore) -> Self {
        Self {
            compounds,
            proteins,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.proteins.dim() + self.compounds.dim()
    }

    /// Feature matrix (one row per pair) and 0/1 labels.
    pub fn assemble(&self, pairs: &[LabeledPair]) -> Result<(Tensor2, Vec<f64>)> {
        let mut data = Vec::with_capacity(pairs.len() * self.feature_dim());
        for pair in pairs {
            write_features(pair, &self.compounds, &self.proteins, &mut data)?;
        }
        let labels = pairs.iter().map(|p| f64::from(p.label())).collect();
        Ok((
            Tensor2::from_vec(pairs.len(), self.feature_dim(), data)?,
            labels,
        ))
    }
}
