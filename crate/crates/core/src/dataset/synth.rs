//! Synthetic tiered-noise interaction data with a known ground truth.
//!
//! Compounds and proteins get random bit vectors. A hidden rule scores each
//! pair by a weighted overlap `Σ_i w_i · c_i · p_i` over the first
//! `min(compound_bits, protein_bits)` positions (`w_i ~ U(0.5, 1.5)`); the
//! top `truth_rate` fraction of the grid are true interactions. Each tier then
//! receives its configured number of positive records, of which exactly
//! `round(flip_rate · count)` are drawn from true negatives instead.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_text, BitVectorStore, InteractionRecord, InteractionTable, TierSpec};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTier {
    pub tier: TierSpec,
    pub positives: usize,
    #[serde(default)]
    pub flip_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_compounds: usize,
    pub n_proteins: usize,
    pub compound_bits: usize,
    pub protein_bits: usize,
    /// Probability that any single feature bit is set.
    #[serde(default = "default_bit_density")]
    pub bit_density: f64,
    /// Fraction of the compound × protein grid that truly interacts.
    #[serde(default = "default_truth_rate")]
    pub truth_rate: f64,
    pub tiers: Vec<SynthTier>,
    /// Noise-free held-out tier; `flip_rate` must be zero.
    pub validation: SynthTier,
    pub seed: u64,
}

fn default_bit_density() -> f64 {
    0.3
}

fn default_truth_rate() -> f64 {
    0.15
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.n_compounds == 0 || self.n_proteins == 0 {
            return cfg("n_compounds and n_proteins must be positive".into());
        }
        if self.compound_bits == 0 || self.protein_bits == 0 {
            return cfg("compound_bits and protein_bits must be positive".into());
        }
        if !(self.bit_density > 0.0 && self.bit_density < 1.0) {
            return cfg(format!(
                "bit_density must lie in (0, 1), got {}",
                self.bit_density
            ));
        }
        if !(self.truth_rate > 0.0 && self.truth_rate < 1.0) {
            return cfg(format!(
                "truth_rate must lie in (0, 1), got {}",
                self.truth_rate
            ));
        }
        if self.validation.flip_rate != 0.0 {
            return cfg("validation.flip_rate must be 0".into());
        }
        let all: Vec<&SynthTier> = self.tiers.iter().chain([&self.validation]).collect();
        for (i, t) in all.iter().enumerate() {
            if !(0.0..=1.0).contains(&t.flip_rate) {
                return cfg(format!(
                    "tier {} flip_rate {} outside [0, 1]",
                    t.tier, t.flip_rate
                ));
            }
            for u in &all[i + 1..] {
                if t.tier.overlaps(&u.tier) {
                    return cfg(format!("tiers {} and {} overlap", t.tier, u.tier));
                }
            }
        }
        Ok(())
    }
}

/// True label for every pair of the grid, row-major over
/// `(compound, protein)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    compound_ids: Vec<String>,
    protein_ids: Vec<String>,
    compound_index: HashMap<String, usize>,
    protein_index: HashMap<String, usize>,
    truth: Vec<bool>,
}

impl GroundTruth {
    pub fn is_true(&self, compound: &str, protein: &str) -> Option<bool> {
        let c = *self.compound_index.get(compound)?;
        let p = *self.protein_index.get(protein)?;
        Some(self.truth[c * self.protein_ids.len() + p])
    }

    pub fn true_count(&self) -> usize {
        self.truth.iter().filter(|&&t| t).count()
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// `compound_id<TAB>protein_id<TAB>true_label` for the whole grid.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.truth.len() * 16);
        let np = self.protein_ids.len();
        for (i, &t) in self.truth.iter().enumerate() {
            out.push_str(&self.compound_ids[i / np]);
            out.push('\t');
            out.push_str(&self.protein_ids[i % np]);
            out.push_str(if t { "\t1\n" } else { "\t0\n" });
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path.as_ref(), &self.render())
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub compounds: BitVectorStore,
    pub proteins: BitVectorStore,
    pub table: InteractionTable,
    pub oracle: GroundTruth,
}

fn padded_ids(prefix: &str, n: usize) -> Vec<String> {
    let width = n.to_string().len();
    (1..=n).map(|i| format!("{prefix}{i:0width$}")).collect()
}

fn random_bits(n: usize, width: usize, density: f64, rng: &mut RngStream) -> Vec<Vec<bool>> {
    (0..n)
        .map(|_| (0..width).map(|_| rng.uniform() < density).collect())
        .collect()
}

pub fn synth_generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let master = RngStream::new(config.seed);
    let compound_ids = padded_ids("C", config.n_compounds);
    let protein_ids = padded_ids("P", config.n_proteins);
    let compound_bits = random_bits(
        config.n_compounds,
        config.compound_bits,
        config.bit_density,
        &mut master.fork(1),
    );
    let protein_bits = random_bits(
        config.n_proteins,
        config.protein_bits,
        config.bit_density,
        &mut master.fork(2),
    );

    let shared = config.compound_bits.min(config.protein_bits);
    let mut wrng = master.fork(3);
    let weights: Vec<f64> = (0..shared).map(|_| wrng.uniform_range(0.5, 1.5)).collect();
    let np = config.n_proteins;
    let grid = config.n_compounds * np;
    let scores: Vec<f64> = (0..grid)
        .map(|i| {
            let (c, p) = (&compound_bits[i / np], &protein_bits[i % np]);
            (0..shared)
                .filter(|&k| c[k] && p[k])
                .map(|k| weights[k])
                .sum()
        })
        .collect();
    let mut sorted = scores.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((config.truth_rate * grid as f64).round() as usize).clamp(1, grid);
    let threshold = sorted[k - 1];
    if threshold <= 0.0 {
        return Err(Error::Config(
            "truth_rate too high for the bit density: the rule would mark zero-overlap pairs true"
                .into(),
        ));
    }
    let truth: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();

    let mut trues: Vec<usize> = (0..grid).filter(|&i| truth[i]).collect();
    let mut falses: Vec<usize> = (0..grid).filter(|&i| !truth[i]).collect();
    let mut arng = master.fork(4);
    arng.shuffle(&mut trues);
    arng.shuffle(&mut falses);

    let mut srng = master.fork(5);
    let (mut ti, mut fi) = (0usize, 0usize);
    let mut records = Vec::new();
    for t in config.tiers.iter().chain([&config.validation]) {
        let n_false = (t.flip_rate * t.positives as f64).round() as usize;
        let n_true = t.positives - n_false;
        if ti + n_true > trues.len() {
            return Err(Error::Config(format!(
                "tier {} needs {n_true} true pairs but only {} remain",
                t.tier,
                trues.len() - ti
            )));
        }
        if fi + n_false > falses.len() {
            return Err(Error::Config(format!(
                "tier {} needs {n_false} false pairs but only {} remain",
                t.tier,
                falses.len() - fi
            )));
        }
        let picked = trues[ti..ti + n_true]
            .iter()
            .chain(&falses[fi..fi + n_false])
            .copied();
        for cell in picked {
            let span = (t.tier.hi() - t.tier.lo()) as usize;
            let score = t.tier.lo() + srng.index(span) as u32;
            records.push(InteractionRecord::new(
                compound_ids[cell / np].clone(),
                protein_ids[cell % np].clone(),
                score,
            ));
        }
        ti += n_true;
        fi += n_false;
    }
    master.fork(6).shuffle(&mut records);

    let mut compounds = BitVectorStore::new(config.compound_bits);
    for (id, bits) in compound_ids.iter().zip(&compound_bits) {
        compounds.insert_bools(id.clone(), bits)?;
    }
    let mut proteins = BitVectorStore::new(config.protein_bits);
    for (id, bits) in protein_ids.iter().zip(&protein_bits) {
        proteins.insert_bools(id.clone(), bits)?;
    }
    let index = |ids: &[String]| {
        ids.iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect()
    };
    Ok(SynthOutput {
        compounds,
        proteins,
        table: InteractionTable::new(records)?,
        oracle: GroundTruth {
            compound_index: index(&compound_ids),
            protein_index: index(&protein_ids),
            compound_ids,
            protein_ids,
            truth,
        },
    })
}
