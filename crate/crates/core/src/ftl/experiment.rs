use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::trainer::{
    train_ftl, DataContext, TrainOutcome, TrainSchedule, TrainSettings, TrainStep, DEFAULT_LAYERS,
};
use crate::dataset::{
    synth_generate, BitVectorStore, FeatureContext, InteractionTable, LatentStore, SynthConfig,
    TierSpec,
};
use crate::error::{Error, Result};

/// Per-entity features, either raw bit vectors or precomputed latents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    Bits(PathBuf),
    Latents(PathBuf),
}

impl FeatureSource {
    fn load(&self, base: &Path) -> Result<LatentStore> {
        match self {
            FeatureSource::Bits(p) => Ok(BitVectorStore::load(base.join(p))?.to_latent()),
            FeatureSource::Latents(p) => LatentStore::load(base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub compounds: FeatureSource,
    pub proteins: FeatureSource,
    pub interactions: PathBuf,
}

impl DataPaths {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<DataContext> {
        let table = InteractionTable::load(base.join(&self.interactions))?;
        let features = FeatureContext::new(self.compounds.load(base)?, self.proteins.load(base)?);
        Ok(DataContext::new(table, features))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    pub steps: Vec<TrainStep>,
    /// Must match the experiment's validation tier when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_tier: Option<TierSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
    pub arms: Vec<ArmConfig>,
    pub validation_tier: TierSpec,
    pub seed: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    #[serde(default)]
    pub reset_optimizer_between_steps: bool,
}

fn default_batch_size() -> usize {
    1000
}

fn default_learning_rate() -> f64 {
    0.001
}

fn default_layers() -> Vec<usize> {
    DEFAULT_LAYERS.to_vec()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn settings(&self) -> TrainSettings {
        TrainSettings {
            validation_tier: self.validation_tier,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            seed: self.seed,
            layers: self.layers.clone(),
            reset_optimizer_between_steps: self.reset_optimizer_between_steps,
        }
    }

    pub fn schedule(&self, arm: &ArmConfig) -> TrainSchedule {
        TrainSchedule {
            steps: arm.steps.clone(),
            settings: self.settings(),
        }
    }

    pub fn arm(&self, name: &str) -> Option<&ArmConfig> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `data` or `synth`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("one of `data` or `synth` is required".into()))
            }
            (None, Some(s)) => s.validate()?,
            (Some(_), None) => {}
        }
        if self.arms.is_empty() {
            return Err(Error::Config("`arms` must not be empty".into()));
        }
        let mut names = HashSet::new();
        for arm in &self.arms {
            if arm.name.is_empty() || arm.name.contains([',', '\n', '\r', '/', '\\']) {
                return Err(Error::Config(format!(
                    "arm name {:?} must be non-empty without commas, slashes or newlines",
                    arm.name
                )));
            }
            if !names.insert(arm.name.as_str()) {
                return Err(Error::Config(format!("duplicate arm name {}", arm.name)));
            }
            if let Some(t) = arm.validation_tier {
                if t != self.validation_tier {
                    return Err(Error::Config(format!(
                        "arm {} validates on {t} but the experiment validates on {}",
                        arm.name, self.validation_tier
                    )));
                }
            }
            self.schedule(arm)
                .validate()
                .map_err(|e| Error::Config(format!("arm {}: {e}", arm.name)))?;
        }
        Ok(())
    }

    /// Generates or loads the data; relative paths resolve against `base`.
    pub fn load_data(&self, base: &Path) -> Result<DataContext> {
        match (&self.data, &self.synth) {
            (_, Some(synth)) => {
                let out = synth_generate(synth)?;
                Ok(DataContext::from_bits(
                    out.table,
                    &out.compounds,
                    &out.proteins,
                ))
            }
            (Some(paths), None) => paths.load(base),
            (None, None) => Err(Error::Config("one of `data` or `synth` is required".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ArmResult {
    pub name: String,
    pub outcome: TrainOutcome,
}

pub fn run_arm(
    config: &ExperimentConfig,
    arm: &ArmConfig,
    data: &DataContext,
) -> Result<ArmResult> {
    log::info!("arm {}: {} step(s)", arm.name, arm.steps.len());
    let outcome = train_ftl(&config.schedule(arm), data)?;
    Ok(ArmResult {
        name: arm.name.clone(),
        outcome,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochOfBest {
    pub loss: usize,
    pub accuracy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub steps: Vec<TrainStep>,
    pub best_val_loss: f64,
    pub best_val_accuracy: f64,
    pub epoch_of_best: EpochOfBest,
}

/// `a - b` for each best metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub a: String,
    pub b: String,
    pub val_loss_delta: f64,
    pub val_accuracy_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub seed: u64,
    pub validation_tier: TierSpec,
    pub arms: Vec<ArmReport>,
    pub deltas: Vec<PairDelta>,
}

impl ComparisonReport {
    /// Arms are ordered by name; deltas cover every unordered pair.
    pub fn from_arms(config: &ExperimentConfig, results: &[ArmResult]) -> Result<Self> {
        let mut arms = results
            .iter()
            .map(|r| {
                let best = r.outcome.log.best_validation().ok_or_else(|| {
                    Error::Data(format!("arm {} logged no validation epochs", r.name))
                })?;
                let steps = config
                    .arm(&r.name)
                    .map(|a| a.steps.clone())
                    .unwrap_or_default();
                Ok(ArmReport {
                    name: r.name.clone(),
                    steps,
                    best_val_loss: best.loss,
                    best_val_accuracy: best.accuracy,
                    epoch_of_best: EpochOfBest {
                        loss: best.epoch_of_best_loss,
                        accuracy: best.epoch_of_best_accuracy,
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        arms.sort_by(|a, b| a.name.cmp(&b.name));
        let mut deltas = Vec::new();
        for (i, a) in arms.iter().enumerate() {
            for b in &arms[i + 1..] {
                deltas.push(PairDelta {
                    a: a.name.clone(),
                    b: b.name.clone(),
                    val_loss_delta: a.best_val_loss - b.best_val_loss,
                    val_accuracy_delta: a.best_val_accuracy - b.best_val_accuracy,
                });
            }
        }
        Ok(Self {
            seed: config.seed,
            validation_tier: config.validation_tier,
            arms,
            deltas,
        })
    }

    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// Sorted by arm name.
    pub arms: Vec<ArmResult>,
    pub report: ComparisonReport,
}

impl ExperimentResult {
    pub fn assemble(config: &ExperimentConfig, mut arms: Vec<ArmResult>) -> Result<Self> {
        arms.sort_by(|a, b| a.name.cmp(&b.name));
        let report = ComparisonReport::from_arms(config, &arms)?;
        Ok(Self { arms, report })
    }

    /// All arms' metrics in one CSV, arms in name order.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(crate::ftl::MetricsLog::CSV_HEADER);
        for a in &self.arms {
            out.push_str(&a.outcome.log.csv_rows(&a.name));
        }
        out
    }
}

/// Runs every arm sequentially against the same data and seed.
pub fn run_experiment(config: &ExperimentConfig, data: &DataContext) -> Result<ExperimentResult> {
    config.validate()?;
    let arms = config
        .arms
        .iter()
        .map(|arm| run_arm(config, arm, data))
        .collect::<Result<Vec<_>>>()?;
    ExperimentResult::assemble(config, arms)
}
