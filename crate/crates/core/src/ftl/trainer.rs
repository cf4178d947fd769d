use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricRecord, MetricsLog, Split};
use crate::dataset::{
    tier_filter, BitVectorStore, FeatureContext, InteractionTable, LabeledPair, NegativeSampler,
    TierSpec,
};
use crate::diagnostics::WeightSnapshot;
use crate::error::{Error, Result};
use crate::nn::{accuracy, bce_loss, AdamState, DenseNetwork};
use crate::rng::RngStream;
use crate::tensor::Tensor2;

/// Hidden widths of the interaction classifier plus its single sigmoid output.
pub const DEFAULT_LAYERS: [usize; 6] = [128, 64, 32, 16, 8, 1];

// Sub-stream ids under the master seed.
const STREAM_INIT: u64 = 0;
const STREAM_VALIDATION_NEGATIVES: u64 = 1;
const STREAM_STEP_NEGATIVES: u64 = 100;
const STREAM_STEP_SHUFFLE: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainStep {
    pub tier: TierSpec,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub validation_tier: TierSpec,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default = "default_layers")]
    pub layers: Vec<usize>,
    /// Start every step after the first with fresh Adam moments.
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

impl TrainSettings {
    pub fn new(validation_tier: TierSpec, seed: u64) -> Self {
        Self {
            validation_tier,
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            seed,
            layers: default_layers(),
            reset_optimizer_between_steps: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub steps: Vec<TrainStep>,
    #[serde(flatten)]
    pub settings: TrainSettings,
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        if self.steps.is_empty() {
            return Err(Error::Config("schedule needs at least one step".into()));
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.epochs == 0 {
                return Err(Error::Config(format!("step {} has zero epochs", i + 1)));
            }
            if step.tier.overlaps(&s.validation_tier) {
                return Err(Error::Config(format!(
                    "step {} tier {} overlaps validation tier {}",
                    i + 1,
                    step.tier,
                    s.validation_tier
                )));
            }
        }
        if s.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(s.learning_rate > 0.0 && s.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                s.learning_rate
            )));
        }
        if s.layers.is_empty() || s.layers.contains(&0) {
            return Err(Error::Config(
                "layers must be non-empty positive widths".into(),
            ));
        }
        if s.layers.last() != Some(&1) {
            return Err(Error::Config("the last layer must have width 1".into()));
        }
        Ok(())
    }
}

/// Positive records plus the features of every known entity.
#[derive(Debug, Clone)]
pub struct DataContext {
    pub table: InteractionTable,
    pub features: FeatureContext,
}

impl DataContext {
    pub fn new(table: InteractionTable, features: FeatureContext) -> Self {
        Self { table, features }
    }

    /// Train directly on raw bits.
    pub fn from_bits(
        table: InteractionTable,
        compounds: &BitVectorStore,
        proteins: &BitVectorStore,
    ) -> Self {
        Self::new(
            table,
            FeatureContext::new(compounds.to_latent(), proteins.to_latent()),
        )
    }

    fn sampler(&self) -> Result<NegativeSampler> {
        let compounds: Vec<String> = self.features.compounds.ids().map(str::to_owned).collect();
        let proteins: Vec<String> = self.features.proteins.ids().map(str::to_owned).collect();
        NegativeSampler::new(&compounds, &proteins, &self.table.pair_set())
    }
}

/// Where to capture weights: `epoch == 0` is the state before the step's
/// first epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SnapshotPoint {
    pub step: usize,
    pub epoch: usize,
}

impl SnapshotPoint {
    pub fn new(step: usize, epoch: usize) -> Self {
        Self { step, epoch }
    }

    pub fn tag(&self) -> String {
        format!("step{}_epoch{}", self.step, self.epoch)
    }
}

/// Exactly which pairs each step trained on.
#[derive(Debug, Clone, Default)]
pub struct TrainAudit {
    pub step_pairs: Vec<Vec<LabeledPair>>,
    pub validation_pairs: Vec<LabeledPair>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: DenseNetwork,
    pub log: MetricsLog,
    /// Every step's final epoch plus any requested points, in training order.
    pub snapshots: Vec<WeightSnapshot>,
    pub audit: TrainAudit,
}

impl TrainOutcome {
    pub fn snapshot(&self, tag: &str) -> Option<&WeightSnapshot> {
        self.snapshots.iter().find(|s| s.tag == tag)
    }
}

/// Mean BCE and thresholded accuracy of `net` over `pairs`.
pub fn evaluate(
    net: &DenseNetwork,
    pairs: &[LabeledPair],
    features: &FeatureContext,
) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty set".into()));
    }
    let (x, y) = features.assemble(pairs)?;
    evaluate_tensors(net, &x, &y)
}

fn evaluate_tensors(net: &DenseNetwork, x: &Tensor2, y: &[f64]) -> Result<(f64, f64)> {
    let p = net.predict(x)?;
    let (loss, _) = bce_loss(&p, y)?;
    Ok((loss, accuracy(p.data(), y, 0.5)?))
}

/// Baseline: one tier from a fresh initialization.
pub fn train_single(
    tier: TierSpec,
    epochs: usize,
    data: &DataContext,
    settings: &TrainSettings,
) -> Result<TrainOutcome> {
    let schedule = TrainSchedule {
        steps: vec![TrainStep { tier, epochs }],
        settings: settings.clone(),
    };
    train_ftl(&schedule, data)
}

pub fn train_ftl(schedule: &TrainSchedule, data: &DataContext) -> Result<TrainOutcome> {
    train_ftl_with(schedule, data, &[])
}

/// Runs the schedule: step 1 starts from a fresh network, each later step
/// continues from the previous weights (and Adam state, unless reset) on its
/// own tier plus freshly sampled 1:1 negatives.
pub fn train_ftl_with(
    schedule: &TrainSchedule,
    data: &DataContext,
    snapshot_points: &[SnapshotPoint],
) -> Result<TrainOutcome> {
    schedule.validate()?;
    let settings = &schedule.settings;
    let master = RngStream::new(settings.seed);
    let features = &data.features;

    let mut net = DenseNetwork::classifier(
        &settings.layers,
        features.feature_dim(),
        &mut master.fork(STREAM_INIT),
    )?;

    let mut sampler = data.sampler()?;
    let mut validation_pairs: Vec<LabeledPair> = tier_filter(&data.table, settings.validation_tier)
        .records()
        .iter()
        .map(LabeledPair::from)
        .collect();
    if validation_pairs.is_empty() {
        return Err(Error::Data(format!(
            "validation tier {} has no records",
            settings.validation_tier
        )));
    }
    let val_negatives = sampler.sample(
        validation_pairs.len(),
        &mut master.fork(STREAM_VALIDATION_NEGATIVES),
    )?;
    sampler.exclude(
        val_negatives
            .iter()
            .map(|p| (p.compound_id.as_str(), p.protein_id.as_str())),
    );
    validation_pairs.extend(val_negatives);
    let (val_x, val_y) = features.assemble(&validation_pairs)?;

    let mut wanted: BTreeSet<SnapshotPoint> = snapshot_points.iter().copied().collect();
    for (k, step) in schedule.steps.iter().enumerate() {
        wanted.insert(SnapshotPoint::new(k + 1, step.epochs));
    }

    let mut adam = AdamState::new(&net.param_shapes(), settings.learning_rate);
    let mut log = MetricsLog::new();
    let mut snapshots = Vec::new();
    let mut audit = TrainAudit::default();

    for (k, step) in schedule.steps.iter().enumerate() {
        let step_no = k + 1;
        let positives: Vec<LabeledPair> = tier_filter(&data.table, step.tier)
            .records()
            .iter()
            .map(LabeledPair::from)
            .collect();
        if positives.is_empty() {
            return Err(Error::Data(format!(
                "step {step_no} tier {} has no records",
                step.tier
            )));
        }
        let negatives = sampler.sample(
            positives.len(),
            &mut master.fork(STREAM_STEP_NEGATIVES + k as u64),
        )?;
        let mut pairs = positives;
        pairs.extend(negatives);
        let (x, y) = features.assemble(&pairs)?;
        audit.step_pairs.push(pairs);

        if k > 0 && settings.reset_optimizer_between_steps {
            adam = AdamState::new(&net.param_shapes(), settings.learning_rate);
        }

        let capture = |net: &DenseNetwork, epoch: usize, snapshots: &mut Vec<WeightSnapshot>| {
            let point = SnapshotPoint::new(step_no, epoch);
            if wanted.contains(&point) {
                snapshots.push(WeightSnapshot::capture(net, point.tag()));
            }
        };
        capture(&net, 0, &mut snapshots);

        let mut shuffle = master.fork(STREAM_STEP_SHUFFLE + k as u64);
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut epoch_preds = vec![0.0; x.rows()];
        let mut epoch_labels = vec![0.0; x.rows()];
        for epoch in 1..=step.epochs {
            shuffle.shuffle(&mut order);
            let mut loss_sum = 0.0;
            let mut seen = 0;
            for chunk in order.chunks(settings.batch_size) {
                let bx = x.gather_rows(chunk);
                let by: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
                let acts = net.forward(&bx)?;
                let (loss, grad) = bce_loss(acts.output(), &by)?;
                let grads = net.backward(&acts, &grad)?;
                adam.step(&mut net.params_mut(), &grads.slices())?;
                loss_sum += loss * chunk.len() as f64;
                epoch_preds[seen..seen + chunk.len()].copy_from_slice(acts.output().data());
                epoch_labels[seen..seen + chunk.len()].copy_from_slice(&by);
                seen += chunk.len();
            }
            let train_loss = loss_sum / x.rows() as f64;
            if !train_loss.is_finite() || !net.all_finite() {
                return Err(Error::Numeric(format!(
                    "training diverged at step {step_no} epoch {epoch}"
                )));
            }
            let train_acc = accuracy(&epoch_preds, &epoch_labels, 0.5)?;
            let (val_loss, val_acc) = evaluate_tensors(&net, &val_x, &val_y)?;
            log.push(MetricRecord {
                step: step_no,
                epoch,
                split: Split::Train,
                loss: train_loss,
                accuracy: train_acc,
            })?;
            log.push(MetricRecord {
                step: step_no,
                epoch,
                split: Split::Validation,
                loss: val_loss,
                accuracy: val_acc,
            })?;
            log::debug!(
                "step {step_no} epoch {epoch}: train {train_loss:.6} / {train_acc:.3}%, \
                 validation {val_loss:.6} / {val_acc:.3}%"
            );
            capture(&net, epoch, &mut snapshots);
        }
    }
    audit.validation_pairs = validation_pairs;

    Ok(TrainOutcome {
        network: net,
        log,
        snapshots,
        audit,
    })
}
