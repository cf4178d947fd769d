//! Stepwise training across confidence tiers, single-tier baselines, and
//! multi-arm experiments.

mod experiment;
mod metrics;
mod trainer;

pub use experiment::{
    run_arm, run_experiment, ArmConfig, ArmReport, ArmResult, ComparisonReport, DataPaths,
    EpochOfBest, ExperimentConfig, ExperimentResult, FeatureSource, PairDelta,
};
pub use metrics::{BestMetrics, MetricRecord, MetricsLog, Split};
pub use trainer::{
    evaluate, train_ftl, train_ftl_with, train_single, DataContext, SnapshotPoint, TrainAudit,
    TrainOutcome, TrainSchedule, TrainSettings, TrainStep, DEFAULT_LAYERS,
};
