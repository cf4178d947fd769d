//! Command implementations behind the `tierflow` binary.
//!
//! Each `cmd_*` function reads one JSON config, writes its artifacts under an
//! output directory and finishes with a `manifest.json` listing checksums.

mod error;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tierflow::dataset::{BitVectorStore, SynthConfig};
use tierflow::diagnostics::{figure5_protocol, Figure5Report};
use tierflow::ftl::{run_arm, ExperimentConfig, ExperimentResult};
use tierflow::vae::{embed, train_vae, VaeConfig};
use tierflow::RngStream;

pub use error::{CliError, CliResult};
pub use manifest::{sha256_hex, OutputDir, RunManifest, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "tierflow",
    version,
    about = "Stepwise training across label-confidence tiers"
)]
pub struct Cli {
    /// JSON config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for all outputs.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Experiment arms trained concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Validate the config and print the plan without writing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic tiered dataset with its ground truth.
    Synth,
    /// Train a VAE on a bit-vector file and write its latent means.
    Embed {
        /// Bit-vector store to compress.
        #[arg(long)]
        input: PathBuf,
    },
    /// Run every arm of an experiment and compare them.
    Train,
    /// Per-layer weight drift across a 2-step transition versus same-tier training.
    Diagnose {
        /// Epochs of step 2 (and of continued step-1 training) to compare.
        #[arg(long, default_value_t = 20)]
        delta: usize,
        /// Arm to analyse; defaults to the first arm with two steps.
        #[arg(long)]
        arm: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub jobs: usize,
    pub dry_run: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: None,
            jobs: 1,
            dry_run: false,
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<Option<RunManifest>> {
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let opts = RunOptions {
        seed: cli.seed,
        jobs: cli.jobs,
        dry_run: cli.dry_run,
    };
    match &cli.command {
        Command::Synth => cmd_synth(config, &cli.out, &opts),
        Command::Embed { input } => cmd_embed(config, input, &cli.out, &opts),
        Command::Train => cmd_train(config, &cli.out, &opts),
        Command::Diagnose { delta, arm } => {
            cmd_diagnose(config, &cli.out, *delta, arm.as_deref(), &opts)
        }
    }
}

fn read_config(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn parse_config<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn resolved<T: Serialize>(config: &T) -> CliResult<String> {
    Ok(serde_json::to_string(config).map_err(tierflow::Error::from)?)
}

fn config_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Accepts a bare synth config or an experiment config with a `synth` block.
pub fn cmd_synth(
    config_path: &Path,
    out: &Path,
    opts: &RunOptions,
) -> CliResult<Option<RunManifest>> {
    let text = read_config(config_path)?;
    let value: serde_json::Value = parse_config(config_path, &text)?;
    let value = match value.get("synth") {
        Some(inner) => inner.clone(),
        None => value,
    };
    let mut config: SynthConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("{}: {e}", config_path.display())))?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    if opts.dry_run {
        println!(
            "synth: {} compounds x {} proteins, seed {}",
            config.n_compounds, config.n_proteins, config.seed
        );
        for t in config.tiers.iter().chain([&config.validation]) {
            println!(
                "  tier {}: {} positives, flip rate {}",
                t.tier, t.positives, t.flip_rate
            );
        }
        return Ok(None);
    }
    let data = tierflow::dataset::synth_generate(&config)?;
    let mut dir = OutputDir::new(out);
    dir.write("compounds.bits", data.compounds.render())?;
    dir.write("proteins.bits", data.proteins.render())?;
    dir.write("interactions.tsv", data.table.render())?;
    dir.write("ground_truth.tsv", data.oracle.render())?;
    let manifest = dir.finish("synth", config_path, &resolved(&config)?, config.seed)?;
    Ok(Some(manifest))
}

/// VAE hyperparameters plus the seed for initialization, shuffling and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub vae: VaeConfig,
}

pub fn cmd_embed(
    config_path: &Path,
    input: &Path,
    out: &Path,
    opts: &RunOptions,
) -> CliResult<Option<RunManifest>> {
    let text = read_config(config_path)?;
    let mut config: EmbedConfig = parse_config(config_path, &text)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.vae.validate()?;
    if opts.dry_run {
        let v = &config.vae;
        println!(
            "embed {}: {} -> {:?} -> {} latents, {} epochs, batch {}, lr {}, seed {}",
            input.display(),
            v.input_dim,
            v.encoder_hidden,
            v.latent_dim,
            v.epochs,
            v.batch_size,
            v.learning_rate,
            config.seed
        );
        return Ok(None);
    }
    let store = BitVectorStore::load(input)?;
    let (model, log) = train_vae(&config.vae, &store, &mut RngStream::new(config.seed))?;
    let latents = embed(&model, &store)?;
    let mut dir = OutputDir::new(out);
    dir.write("vae_checkpoint.json", model.to_checkpoint_json()?)?;
    dir.write("latents.tsv", latents.render())?;
    dir.write("vae_loss.csv", log.to_csv())?;
    let manifest = dir.finish("embed", config_path, &resolved(&config)?, config.seed)?;
    Ok(Some(manifest))
}

fn load_experiment(config_path: &Path, opts: &RunOptions) -> CliResult<ExperimentConfig> {
    let text = read_config(config_path)?;
    let mut config: ExperimentConfig = parse_config(config_path, &text)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    config.validate()?;
    if opts.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(config)
}

fn print_plan(config: &ExperimentConfig, config_path: &Path) {
    match (&config.data, &config.synth) {
        (Some(d), _) => println!(
            "data: interactions {} (relative to {})",
            d.interactions.display(),
            config_dir(config_path).display()
        ),
        (_, Some(s)) => println!(
            "data: synthetic, {} compounds x {} proteins, seed {}",
            s.n_compounds, s.n_proteins, s.seed
        ),
        _ => {}
    }
    println!(
        "seed {}, validation {}, layers {:?}, batch {}, lr {}, optimizer {}",
        config.seed,
        config.validation_tier,
        config.layers,
        config.batch_size,
        config.learning_rate,
        if config.reset_optimizer_between_steps {
            "reset per step"
        } else {
            "carried over"
        }
    );
    for arm in &config.arms {
        let steps: Vec<String> = arm
            .steps
            .iter()
            .map(|s| format!("{} x{}", s.tier, s.epochs))
            .collect();
        println!("arm {}: {}", arm.name, steps.join(" -> "));
    }
}

fn check_data_paths(config: &ExperimentConfig, config_path: &Path) -> CliResult<()> {
    use tierflow::ftl::FeatureSource;
    let Some(data) = &config.data else {
        return Ok(());
    };
    let base = config_dir(config_path);
    let source = |s: &FeatureSource| match s {
        FeatureSource::Bits(p) | FeatureSource::Latents(p) => p.clone(),
    };
    for p in [
        source(&data.compounds),
        source(&data.proteins),
        data.interactions.clone(),
    ] {
        let full = base.join(&p);
        if !full.is_file() {
            return Err(
                tierflow::Error::Data(format!("missing data file {}", full.display())).into(),
            );
        }
    }
    Ok(())
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

/// Outputs: `metrics.csv` (all arms), `metrics/<arm>.csv`, `report.json`,
/// `checkpoints/<arm>.json`.
pub fn cmd_train(
    config_path: &Path,
    out: &Path,
    opts: &RunOptions,
) -> CliResult<Option<RunManifest>> {
    let config = load_experiment(config_path, opts)?;
    check_data_paths(&config, config_path)?;
    if opts.dry_run {
        print_plan(&config, config_path);
        return Ok(None);
    }
    let data = config.load_data(config_dir(config_path))?;
    let arms = thread_pool(opts.jobs)?.install(|| {
        config
            .arms
            .par_iter()
            .map(|arm| run_arm(&config, arm, &data))
            .collect::<tierflow::Result<Vec<_>>>()
    })?;
    let result = ExperimentResult::assemble(&config, arms)?;

    let mut dir = OutputDir::new(out);
    dir.write("metrics.csv", result.metrics_csv())?;
    for arm in &result.arms {
        dir.write(
            &format!("metrics/{}.csv", arm.name),
            arm.outcome.log.to_csv(&arm.name),
        )?;
        dir.write(
            &format!("checkpoints/{}.json", arm.name),
            arm.outcome.network.to_checkpoint_json()?,
        )?;
    }
    dir.write("report.json", result.report.to_json()?)?;
    for a in &result.report.arms {
        println!(
            "{}: best validation loss {:.6} (epoch {}), accuracy {:.3}% (epoch {})",
            a.name,
            a.best_val_loss,
            a.epoch_of_best.loss,
            a.best_val_accuracy,
            a.epoch_of_best.accuracy
        );
    }
    let manifest = dir.finish("train", config_path, &resolved(&config)?, config.seed)?;
    Ok(Some(manifest))
}

pub const DIAGNOSTICS_FILE: &str = "weight_distance.csv";

pub fn cmd_diagnose(
    config_path: &Path,
    out: &Path,
    delta: usize,
    arm: Option<&str>,
    opts: &RunOptions,
) -> CliResult<Option<RunManifest>> {
    let config = load_experiment(config_path, opts)?;
    check_data_paths(&config, config_path)?;
    let chosen = match arm {
        Some(name) => config
            .arm(name)
            .ok_or_else(|| CliError::Config(format!("no arm named {name}")))?,
        None => config
            .arms
            .iter()
            .find(|a| a.steps.len() == 2)
            .ok_or_else(|| CliError::Config("no arm has exactly two steps".into()))?,
    };
    if chosen.steps.len() != 2 {
        return Err(CliError::Config(format!(
            "arm {} has {} step(s); the comparison needs two",
            chosen.name,
            chosen.steps.len()
        )));
    }
    if opts.dry_run {
        println!(
            "diagnose arm {}: {} x{} then {} x{delta}, against {} x{}",
            chosen.name,
            chosen.steps[0].tier,
            chosen.steps[0].epochs,
            chosen.steps[1].tier,
            chosen.steps[0].tier,
            chosen.steps[0].epochs + delta
        );
        return Ok(None);
    }
    let data = config.load_data(config_dir(config_path))?;
    let run = figure5_protocol(&config.schedule(chosen), &data, delta)?;
    let report: &Figure5Report = &run.report;
    let mut dir = OutputDir::new(out);
    dir.write(DIAGNOSTICS_FILE, report.to_csv())?;
    for ((f, b), fc) in report
        .ftl
        .layers
        .iter()
        .zip(&report.baseline.layers)
        .zip(&report.fold_changes)
    {
        println!(
            "layer {}: ftl {:.3e}, baseline {:.3e}, fold change {}",
            f.layer_index + 1,
            f.distance,
            b.distance,
            fc.map_or_else(
                || Figure5Report::UNDEFINED.to_string(),
                |v| format!("{v:.3}")
            )
        );
    }
    #[derive(Serialize)]
    struct Resolved<'a> {
        experiment: &'a ExperimentConfig,
        arm: &'a str,
        delta: usize,
    }
    let resolved_config = resolved(&Resolved {
        experiment: &config,
        arm: &chosen.name,
        delta,
    })?;
    let manifest = dir.finish("diagnose", config_path, &resolved_config, config.seed)?;
    Ok(Some(manifest))
}
