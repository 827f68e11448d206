//! Command-line driver for the cough analysis toolkit.
//!
//! Subcommands mirror the pipeline stages (`prepare`, `detect`, `segment`,
//! `featurize`, `augment`, `train`, `eval`), plus `run` for the whole
//! pipeline, `synth` for the built-in corpus, `sweep` for hyperparameter
//! tables, and `report` for histogram CSVs.
//!
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 stage failure.

use clap::{Args, Parser, Subcommand};
use coughkit::pipeline::{
    generate_synthetic_corpus, read_manifest, sweep, sweep_csv, write_report, DirFeatureStore,
    Pipeline, PipelineConfig, PipelineError, Stage, SweepDimension, SynthSpec,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "coughkit", version, about = "Cough analysis pipeline")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand; values given here override the
/// config file.
#[derive(Args)]
struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (mandatory here or in the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Input dataset manifest (CSV).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Detection keep-threshold tau in [0, 1].
    #[arg(long, global = true)]
    threshold: Option<f64>,

    /// Segmentation method: hysteresis or rms.
    #[arg(long, global = true)]
    segmenter: Option<String>,

    /// Mixup Beta parameter (0 disables mixup).
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,

    /// Decoupled weight decay.
    #[arg(long, global = true)]
    weight_decay: Option<f64>,

    /// Train fraction of the train/dev split, in (0, 1).
    #[arg(long, global = true)]
    split_fraction: Option<f64>,

    /// Detector model file (JSON).
    #[arg(long, global = true)]
    detector_model: Option<PathBuf>,

    /// External embedding file (EMB1).
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,

    /// Override any config key, e.g. --set epochs=50 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decode, resample, and peak-normalize every manifest row.
    Prepare,
    /// Score cough probability and drop rows below the threshold.
    Detect,
    /// Split recordings into per-cough rows.
    Segment,
    /// Compute and persist log-mel features.
    Featurize,
    /// Assign splits and create augmented copies of training rows.
    Augment,
    /// Train the transfer head and evaluate on the dev split.
    Train,
    /// Evaluate the trained head on one split.
    Eval {
        /// Split to evaluate: train, devel, or test.
        #[arg(long, default_value = "devel")]
        split: String,
    },
    /// Run every enabled stage in order.
    Run,
    /// Sweep one dimension over a list of values, one full run per value.
    Sweep {
        /// threshold | split_ratio | alpha | lr | weight_decay
        #[arg(long)]
        dimension: String,
        /// Comma-separated values, e.g. 0.6,0.7,0.8,0.9
        #[arg(long)]
        values: String,
    },
    /// Generate the synthetic burst-train corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        n_files: usize,
        #[arg(long, default_value_t = 2)]
        bursts_min: usize,
        #[arg(long, default_value_t = 4)]
        bursts_max: usize,
    },
    /// Emit histogram CSVs for a manifest.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = build_config(&cli.common, &cli.command)?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| PipelineError::Data(format!("cannot create out_dir: {e}")))?;

    match &cli.command {
        Command::Synth {
            n_files,
            bursts_min,
            bursts_max,
        } => {
            let spec = SynthSpec {
                n_files: *n_files,
                bursts_min: *bursts_min,
                bursts_max: *bursts_max,
                seed: cfg.seed,
                ..SynthSpec::default()
            };
            let out = generate_synthetic_corpus(&spec, &cfg.out_dir)?;
            println!(
                "wrote {} files ({} ground-truth bursts) under {}",
                out.rows.len(),
                out.ground_truth.len(),
                cfg.out_dir.display()
            );
            Ok(())
        }
        Command::Report => {
            let manifest = cfg
                .manifest
                .as_ref()
                .ok_or_else(|| PipelineError::Config("report needs --manifest".into()))?;
            let rows = read_manifest(manifest)?;
            let report_dir = cfg.out_dir.join("report");
            write_report(&rows, &report_dir)?;
            println!("report written under {}", report_dir.display());
            Ok(())
        }
        Command::Sweep { dimension, values } => {
            let dim: SweepDimension = dimension.parse().map_err(PipelineError::Config)?;
            let values: Vec<f64> = values
                .split(',')
                .filter(|v| !v.trim().is_empty())
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| PipelineError::Config(format!("bad sweep value {v:?}")))
                })
                .collect::<Result<_, _>>()?;
            let cells = sweep(&cfg, dim, &values)?;
            let csv = sweep_csv(dim, &cells);
            let path = cfg.out_dir.join(format!("sweep_{}.csv", dim.name()));
            std::fs::write(&path, &csv)
                .map_err(|e| PipelineError::Data(format!("cannot write sweep table: {e}")))?;
            print!("{csv}");
            Ok(())
        }
        Command::Run => {
            let summary = Pipeline::new(cfg).run()?;
            for (stage, count) in &summary.stage_counts {
                println!("{stage}: {count} rows");
            }
            if let Some(m) = &summary.metrics {
                println!("unweighted accuracy: {}", m.unweighted_accuracy);
            }
            Ok(())
        }
        Command::Eval { split } => {
            let split = split
                .parse()
                .map_err(|e: String| PipelineError::Config(e))?;
            let manifest = cfg
                .manifest
                .as_ref()
                .ok_or_else(|| PipelineError::Config("eval needs --manifest".into()))?;
            let rows = read_manifest(manifest)?;
            let pipeline = Pipeline::new(cfg);
            let store = DirFeatureStore::new(pipeline.features_dir());
            let metrics = pipeline.eval_stage(&rows, &store, split)?;
            println!("unweighted accuracy: {}", metrics.unweighted_accuracy);
            Ok(())
        }
        single @ (Command::Prepare
        | Command::Detect
        | Command::Segment
        | Command::Featurize
        | Command::Augment
        | Command::Train) => {
            let stage = match single {
                Command::Prepare => Stage::Prepare,
                Command::Detect => Stage::Detect,
                Command::Segment => Stage::Segment,
                Command::Featurize => Stage::Featurize,
                Command::Augment => Stage::Augment,
                _ => Stage::Train,
            };
            debug_assert!(cfg.stages.contains(&stage));
            let summary = Pipeline::new(cfg).run()?;
            for (name, count) in &summary.stage_counts {
                println!("{name}: {count} rows");
            }
            if let Some(m) = &summary.metrics {
                println!("unweighted accuracy: {}", m.unweighted_accuracy);
            }
            Ok(())
        }
    }
}

fn build_config(common: &CommonArgs, command: &Command) -> Result<PipelineConfig, PipelineError> {
    let file_text = match &common.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|e| {
            PipelineError::Config(format!("cannot read config {}: {e}", path.display()))
        })?),
        None => None,
    };

    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut push = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            overrides.push((key.to_string(), v));
        }
    };
    push("seed", common.seed.map(|v| v.to_string()));
    push(
        "manifest",
        common.manifest.as_ref().map(|p| p.display().to_string()),
    );
    push(
        "out_dir",
        common.out_dir.as_ref().map(|p| p.display().to_string()),
    );
    push("threshold", common.threshold.map(|v| v.to_string()));
    push("segmenter", common.segmenter.clone());
    push("alpha", common.alpha.map(|v| v.to_string()));
    push("lr", common.lr.map(|v| v.to_string()));
    push("weight_decay", common.weight_decay.map(|v| v.to_string()));
    push(
        "split_fraction",
        common.split_fraction.map(|v| v.to_string()),
    );
    push(
        "detector_model",
        common.detector_model.as_ref().map(|p| p.display().to_string()),
    );
    push(
        "embeddings",
        common.embeddings.as_ref().map(|p| p.display().to_string()),
    );
    for kv in &common.set {
        let (key, value) = kv.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("--set expects KEY=VALUE, got {kv:?}"))
        })?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }

    // Narrow the stage set to what the subcommand actually runs, so a
    // `prepare` invocation is not rejected for lacking a detector model.
    let stage_override = match command {
        Command::Prepare => Some("prepare"),
        Command::Detect => Some("detect"),
        Command::Segment => Some("segment"),
        Command::Featurize => Some("featurize"),
        Command::Augment => Some("augment"),
        Command::Train => Some("train"),
        Command::Eval { .. } => Some("eval"),
        Command::Synth { .. } | Command::Report => Some("prepare"),
        Command::Run | Command::Sweep { .. } => None,
    };
    if let Some(stages) = stage_override {
        overrides.push(("stages".to_string(), stages.to_string()));
    }

    PipelineConfig::from_sources(file_text.as_deref(), &overrides)
}
