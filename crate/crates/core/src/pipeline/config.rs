//! Pipeline configuration.
//!
//! Flat `key=value` text files ('#' starts a comment); every key is also a
//! CLI flag, and CLI values win on conflict. `seed` is mandatory. The full
//! key list lives in the repository format reference.

use super::manifest::SplitTag;
use super::PipelineError;
use crate::augment::{AugmentConfig, MaskFill};
use crate::segment::{SegmentMethod, SegmenterConfig};
use crate::train::{MixupMode, TrainConfig};
use std::collections::BTreeSet;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Prepare,
    Detect,
    Segment,
    Featurize,
    Augment,
    Train,
    Eval,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Detect => "detect",
            Stage::Segment => "segment",
            Stage::Featurize => "featurize",
            Stage::Augment => "augment",
            Stage::Train => "train",
            Stage::Eval => "eval",
        }
    }

    pub fn all() -> [Stage; 7] {
        [
            Stage::Prepare,
            Stage::Detect,
            Stage::Segment,
            Stage::Featurize,
            Stage::Augment,
            Stage::Train,
            Stage::Eval,
        ]
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::all()
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub stages: BTreeSet<Stage>,
    /// Run segmentation before detection (the default follows the
    /// detection -> segmentation block order).
    pub segment_first: bool,
    pub target_rate: u32,
    pub detector_model: Option<PathBuf>,
    /// Detection keep-threshold tau.
    pub threshold: f64,
    pub segmenter: SegmenterConfig,
    pub spec_augment: bool,
    pub noise_add: bool,
    /// Manifest listing the noise corpus WAV files.
    pub noise_manifest: Option<PathBuf>,
    pub augment: AugmentConfig,
    /// Mixup weight parameter; 0 disables mixup during training.
    pub alpha: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub split_fraction: f64,
    /// External embedding file; the built-in pooled embedder runs otherwise.
    pub embeddings: Option<PathBuf>,
    pub eval_split: SplitTag,
}

impl PipelineConfig {
    /// Defaults for everything except the mandatory seed.
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            seed,
            manifest: None,
            out_dir: PathBuf::from("out"),
            stages: Stage::all().into_iter().collect(),
            segment_first: false,
            target_rate: crate::audio::CANONICAL_SAMPLE_RATE,
            detector_model: None,
            threshold: 0.9,
            segmenter: SegmenterConfig::default(),
            spec_augment: true,
            noise_add: false,
            noise_manifest: None,
            augment: AugmentConfig {
                seed,
                ..AugmentConfig::default()
            },
            alpha: 0.5,
            lr: 0.001,
            weight_decay: 0.01,
            batch_size: 16,
            epochs: 100,
            split_fraction: 0.85,
            embeddings: None,
            eval_split: SplitTag::Devel,
        }
    }

    /// Build from optional config-file text plus override pairs (CLI wins).
    pub fn from_sources(
        file_text: Option<&str>,
        overrides: &[(String, String)],
    ) -> Result<Self, PipelineError> {
        let mut pairs = Vec::new();
        if let Some(text) = file_text {
            pairs.extend(parse_key_values(text)?);
        }
        pairs.extend(overrides.iter().cloned());

        let seed = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "seed")
            .ok_or_else(|| PipelineError::Config("missing mandatory key 'seed'".into()))?;
        let seed: u64 = seed
            .1
            .parse()
            .map_err(|_| PipelineError::Config(format!("bad seed {:?}", seed.1)))?;

        let mut cfg = PipelineConfig::with_seed(seed);
        for (key, value) in &pairs {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            epochs: self.epochs,
            mixup_alpha: self.alpha,
            mixup: if self.alpha <= 0.0 {
                MixupMode::Disabled
            } else if self.embeddings.is_some() {
                MixupMode::Embedding
            } else {
                MixupMode::LogMel
            },
            seed: self.seed,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad = |what: &str| PipelineError::Config(format!("bad value {value:?} for {what}"));
        match key {
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "stages" => {
                let mut set = BTreeSet::new();
                for part in value.split(',').filter(|p| !p.trim().is_empty()) {
                    set.insert(
                        part.trim()
                            .parse::<Stage>()
                            .map_err(PipelineError::Config)?,
                    );
                }
                self.stages = set;
            }
            "segment_first" => self.segment_first = parse_bool(value).ok_or_else(|| bad(key))?,
            "target_rate" => self.target_rate = value.parse().map_err(|_| bad(key))?,
            "detector_model" => self.detector_model = Some(PathBuf::from(value)),
            "threshold" => self.threshold = value.parse().map_err(|_| bad(key))?,
            "segmenter" => {
                self.segmenter.method = value.parse::<SegmentMethod>().map_err(PipelineError::Config)?
            }
            "seg_frame_len" => self.segmenter.frame_len = value.parse().map_err(|_| bad(key))?,
            "seg_hop" => self.segmenter.hop = value.parse().map_err(|_| bad(key))?,
            "seg_upper_ratio" => self.segmenter.upper_ratio = value.parse().map_err(|_| bad(key))?,
            "seg_lower_ratio" => self.segmenter.lower_ratio = value.parse().map_err(|_| bad(key))?,
            "seg_rms_threshold" => {
                self.segmenter.rms_threshold = value.parse().map_err(|_| bad(key))?
            }
            "seg_min_duration_ms" => {
                self.segmenter.min_duration_ms = value.parse().map_err(|_| bad(key))?
            }
            "seg_merge_gap_ms" => {
                self.segmenter.merge_gap_ms = value.parse().map_err(|_| bad(key))?
            }
            "seg_pad_ms" => self.segmenter.pad_ms = value.parse().map_err(|_| bad(key))?,
            "spec_augment" => self.spec_augment = parse_bool(value).ok_or_else(|| bad(key))?,
            "noise_add" => self.noise_add = parse_bool(value).ok_or_else(|| bad(key))?,
            "noise_manifest" => self.noise_manifest = Some(PathBuf::from(value)),
            "n_freq_masks" => self.augment.n_freq_masks = value.parse().map_err(|_| bad(key))?,
            "max_freq_width" => self.augment.max_freq_width = value.parse().map_err(|_| bad(key))?,
            "n_time_masks" => self.augment.n_time_masks = value.parse().map_err(|_| bad(key))?,
            "max_time_frac" => self.augment.max_time_frac = value.parse().map_err(|_| bad(key))?,
            "snr_min_db" => self.augment.snr_min_db = value.parse().map_err(|_| bad(key))?,
            "snr_max_db" => self.augment.snr_max_db = value.parse().map_err(|_| bad(key))?,
            "mask_fill" => {
                self.augment.mask_fill = if value == "mean" {
                    MaskFill::Mean
                } else {
                    MaskFill::Value(value.parse().map_err(|_| bad(key))?)
                }
            }
            "alpha" => {
                self.alpha = value.parse().map_err(|_| bad(key))?;
                self.augment.alpha = self.alpha.max(f64::MIN_POSITIVE);
            }
            "lr" => self.lr = value.parse().map_err(|_| bad(key))?,
            "weight_decay" => self.weight_decay = value.parse().map_err(|_| bad(key))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key))?,
            "split_fraction" => self.split_fraction = value.parse().map_err(|_| bad(key))?,
            "embeddings" => self.embeddings = Some(PathBuf::from(value)),
            "eval_split" => {
                self.eval_split = value.parse::<SplitTag>().map_err(PipelineError::Config)?
            }
            other => {
                return Err(PipelineError::Config(format!("unknown config key {other:?}")))
            }
        }
        self.augment.seed = self.seed;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(PipelineError::Config(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(PipelineError::Config(format!(
                "split_fraction {} outside (0, 1)",
                self.split_fraction
            )));
        }
        if self.alpha < 0.0 {
            return Err(PipelineError::Config(format!("alpha {} < 0", self.alpha)));
        }
        if self.target_rate == 0 {
            return Err(PipelineError::Config("target_rate must be > 0".into()));
        }
        if self.stages.contains(&Stage::Detect) && self.detector_model.is_none() {
            return Err(PipelineError::Config(
                "detect stage enabled but no detector_model given".into(),
            ));
        }
        if self.noise_add && self.noise_manifest.is_none() {
            return Err(PipelineError::Config(
                "noise_add enabled but no noise_manifest given".into(),
            ));
        }
        for (path, what) in [
            (&self.manifest, "manifest"),
            (&self.detector_model, "detector_model"),
            (&self.noise_manifest, "noise_manifest"),
            (&self.embeddings, "embeddings"),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(PipelineError::Config(format!(
                        "{what} path {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parse `key=value` lines; blank lines and '#' comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, PipelineError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1))
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}
