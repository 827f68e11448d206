//! Stage implementations and the end-to-end driver.
//!
//! Stage order: prepare -> detect -> segment -> featurize -> augment ->
//! train -> eval (detect/segment swappable via `segment_first`). Every stage
//! rewrites the manifest under the output directory, so a run leaves a full
//! provenance trail. Split assignment happens once, before augmentation, and
//! augmented rows inherit their parent's split so no augmented copy of a
//! training item can leak into the dev set.

use super::config::{PipelineConfig, Stage};
use super::manifest::{read_manifest, write_manifest, ManifestLabel, ManifestRow, SplitTag};
use super::PipelineError;
use crate::audio::{decode_wav, encode_wav, peak_normalize, resample, BitDepth, Waveform};
use crate::augment::{add_noise, spec_augment};
use crate::detect::{
    extract_detection_features, parse_model, predict_cough_probability, TreeEnsembleModel,
};
use crate::dsp::{log_compress, mel_spectrogram, read_lmel, write_lmel, LogMelSpectrogram, LOG_REF};
use crate::rng::item_rng;
use crate::segment::segment as run_segmenter;
use crate::segment::extract_segment;
use crate::train::{
    embed_pooled, predict, split_train_dev, train, unweighted_accuracy, EmbeddingSet,
    EmbeddingVector, Label, LabeledLogMel, LinearHead, MetricsReport, SplitKey, TrainOutcome,
    TrainingData,
};
use rand::Rng;
use rayon::prelude::*;
use std::fs;
use std::path::{Path, PathBuf};

/// Source of per-item log-mel features during training and evaluation.
///
/// Tests wrap this to observe exactly which items a stage reads.
pub trait FeatureStore: Sync {
    fn log_mel(&self, id: &str) -> Result<LogMelSpectrogram, PipelineError>;
}

/// Store reading `<dir>/<id>.lmel`.
pub struct DirFeatureStore {
    dir: PathBuf,
}

impl DirFeatureStore {
    pub fn new(dir: PathBuf) -> Self {
        DirFeatureStore { dir }
    }

    pub fn path_for(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.lmel"))
    }
}

impl FeatureStore for DirFeatureStore {
    fn log_mel(&self, id: &str) -> Result<LogMelSpectrogram, PipelineError> {
        let path = self.path_for(id);
        let file = fs::File::open(&path).map_err(|e| {
            PipelineError::Data(format!("missing features for {id:?} at {}: {e}", path.display()))
        })?;
        read_lmel(std::io::BufReader::new(file))
            .map_err(|e| PipelineError::Data(format!("bad feature file for {id:?}: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<ManifestRow>,
    pub metrics: Option<MetricsReport>,
    /// (stage name, manifest row count after the stage)
    pub stage_counts: Vec<(String, usize)>,
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        Pipeline { cfg }
    }

    pub fn features_dir(&self) -> PathBuf {
        self.cfg.out_dir.join("features")
    }

    pub fn head_path(&self) -> PathBuf {
        self.cfg.out_dir.join("head.json")
    }

    fn stage_order(&self) -> Vec<Stage> {
        if self.cfg.segment_first {
            vec![
                Stage::Prepare,
                Stage::Segment,
                Stage::Detect,
                Stage::Featurize,
                Stage::Augment,
                Stage::Train,
                Stage::Eval,
            ]
        } else {
            Stage::all().to_vec()
        }
    }

    /// Execute the enabled stages over the configured manifest.
    pub fn run(&self) -> Result<RunSummary, PipelineError> {
        let manifest_path = self
            .cfg
            .manifest
            .as_ref()
            .ok_or_else(|| PipelineError::Config("no manifest configured".into()))?;
        let mut rows = read_manifest(manifest_path)?;
        let store = DirFeatureStore::new(self.features_dir());
        let mut metrics = None;
        let mut stage_counts = vec![("input".to_string(), rows.len())];

        for stage in self.stage_order() {
            if !self.cfg.stages.contains(&stage) {
                continue;
            }
            let result = match stage {
                Stage::Prepare => self.prepare(&rows),
                Stage::Detect => self.detect(&rows),
                Stage::Segment => self.segment(&rows),
                Stage::Featurize => self.featurize(&rows),
                Stage::Augment => self.augment(&rows, &store),
                Stage::Train => self.train_stage(&rows, &store).map(|(rows, outcome)| {
                    metrics = Some(outcome.1);
                    let _ = outcome.0;
                    rows
                }),
                Stage::Eval => self
                    .eval_stage(&rows, &store, self.cfg.eval_split)
                    .map(|m| {
                        metrics = Some(m);
                        rows.clone()
                    }),
            };
            rows = result.map_err(|e| e.in_stage(stage.name()))?;
            write_manifest(
                &self.cfg.out_dir.join(format!("manifest_{}.csv", stage.name())),
                &rows,
            )?;
            stage_counts.push((stage.name().to_string(), rows.len()));
        }

        Ok(RunSummary {
            rows,
            metrics,
            stage_counts,
        })
    }

    /// Decode, resample to the canonical rate, peak-normalize, rewrite.
    pub fn prepare(&self, rows: &[ManifestRow]) -> Result<Vec<ManifestRow>, PipelineError> {
        let dir = self.cfg.out_dir.join("prepared");
        fs::create_dir_all(&dir)
            .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", dir.display())))?;
        rows.par_iter()
            .map(|row| {
                let w = load_waveform(&row.path, &row.id)?;
                let w = resample(&w, self.cfg.target_rate);
                let w = peak_normalize(w).waveform;
                let path = dir.join(format!("{}.wav", row.id));
                fs::write(&path, encode_wav(&w, BitDepth::Float32)).map_err(|e| {
                    PipelineError::Data(format!("cannot write {}: {e}", path.display()))
                })?;
                let mut row = row.clone();
                row.path = path.to_string_lossy().into_owned();
                Ok(row)
            })
            .collect()
    }

    /// Score cough probability per row and keep rows at or above tau.
    pub fn detect(&self, rows: &[ManifestRow]) -> Result<Vec<ManifestRow>, PipelineError> {
        let model_path = self
            .cfg
            .detector_model
            .as_ref()
            .ok_or_else(|| PipelineError::Config("detect stage needs detector_model".into()))?;
        let text = fs::read_to_string(model_path)
            .map_err(|e| PipelineError::Data(format!("cannot read detector model: {e}")))?;
        let model: TreeEnsembleModel =
            parse_model(&text).map_err(|e| PipelineError::Data(format!("bad detector model: {e}")))?;

        let scored: Vec<ManifestRow> = rows
            .par_iter()
            .map(|row| {
                let w = load_waveform(&row.path, &row.id)?;
                let features = extract_detection_features(&w)
                    .map_err(|e| PipelineError::Data(format!("features for {:?}: {e}", row.id)))?;
                let result = predict_cough_probability(&model, &features, &row.id);
                let mut row = row.clone();
                row.detection_prob = Some(result.probability);
                Ok(row)
            })
            .collect::<Result<_, PipelineError>>()?;
        Ok(scored
            .into_iter()
            .filter(|r| r.detection_prob.unwrap_or(0.0) >= self.cfg.threshold)
            .collect())
    }

    /// Split each recording into per-cough rows.
    pub fn segment(&self, rows: &[ManifestRow]) -> Result<Vec<ManifestRow>, PipelineError> {
        let dir = self.cfg.out_dir.join("segments");
        fs::create_dir_all(&dir)
            .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", dir.display())))?;
        let nested: Vec<Vec<ManifestRow>> = rows
            .par_iter()
            .map(|row| {
                let w = load_waveform(&row.path, &row.id)?;
                let bounds = run_segmenter(&w, &self.cfg.segmenter)
                    .map_err(|e| PipelineError::Data(format!("segmenting {:?}: {e}", row.id)))?;
                let mut out = Vec::with_capacity(bounds.len());
                for b in &bounds {
                    let piece = extract_segment(&w, b)
                        .map_err(|e| PipelineError::Data(format!("slicing {:?}: {e}", row.id)))?;
                    let path = dir.join(format!("{}.wav", piece.source_id));
                    fs::write(&path, encode_wav(&piece, BitDepth::Float32)).map_err(|e| {
                        PipelineError::Data(format!("cannot write {}: {e}", path.display()))
                    })?;
                    out.push(ManifestRow {
                        id: piece.source_id.clone(),
                        path: path.to_string_lossy().into_owned(),
                        label: row.label,
                        source: row.source.clone(),
                        split: row.split,
                        parent_id: Some(row.id.clone()),
                        detection_prob: row.detection_prob,
                        segment_index: Some(b.index),
                    });
                }
                Ok(out)
            })
            .collect::<Result<_, PipelineError>>()?;
        Ok(nested.into_iter().flatten().collect())
    }

    /// Compute and persist the log-mel features of every row.
    pub fn featurize(&self, rows: &[ManifestRow]) -> Result<Vec<ManifestRow>, PipelineError> {
        let dir = self.features_dir();
        fs::create_dir_all(&dir)
            .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", dir.display())))?;
        rows.par_iter()
            .map(|row| {
                let w = load_waveform(&row.path, &row.id)?;
                let lmel = compute_log_mel(&w, &row.id)?;
                write_feature(&dir, &row.id, &lmel)?;
                Ok(row.clone())
            })
            .collect()
    }

    /// Assign splits if needed, then create augmented copies of train rows.
    pub fn augment(
        &self,
        rows: &[ManifestRow],
        store: &dyn FeatureStore,
    ) -> Result<Vec<ManifestRow>, PipelineError> {
        let mut rows = rows.to_vec();
        self.assign_splits(&mut rows)?;
        if !self.cfg.spec_augment && !self.cfg.noise_add {
            return Ok(rows);
        }

        let features_dir = self.features_dir();
        let noise_bank = if self.cfg.noise_add {
            Some(self.load_noise_bank()?)
        } else {
            None
        };
        let noise_dir = self.cfg.out_dir.join("augmented");
        if self.cfg.noise_add {
            fs::create_dir_all(&noise_dir)
                .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", noise_dir.display())))?;
        }

        let train_rows: Vec<&ManifestRow> = rows
            .iter()
            .filter(|r| r.split == SplitTag::Train && r.label != ManifestLabel::Unknown)
            .collect();
        let augmented: Vec<Vec<ManifestRow>> = train_rows
            .par_iter()
            .map(|row| {
                let mut out = Vec::new();
                if self.cfg.spec_augment {
                    let lmel = store.log_mel(&row.id)?;
                    let mut rng = item_rng(self.cfg.seed, &format!("{}/specaugment", row.id));
                    let (masked, _masks) = spec_augment(&lmel, &self.cfg.augment, &mut rng)
                        .map_err(|e| {
                            PipelineError::Stage {
                                stage: "augment".into(),
                                message: format!("spec_augment on {:?}: {e}", row.id),
                            }
                        })?;
                    let id = format!("{}__sa", row.id);
                    write_feature(&features_dir, &id, &masked)?;
                    out.push(ManifestRow {
                        id: id.clone(),
                        path: features_dir
                            .join(format!("{id}.lmel"))
                            .to_string_lossy()
                            .into_owned(),
                        label: row.label,
                        source: row.source.clone(),
                        split: SplitTag::Train,
                        parent_id: Some(row.id.clone()),
                        detection_prob: row.detection_prob,
                        segment_index: row.segment_index,
                    });
                }
                if let Some(bank) = &noise_bank {
                    let clean = load_waveform(&row.path, &row.id)?;
                    let mut rng = item_rng(self.cfg.seed, &format!("{}/noise", row.id));
                    let noise = &bank[rng.random_range(0..bank.len())];
                    let snr =
                        rng.random_range(self.cfg.augment.snr_min_db..=self.cfg.augment.snr_max_db);
                    let noisy = add_noise(&clean, noise, snr, &mut rng).map_err(|e| {
                        PipelineError::Stage {
                            stage: "augment".into(),
                            message: format!("noise on {:?}: {e}", row.id),
                        }
                    })?;
                    let id = format!("{}__nz", row.id);
                    let path = noise_dir.join(format!("{id}.wav"));
                    fs::write(&path, encode_wav(&noisy, BitDepth::Float32)).map_err(|e| {
                        PipelineError::Data(format!("cannot write {}: {e}", path.display()))
                    })?;
                    let lmel = compute_log_mel(&noisy, &id)?;
                    write_feature(&features_dir, &id, &lmel)?;
                    out.push(ManifestRow {
                        id,
                        path: path.to_string_lossy().into_owned(),
                        label: row.label,
                        source: row.source.clone(),
                        split: SplitTag::Train,
                        parent_id: Some(row.id.clone()),
                        detection_prob: row.detection_prob,
                        segment_index: row.segment_index,
                    });
                }
                Ok(out)
            })
            .collect::<Result<_, PipelineError>>()?;
        rows.extend(augmented.into_iter().flatten());
        Ok(rows)
    }

    /// Fit the transfer head on train rows and evaluate on dev rows.
    ///
    /// Writes `head.json`, `loss_history.csv`, `metrics.csv`, and
    /// `summary.txt` under the output directory.
    pub fn train_stage(
        &self,
        rows: &[ManifestRow],
        store: &dyn FeatureStore,
    ) -> Result<(Vec<ManifestRow>, (TrainOutcome, MetricsReport)), PipelineError> {
        let mut rows = rows.to_vec();
        self.assign_splits(&mut rows)?;

        let train_items: Vec<(&str, Label)> = labeled_rows(&rows, SplitTag::Train);
        if train_items.is_empty() {
            return Err(PipelineError::Data("no labeled training rows".into()));
        }
        let external = self.load_external_embeddings()?;
        let data = match &external {
            Some(set) => {
                let mut items = Vec::with_capacity(train_items.len());
                for (id, label) in &train_items {
                    let values = set
                        .get(id)
                        .ok_or_else(|| {
                            PipelineError::Data(format!("no external embedding for {id:?}"))
                        })?
                        .clone();
                    items.push((
                        EmbeddingVector {
                            values,
                            source_id: (*id).to_string(),
                        },
                        *label,
                    ));
                }
                TrainingData::Embeddings(items)
            }
            None => {
                let mut items = Vec::with_capacity(train_items.len());
                for (id, label) in &train_items {
                    items.push(LabeledLogMel {
                        log_mel: store.log_mel(id)?,
                        label: *label,
                        id: (*id).to_string(),
                    });
                }
                TrainingData::LogMels(items)
            }
        };

        let outcome = train(&data, &self.cfg.train_config()).map_err(|e| PipelineError::Stage {
            stage: "train".into(),
            message: e.to_string(),
        })?;

        let head_json = serde_json::to_string_pretty(&outcome.head)
            .map_err(|e| PipelineError::Stage {
                stage: "train".into(),
                message: format!("cannot serialize head: {e}"),
            })?;
        fs::write(self.head_path(), head_json)
            .map_err(|e| PipelineError::Data(format!("cannot write head.json: {e}")))?;
        let mut history = String::from("epoch,loss\n");
        for (i, loss) in outcome.loss_history.iter().enumerate() {
            history.push_str(&format!("{i},{loss}\n"));
        }
        fs::write(self.cfg.out_dir.join("loss_history.csv"), history)
            .map_err(|e| PipelineError::Data(format!("cannot write loss history: {e}")))?;

        let metrics = self.evaluate(&rows, store, external.as_ref(), &outcome.head, SplitTag::Devel)?;
        self.write_metrics(&self.cfg.out_dir.join("metrics.csv"), &metrics)?;
        self.write_summary(&metrics)?;
        Ok((rows, (outcome, metrics)))
    }

    /// Evaluate the persisted head on one split.
    pub fn eval_stage(
        &self,
        rows: &[ManifestRow],
        store: &dyn FeatureStore,
        split: SplitTag,
    ) -> Result<MetricsReport, PipelineError> {
        let head_json = fs::read_to_string(self.head_path()).map_err(|e| {
            PipelineError::Data(format!("cannot read head.json (run train first): {e}"))
        })?;
        let head: LinearHead = serde_json::from_str(&head_json)
            .map_err(|e| PipelineError::Data(format!("bad head.json: {e}")))?;
        let external = self.load_external_embeddings()?;
        let metrics = self.evaluate(rows, store, external.as_ref(), &head, split)?;
        self.write_metrics(
            &self.cfg.out_dir.join(format!("metrics_{}.csv", split.name())),
            &metrics,
        )?;
        Ok(metrics)
    }

    fn evaluate(
        &self,
        rows: &[ManifestRow],
        store: &dyn FeatureStore,
        external: Option<&EmbeddingSet>,
        head: &LinearHead,
        split: SplitTag,
    ) -> Result<MetricsReport, PipelineError> {
        let items = labeled_rows(rows, split);
        if items.is_empty() {
            return Err(PipelineError::Data(format!(
                "no labeled rows in split {:?}",
                split.name()
            )));
        }
        let mut preds = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for (id, label) in items {
            let embedding = match external {
                Some(set) => set
                    .get(id)
                    .ok_or_else(|| PipelineError::Data(format!("no external embedding for {id:?}")))?
                    .clone(),
                None => {
                    let lmel = store.log_mel(id)?;
                    embed_pooled(&lmel, id)
                        .map_err(|e| PipelineError::Stage {
                            stage: "eval".into(),
                            message: format!("embedding {id:?}: {e}"),
                        })?
                        .values
                }
            };
            preds.push(predict(head, &embedding).map_err(|e| PipelineError::Stage {
                stage: "eval".into(),
                message: format!("predicting {id:?}: {e}"),
            })?);
            labels.push(label);
        }
        unweighted_accuracy(&preds, &labels).map_err(|e| PipelineError::Stage {
            stage: "eval".into(),
            message: e.to_string(),
        })
    }

    /// Assign train/devel to unassigned labeled rows, stratified by
    /// (label, source). Test rows are never touched.
    fn assign_splits(&self, rows: &mut [ManifestRow]) -> Result<(), PipelineError> {
        let keys: Vec<SplitKey> = rows
            .iter()
            .filter(|r| r.split == SplitTag::Unassigned)
            .filter_map(|r| {
                r.label.as_label().map(|label| SplitKey {
                    id: r.id.clone(),
                    label,
                    source: r.source.clone(),
                })
            })
            .collect();
        if keys.is_empty() {
            return Ok(());
        }
        let result = split_train_dev(&keys, self.cfg.split_fraction, self.cfg.seed)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let train: std::collections::HashSet<&String> = result.train.iter().collect();
        let dev: std::collections::HashSet<&String> = result.dev.iter().collect();
        for row in rows.iter_mut() {
            if row.split == SplitTag::Unassigned {
                if train.contains(&row.id) {
                    row.split = SplitTag::Train;
                } else if dev.contains(&row.id) {
                    row.split = SplitTag::Devel;
                }
            }
        }
        Ok(())
    }

    fn load_external_embeddings(&self) -> Result<Option<EmbeddingSet>, PipelineError> {
        match &self.cfg.embeddings {
            None => Ok(None),
            Some(path) => {
                let file = fs::File::open(path)
                    .map_err(|e| PipelineError::Data(format!("cannot open embeddings: {e}")))?;
                EmbeddingSet::read(std::io::BufReader::new(file))
                    .map(Some)
                    .map_err(|e| PipelineError::Data(format!("bad embedding file: {e}")))
            }
        }
    }

    fn load_noise_bank(&self) -> Result<Vec<Waveform>, PipelineError> {
        let manifest = self
            .cfg
            .noise_manifest
            .as_ref()
            .ok_or_else(|| PipelineError::Config("noise_add needs noise_manifest".into()))?;
        let rows = read_manifest(manifest)?;
        if rows.is_empty() {
            return Err(PipelineError::Data("noise manifest is empty".into()));
        }
        rows.iter()
            .map(|row| {
                let w = load_waveform(&row.path, &row.id)?;
                Ok(resample(&w, self.cfg.target_rate))
            })
            .collect()
    }

    fn write_metrics(&self, path: &Path, m: &MetricsReport) -> Result<(), PipelineError> {
        let text = format!(
            "metric,value\n\
             unweighted_accuracy,{}\n\
             accuracy,{}\n\
             recall_positive,{}\n\
             recall_negative,{}\n\
             true_positive,{}\n\
             false_positive,{}\n\
             true_negative,{}\n\
             false_negative,{}\n",
            m.unweighted_accuracy,
            m.accuracy,
            m.recall_positive,
            m.recall_negative,
            m.true_positive,
            m.false_positive,
            m.true_negative,
            m.false_negative,
        );
        fs::write(path, text)
            .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))
    }

    fn write_summary(&self, m: &MetricsReport) -> Result<(), PipelineError> {
        let mut augmentations = Vec::new();
        if self.cfg.alpha > 0.0 {
            augmentations.push("mixup");
        }
        if self.cfg.spec_augment {
            augmentations.push("specaugment");
        }
        if self.cfg.noise_add {
            augmentations.push("noise");
        }
        let feature = match &self.cfg.embeddings {
            Some(_) => "external-embedding".to_string(),
            None => "log-mel-pooled".to_string(),
        };
        let text = format!(
            "augmentation,feature,classifier,ua\n{},{},linear-sigmoid-adamw,{}\n",
            if augmentations.is_empty() {
                "none".to_string()
            } else {
                augmentations.join("+")
            },
            feature,
            m.unweighted_accuracy,
        );
        fs::write(self.cfg.out_dir.join("summary.txt"), text)
            .map_err(|e| PipelineError::Data(format!("cannot write summary: {e}")))
    }
}

fn labeled_rows(rows: &[ManifestRow], split: SplitTag) -> Vec<(&str, Label)> {
    rows.iter()
        .filter(|r| r.split == split)
        .filter_map(|r| r.label.as_label().map(|l| (r.id.as_str(), l)))
        .collect()
}

pub(crate) fn load_waveform(path: &str, id: &str) -> Result<Waveform, PipelineError> {
    let bytes = fs::read(path)
        .map_err(|e| PipelineError::Data(format!("cannot read {path:?} for {id:?}: {e}")))?;
    let mut w = decode_wav(&bytes)
        .map_err(|e| PipelineError::Data(format!("cannot decode {path:?} for {id:?}: {e}")))?;
    w.source_id = id.to_string();
    Ok(w)
}

fn compute_log_mel(w: &Waveform, id: &str) -> Result<LogMelSpectrogram, PipelineError> {
    let mel = mel_spectrogram(w).map_err(|e| PipelineError::Stage {
        stage: "featurize".into(),
        message: format!("mel spectrogram of {id:?}: {e}"),
    })?;
    log_compress(&mel, LOG_REF).map_err(|e| PipelineError::Stage {
        stage: "featurize".into(),
        message: format!("log compression of {id:?}: {e}"),
    })
}

fn write_feature(dir: &Path, id: &str, lmel: &LogMelSpectrogram) -> Result<(), PipelineError> {
    let path = dir.join(format!("{id}.lmel"));
    let file = fs::File::create(&path)
        .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", path.display())))?;
    write_lmel(lmel, std::io::BufWriter::new(file))
        .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))
}
