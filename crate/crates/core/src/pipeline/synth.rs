//! Synthetic desk-scale corpus: burst trains with known boundaries and a
//! label-correlated spectral tilt.
//!
//! Each file holds a few noise bursts over a quiet floor. Positive-class
//! bursts are high-frequency emphasized, negative-class bursts low-passed,
//! so pooled log-mel embeddings separate the classes and an end-to-end
//! training run can succeed. Ground-truth burst boundaries are emitted next
//! to the audio for segmentation scoring.

use super::manifest::{ManifestLabel, ManifestRow, SplitTag};
use super::PipelineError;
use crate::audio::{encode_wav, BitDepth, Waveform};
use crate::rng::item_rng;
use crate::segment::SegmentBounds;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_files: usize,
    pub bursts_min: usize,
    pub bursts_max: usize,
    /// Burst sustain duration range, ms.
    pub burst_ms: (f64, f64),
    /// Gap range between bursts, ms.
    pub gap_ms: (f64, f64),
    /// Silence-floor padding before the first and after the last burst, ms.
    pub lead_ms: f64,
    /// Exponential decay tail appended to each burst, ms.
    pub tail_ms: f64,
    /// Burst amplitude range (peak-ish; bursts are RMS-calibrated below it).
    pub amp_range: (f64, f64),
    pub noise_floor: f64,
    /// Spectral tilt strength in (0, 1): filter coefficient of the
    /// class-conditional emphasis.
    pub tilt: f64,
    /// Fraction of files marked as the held-out test split.
    pub test_fraction: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_files: 200,
            bursts_min: 2,
            bursts_max: 4,
            burst_ms: (280.0, 380.0),
            gap_ms: (1400.0, 2000.0),
            lead_ms: 500.0,
            tail_ms: 120.0,
            amp_range: (0.9, 1.0),
            noise_floor: 0.008,
            tilt: 0.7,
            test_fraction: 0.1,
            sample_rate: 16_000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<(), PipelineError> {
        let ok = self.n_files > 0
            && self.bursts_min >= 1
            && self.bursts_min <= self.bursts_max
            && self.burst_ms.0 > 0.0
            && self.burst_ms.0 <= self.burst_ms.1
            && self.gap_ms.0 > 0.0
            && self.gap_ms.0 <= self.gap_ms.1
            && self.amp_range.0 > 0.0
            && self.amp_range.0 <= self.amp_range.1
            && self.amp_range.1 <= 1.0
            && (0.0..1.0).contains(&self.tilt)
            && (0.0..1.0).contains(&self.test_fraction)
            && self.sample_rate > 0;
        if ok {
            Ok(())
        } else {
            Err(PipelineError::Config("invalid synthetic corpus spec".into()))
        }
    }
}

/// One true burst location, `[start, end)` in samples (sustain plus tail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSegment {
    pub id: String,
    pub burst_index: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub rows: Vec<ManifestRow>,
    pub ground_truth: Vec<GroundTruthSegment>,
}

/// Generate the corpus under `out_dir`: `audio/*.wav`, `manifest.csv`,
/// and `ground_truth.csv`. Fully determined by the spec (including seed).
pub fn generate_synthetic_corpus(
    spec: &SynthSpec,
    out_dir: &Path,
) -> Result<SynthOutput, PipelineError> {
    spec.validate()?;
    let audio_dir = out_dir.join("audio");
    std::fs::create_dir_all(&audio_dir)
        .map_err(|e| PipelineError::Data(format!("cannot create {}: {e}", audio_dir.display())))?;

    let mut rows = Vec::with_capacity(spec.n_files);
    let mut ground_truth = Vec::new();
    // Test files are reserved in adjacent pairs so the held-out split covers
    // both of the alternating labels.
    let test_block = if spec.test_fraction > 0.0 {
        ((2.0 / spec.test_fraction).round() as usize).max(2)
    } else {
        usize::MAX
    };

    for i in 0..spec.n_files {
        let id = format!("synth_{i:04}");
        let label = if i % 2 == 0 {
            ManifestLabel::Negative
        } else {
            ManifestLabel::Positive
        };
        let (waveform, bursts) = synth_file(spec, &id, label);
        for (burst_index, b) in bursts.iter().enumerate() {
            ground_truth.push(GroundTruthSegment {
                id: id.clone(),
                burst_index,
                start: b.start,
                end: b.end,
            });
        }
        let path = audio_dir.join(format!("{id}.wav"));
        std::fs::write(&path, encode_wav(&waveform, BitDepth::Float32))
            .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))?;

        let mut row = ManifestRow::new(&id, path.to_string_lossy(), label, "synth");
        if test_block != usize::MAX && i % test_block >= test_block - 2 {
            row.split = SplitTag::Test;
        }
        rows.push(row);
    }

    super::manifest::write_manifest(&out_dir.join("manifest.csv"), &rows)?;
    write_ground_truth(&out_dir.join("ground_truth.csv"), &ground_truth)?;
    Ok(SynthOutput { rows, ground_truth })
}

/// Build one file; returns the waveform and the true burst bounds.
fn synth_file(spec: &SynthSpec, id: &str, label: ManifestLabel) -> (Waveform, Vec<SegmentBounds>) {
    let sr = f64::from(spec.sample_rate);
    let ms = |v: f64| (v / 1000.0 * sr).round() as usize;
    let mut rng = item_rng(spec.seed, &format!("synth/{id}"));

    let n_bursts = rng.random_range(spec.bursts_min..=spec.bursts_max);
    let mut samples: Vec<f32> = Vec::new();
    let push_floor = |samples: &mut Vec<f32>, n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let f = spec.noise_floor;
        if f > 0.0 {
            samples.extend((0..n).map(|_| (rng.random_range(-f..f)) as f32));
        } else {
            samples.extend(std::iter::repeat_n(0.0f32, n));
        }
    };

    push_floor(&mut samples, ms(spec.lead_ms), &mut rng);
    let mut bounds = Vec::with_capacity(n_bursts);
    for b in 0..n_bursts {
        if b > 0 {
            let gap = rng.random_range(spec.gap_ms.0..=spec.gap_ms.1);
            push_floor(&mut samples, ms(gap), &mut rng);
        }
        let sustain = ms(rng.random_range(spec.burst_ms.0..=spec.burst_ms.1));
        let tail = ms(spec.tail_ms);
        let amp = rng.random_range(spec.amp_range.0..=spec.amp_range.1);
        let start = samples.len();
        let burst = synth_burst(sustain, tail, amp, spec.tilt, label, &mut rng);
        samples.extend(burst.iter().map(|&v| v as f32));
        bounds.push(SegmentBounds {
            start,
            end: samples.len(),
            parent_id: id.to_string(),
            index: b,
        });
    }
    push_floor(&mut samples, ms(spec.lead_ms), &mut rng);

    (Waveform::new(samples, spec.sample_rate, id), bounds)
}

/// White noise shaped by a class-conditional one-tap filter, with a linear
/// 10 ms attack and an exponential tail, RMS-calibrated to `0.45 * amp`.
fn synth_burst(
    sustain: usize,
    tail: usize,
    amp: f64,
    tilt: f64,
    label: ManifestLabel,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<f64> {
    let n = sustain + tail;
    let white: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut shaped = vec![0.0f64; n];
    match label {
        // positive: high-frequency emphasis
        ManifestLabel::Positive => {
            shaped[0] = white[0];
            for i in 1..n {
                shaped[i] = white[i] - tilt * white[i - 1];
            }
        }
        // negative (and unlabeled): one-pole low-pass
        _ => {
            let mut prev = 0.0;
            for i in 0..n {
                prev = (1.0 - tilt) * white[i] + tilt * prev;
                shaped[i] = prev;
            }
        }
    }

    let rms = (shaped.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let target = 0.45 * amp;
    let gain = if rms > 0.0 { target / rms } else { 0.0 };

    let attack = (sustain / 8).clamp(1, 160);
    let tau = (tail as f64 / 3.0).max(1.0);
    for (i, v) in shaped.iter_mut().enumerate() {
        let env = if i < attack {
            i as f64 / attack as f64
        } else if i < sustain {
            1.0
        } else {
            (-((i - sustain) as f64) / tau).exp()
        };
        *v *= gain * env;
        // keep the encoder's float range
        *v = v.clamp(-1.0, 1.0);
    }
    shaped
}

pub fn write_ground_truth(path: &Path, gt: &[GroundTruthSegment]) -> Result<(), PipelineError> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| PipelineError::Data(format!("cannot write {}: {e}", path.display())))?;
    for seg in gt {
        writer
            .serialize(seg)
            .map_err(|e| PipelineError::Data(format!("cannot serialize ground truth: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthSegment>, PipelineError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| PipelineError::Data(format!("cannot open {}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| PipelineError::Data(format!("bad ground truth row: {e}"))))
        .collect()
}

/// Fraction of ground-truth bursts matched by a found segment with
/// intersection-over-union at or above `iou_threshold`.
pub fn segmentation_recall(
    ground_truth: &[GroundTruthSegment],
    found: &[SegmentBounds],
    iou_threshold: f64,
) -> f64 {
    if ground_truth.is_empty() {
        return 1.0;
    }
    let matched = ground_truth
        .iter()
        .filter(|gt| {
            found
                .iter()
                .filter(|s| s.parent_id == gt.id)
                .any(|s| iou(gt.start, gt.end, s.start, s.end) >= iou_threshold)
        })
        .count();
    matched as f64 / ground_truth.len() as f64
}

fn iou(a0: usize, a1: usize, b0: usize, b1: usize) -> f64 {
    let inter = a1.min(b1).saturating_sub(a0.max(b0));
    let union = a1.max(b1) - a0.min(b0);
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}
