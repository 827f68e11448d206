//! Cough segmentation.
//!
//! Splits one recording containing several coughs into per-cough intervals
//! using a frame-RMS envelope. Two detectors:
//!
//! - hysteresis comparator: a segment opens when the envelope reaches
//!   `upper_ratio` times the global RMS and closes when it falls below
//!   `lower_ratio` times the global RMS (scale-invariant);
//! - RMS threshold: frames with RMS at or above an absolute threshold
//!   (0.09 after peak normalization) are cough frames.
//!
//! Raw runs are then merged across gaps shorter than `merge_gap_ms`, runs
//! shorter than `min_duration_ms` are dropped, and `pad_ms` of context is
//! added on each side, never past the midpoint to a neighboring segment.

use crate::audio::Waveform;
use crate::dsp::frame_rms;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentError {
    #[error("invalid segmenter config: {0}")]
    InvalidConfig(String),
    #[error("bounds [{start}, {end}) out of range for signal of {len} samples")]
    OutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegmentMethod {
    Hysteresis,
    Rms,
}

impl SegmentMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentMethod::Hysteresis => "hysteresis",
            SegmentMethod::Rms => "rms",
        }
    }
}

impl std::str::FromStr for SegmentMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hysteresis" => Ok(SegmentMethod::Hysteresis),
            "rms" => Ok(SegmentMethod::Rms),
            other => Err(format!("unknown segmenter {other:?} (hysteresis|rms)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    pub method: SegmentMethod,
    pub frame_len: usize,
    pub hop: usize,
    /// Hysteresis open threshold as a multiple of the global RMS.
    pub upper_ratio: f64,
    /// Hysteresis close threshold as a multiple of the global RMS.
    pub lower_ratio: f64,
    /// Absolute frame-RMS threshold of the single-threshold method.
    pub rms_threshold: f64,
    pub min_duration_ms: f64,
    pub merge_gap_ms: f64,
    pub pad_ms: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        SegmenterConfig {
            method: SegmentMethod::Hysteresis,
            frame_len: 1024,
            hop: 256,
            upper_ratio: 2.0,
            lower_ratio: 0.5,
            rms_threshold: 0.09,
            min_duration_ms: 200.0,
            merge_gap_ms: 100.0,
            pad_ms: 50.0,
        }
    }
}

impl SegmenterConfig {
    fn validate(&self) -> Result<(), SegmentError> {
        if self.frame_len == 0 || self.hop == 0 {
            return Err(SegmentError::InvalidConfig(
                "frame_len and hop must be >= 1".into(),
            ));
        }
        let ratios_ok = self.upper_ratio > self.lower_ratio && self.lower_ratio > 0.0;
        if !ratios_ok {
            return Err(SegmentError::InvalidConfig(format!(
                "need upper_ratio > lower_ratio > 0, got {} and {}",
                self.upper_ratio, self.lower_ratio
            )));
        }
        if self.rms_threshold.is_nan() || self.rms_threshold <= 0.0 {
            return Err(SegmentError::InvalidConfig(
                "rms_threshold must be > 0".into(),
            ));
        }
        if self.min_duration_ms < 0.0 || self.merge_gap_ms < 0.0 || self.pad_ms < 0.0 {
            return Err(SegmentError::InvalidConfig(
                "durations must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Sample-index interval `[start, end)` of one detected cough.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentBounds {
    pub start: usize,
    pub end: usize,
    pub parent_id: String,
    pub index: usize,
}

impl SegmentBounds {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }
}

/// Run the segmenter selected by `cfg.method`.
pub fn segment(w: &Waveform, cfg: &SegmenterConfig) -> Result<Vec<SegmentBounds>, SegmentError> {
    match cfg.method {
        SegmentMethod::Hysteresis => segment_hysteresis(w, cfg),
        SegmentMethod::Rms => segment_rms(w, cfg),
    }
}

/// Two-threshold comparator on the frame-RMS envelope, relative to global RMS.
pub fn segment_hysteresis(
    w: &Waveform,
    cfg: &SegmenterConfig,
) -> Result<Vec<SegmentBounds>, SegmentError> {
    cfg.validate()?;
    let global = w.rms();
    if global <= 0.0 {
        return Ok(Vec::new());
    }
    let env = frame_rms(w, cfg.frame_len, cfg.hop).expect("validated framing");
    let upper = cfg.upper_ratio * global;
    let lower = cfg.lower_ratio * global;

    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &e) in env.iter().enumerate() {
        match open {
            None if e >= upper => open = Some(i),
            Some(a) if e < lower => {
                runs.push((a, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        runs.push((a, env.len() - 1));
    }
    Ok(finalize(w, cfg, runs))
}

/// Single absolute threshold on the frame-RMS envelope.
pub fn segment_rms(
    w: &Waveform,
    cfg: &SegmenterConfig,
) -> Result<Vec<SegmentBounds>, SegmentError> {
    cfg.validate()?;
    let env = frame_rms(w, cfg.frame_len, cfg.hop).expect("validated framing");

    let mut runs = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &e) in env.iter().enumerate() {
        match open {
            None if e >= cfg.rms_threshold => open = Some(i),
            Some(a) if e < cfg.rms_threshold => {
                runs.push((a, i - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(a) = open {
        runs.push((a, env.len() - 1));
    }
    Ok(finalize(w, cfg, runs))
}

/// Frame runs -> sample intervals -> merge -> drop short -> pad.
fn finalize(w: &Waveform, cfg: &SegmenterConfig, runs: Vec<(usize, usize)>) -> Vec<SegmentBounds> {
    let ms_to_samples =
        |ms: f64| (ms / 1000.0 * f64::from(w.sample_rate)).round() as usize;
    let merge_gap = ms_to_samples(cfg.merge_gap_ms);
    let min_len = ms_to_samples(cfg.min_duration_ms);
    let pad = ms_to_samples(cfg.pad_ms);

    let mut intervals: Vec<(usize, usize)> = runs
        .into_iter()
        .map(|(a, b)| (a * cfg.hop, (b * cfg.hop + cfg.frame_len).min(w.len())))
        .collect();

    // Merge segments separated by less than the merge gap.
    let mut merged: Vec<(usize, usize)> = Vec::with_capacity(intervals.len());
    for iv in intervals.drain(..) {
        match merged.last_mut() {
            Some(last) if iv.0 - last.1 < merge_gap => last.1 = iv.1,
            _ => merged.push(iv),
        }
    }

    merged.retain(|&(a, b)| b - a >= min_len);

    // Pad, never past the midpoint to a neighbor or the signal bounds.
    let n = merged.len();
    let padded: Vec<(usize, usize)> = (0..n)
        .map(|i| {
            let (a, b) = merged[i];
            let lo_limit = if i == 0 {
                0
            } else {
                (merged[i - 1].1 + a) / 2
            };
            let hi_limit = if i + 1 == n {
                w.len()
            } else {
                (b + merged[i + 1].0) / 2
            };
            (a.saturating_sub(pad).max(lo_limit), (b + pad).min(hi_limit))
        })
        .collect();

    padded
        .into_iter()
        .enumerate()
        .map(|(index, (start, end))| SegmentBounds {
            start,
            end,
            parent_id: w.source_id.clone(),
            index,
        })
        .collect()
}

/// Sample-exact slice of one segment; the result is identified as
/// `<parent_id>_seg<index>`.
pub fn extract_segment(w: &Waveform, b: &SegmentBounds) -> Result<Waveform, SegmentError> {
    if b.start >= b.end || b.end > w.len() {
        return Err(SegmentError::OutOfRange {
            start: b.start,
            end: b.end,
            len: w.len(),
        });
    }
    Ok(Waveform::new(
        w.samples[b.start..b.end].to_vec(),
        w.sample_rate,
        format!("{}_seg{}", b.parent_id, b.index),
    ))
}
