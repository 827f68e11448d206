//! Cough analysis toolkit.
//!
//! The crate is organized around the processing blocks of a cough-based
//! classification pipeline:
//!
//! - [`audio`] — WAV decode/encode, polyphase resampling, peak normalization.
//! - [`dsp`] — STFT, mel filterbanks, log-mel spectrograms, MFCCs, RMS envelopes.
//! - [`detect`] — per-recording acoustic features scored by a gradient-boosted
//!   tree ensemble, plus probability-threshold filtering.
//! - [`segment`] — splitting a recording with several coughs into per-cough
//!   waveforms (hysteresis comparator or absolute RMS threshold).
//! - [`augment`] — mixup, spectrogram masking, and additive noise at a target SNR.
//! - [`train`] — a two-class linear head with sigmoid outputs trained by AdamW,
//!   balanced-accuracy evaluation, and stratified train/dev splitting.
//! - [`pipeline`] — manifests, configuration, the synthetic corpus generator,
//!   stage orchestration, sweeps, and report emission.
//!
//! All operations are deterministic given an explicit seed; batch work derives
//! one RNG stream per item so serial and parallel runs agree.

pub mod audio;
pub mod augment;
pub mod detect;
pub mod dsp;
pub mod pipeline;
pub mod rng;
pub mod segment;
pub mod train;

pub use audio::Waveform;
