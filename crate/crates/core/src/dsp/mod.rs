//! Spectral feature extraction.
//!
//! STFT, mel filterbanks, mel / log-mel spectrograms, MFCCs, and frame-RMS
//! envelopes. The canonical analysis parameters are `n_fft` 1024, hop 320,
//! window 1024, 64 mel bands from 0 Hz to Nyquist, power-2 spectrogram, and
//! dB compression `20 * log10(max(S, 1e-10) / ref)` with `ref` 1.0.

mod io;
mod mel;
mod stft;

pub use io::{read_lmel, write_lmel, LmelError};
pub use mel::{
    dct2_orthonormal, hz_to_mel, mel_filterbank, mel_spectrogram, mel_spectrogram_with, mel_to_hz,
    mfcc, mfcc_from_log_mel, MelFilterbank, MelSpectrogram,
};
pub use stft::{stft, StftConfig};

use crate::audio::Waveform;
use ndarray::Array2;
use thiserror::Error;

pub const N_FFT: usize = 1024;
pub const HOP_LENGTH: usize = 320;
pub const WIN_LENGTH: usize = 1024;
pub const N_MELS: usize = 64;
pub const MEL_FMIN_HZ: f64 = 0.0;
/// Reference value of the dB compression.
pub const LOG_REF: f64 = 1.0;
/// Floor applied before the logarithm; keeps silence at a finite -200 dB.
pub const LOG_AMIN: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("negative frequency: {0} Hz")]
    NegativeFrequency(f64),
    #[error("invalid log reference: {0} (must be > 0)")]
    InvalidRef(f64),
}

/// Short-time magnitude (or power) spectrum, frames x bins.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    values: Array2<f64>,
    pub n_fft: usize,
    pub hop: usize,
    /// 1 for magnitude, 2 for power.
    pub power_exponent: u8,
}

impl Spectrogram {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.values.ncols()
    }

    /// Square the entries, turning a magnitude spectrogram into power.
    pub fn into_power(mut self) -> Spectrogram {
        if self.power_exponent == 1 {
            self.values.mapv_inplace(|v| v * v);
            self.power_exponent = 2;
        }
        self
    }

    pub(crate) fn from_parts(values: Array2<f64>, n_fft: usize, hop: usize, power: u8) -> Self {
        Spectrogram {
            values,
            n_fft,
            hop,
            power_exponent: power,
        }
    }
}

/// Time x mel-band matrix in decibels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelSpectrogram {
    pub values: Array2<f64>,
    pub ref_value: f64,
}

impl LogMelSpectrogram {
    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bands(&self) -> usize {
        self.values.ncols()
    }
}

/// Entrywise `20 * log10(max(S, LOG_AMIN) / ref)`.
pub fn log_compress(m: &MelSpectrogram, ref_value: f64) -> Result<LogMelSpectrogram, DspError> {
    if ref_value.is_nan() || ref_value <= 0.0 {
        return Err(DspError::InvalidRef(ref_value));
    }
    let values = m
        .values()
        .mapv(|v| 20.0 * (v.max(LOG_AMIN) / ref_value).log10());
    Ok(LogMelSpectrogram { values, ref_value })
}

/// Per-frame root-mean-square amplitude, no padding; a trailing partial frame
/// is dropped.
pub fn frame_rms(w: &Waveform, frame_len: usize, hop: usize) -> Result<Vec<f64>, DspError> {
    if frame_len == 0 || hop == 0 {
        return Err(DspError::InvalidParams(
            "frame_len and hop must be >= 1".into(),
        ));
    }
    if w.len() < frame_len {
        return Ok(Vec::new());
    }
    let n_frames = (w.len() - frame_len) / hop + 1;
    let mut env = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let frame = &w.samples[i * hop..i * hop + frame_len];
        let sum_sq: f64 = frame.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        env.push((sum_sq / frame_len as f64).sqrt());
    }
    Ok(env)
}
