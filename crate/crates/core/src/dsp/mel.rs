//! Mel-scale conversion, filterbanks, mel spectrograms, and MFCCs.

use super::{stft, DspError, LogMelSpectrogram, Spectrogram, StftConfig};
use crate::audio::Waveform;
use ndarray::Array2;

/// Hertz to mel: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(f_hz: f64) -> Result<f64, DspError> {
    if f_hz < 0.0 {
        return Err(DspError::NegativeFrequency(f_hz));
    }
    Ok(2595.0 * (1.0 + f_hz / 700.0).log10())
}

/// Exact inverse of [`hz_to_mel`]: `700 * (10^(m / 2595) - 1)`.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Bank of triangular mel filters over FFT bins, peak amplitude 1 (no area
/// normalization).
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    weights: Array2<f64>, // n_mels x bins
    centers_hz: Vec<f64>,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

impl MelFilterbank {
    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn n_mels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.ncols()
    }

    /// Peak frequency of each filter, strictly increasing.
    pub fn center_frequencies_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    /// Project a power spectrogram onto the mel bands.
    pub fn apply(&self, spec: &Spectrogram) -> Result<MelSpectrogram, DspError> {
        if spec.n_bins() != self.n_bins() {
            return Err(DspError::InvalidParams(format!(
                "spectrogram has {} bins, filterbank expects {}",
                spec.n_bins(),
                self.n_bins()
            )));
        }
        let power = spec.clone().into_power();
        Ok(MelSpectrogram {
            values: power.values().dot(&self.weights.t()),
        })
    }
}

/// Build `n_mels` triangular filters with peaks evenly spaced on the mel axis
/// between `fmin_hz` and `fmax_hz`, evaluated at the `n_fft / 2 + 1` bin
/// frequencies of a `sample_rate` analysis.
pub fn mel_filterbank(
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: f64,
    n_fft: usize,
    sample_rate: u32,
) -> Result<MelFilterbank, DspError> {
    let nyquist = f64::from(sample_rate) / 2.0;
    if n_mels == 0 || !(0.0 <= fmin_hz && fmin_hz < fmax_hz && fmax_hz <= nyquist) || n_fft < 2 {
        return Err(DspError::InvalidParams(format!(
            "need n_mels >= 1 and 0 <= fmin < fmax <= {nyquist}, got n_mels={n_mels} fmin={fmin_hz} fmax={fmax_hz}"
        )));
    }
    let mel_lo = hz_to_mel(fmin_hz)?;
    let mel_hi = hz_to_mel(fmax_hz)?;
    // n_mels + 2 evenly spaced mel points; filter i spans points i..i+2.
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
        .collect();

    let n_bins = n_fft / 2 + 1;
    let hz_per_bin = f64::from(sample_rate) / n_fft as f64;
    let mut weights = Array2::zeros((n_mels, n_bins));
    for m in 0..n_mels {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let mut any = false;
        for k in 0..n_bins {
            let f = k as f64 * hz_per_bin;
            let up = (f - left) / (center - left);
            let down = (right - f) / (right - center);
            let v = up.min(down).max(0.0);
            if v > 0.0 {
                weights[[m, k]] = v;
                any = true;
            }
        }
        if !any {
            return Err(DspError::InvalidParams(format!(
                "mel filter {m} covers no FFT bin; raise n_fft or lower n_mels"
            )));
        }
    }
    Ok(MelFilterbank {
        weights,
        centers_hz: edges_hz[1..=n_mels].to_vec(),
        fmin_hz,
        fmax_hz,
    })
}

/// Mel-projected power spectrogram, frames x n_mels, entries >= 0.
#[derive(Debug, Clone)]
pub struct MelSpectrogram {
    values: Array2<f64>,
}

impl MelSpectrogram {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_bands(&self) -> usize {
        self.values.ncols()
    }

    /// Wrap an externally computed mel matrix; entries must be finite and
    /// nonnegative.
    pub fn from_values(values: Array2<f64>) -> Result<Self, DspError> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DspError::InvalidParams(
                "mel values must be finite and >= 0".into(),
            ));
        }
        Ok(MelSpectrogram { values })
    }
}

/// Mel spectrogram with the canonical parameters (n_fft 1024, hop 320,
/// window 1024, 64 bands, 0 Hz to Nyquist, power 2).
pub fn mel_spectrogram(w: &Waveform) -> Result<MelSpectrogram, DspError> {
    mel_spectrogram_with(w, &StftConfig::default(), super::N_MELS, super::MEL_FMIN_HZ, None)
}

/// Mel spectrogram with explicit parameters; `fmax` defaults to Nyquist.
pub fn mel_spectrogram_with(
    w: &Waveform,
    cfg: &StftConfig,
    n_mels: usize,
    fmin_hz: f64,
    fmax_hz: Option<f64>,
) -> Result<MelSpectrogram, DspError> {
    let fmax = fmax_hz.unwrap_or(f64::from(w.sample_rate) / 2.0);
    let fb = mel_filterbank(n_mels, fmin_hz, fmax, cfg.n_fft, w.sample_rate)?;
    let spec = stft(w, cfg)?;
    fb.apply(&spec)
}

/// Orthonormal DCT-II of one frame.
pub fn dct2_orthonormal(input: &[f64]) -> Vec<f64> {
    let n = input.len();
    let scale0 = (1.0 / n as f64).sqrt();
    let scale = (2.0 / n as f64).sqrt();
    (0..n)
        .map(|k| {
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    x * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2 * n) as f64)
                        .cos()
                })
                .sum();
            sum * if k == 0 { scale0 } else { scale }
        })
        .collect()
}

/// MFCCs from a waveform via the canonical 64-band log mel spectrogram.
///
/// With `include_first` false, coefficient 0 (overall level) is skipped and
/// the result holds coefficients `1..=n_coeffs`.
pub fn mfcc(
    w: &Waveform,
    n_coeffs: usize,
    include_first: bool,
) -> Result<Array2<f64>, DspError> {
    let mel = mel_spectrogram(w)?;
    let log_mel = super::log_compress(&mel, super::LOG_REF)?;
    mfcc_from_log_mel(&log_mel, n_coeffs, include_first)
}

/// Per-frame orthonormal DCT-II of log mel energies.
pub fn mfcc_from_log_mel(
    log_mel: &LogMelSpectrogram,
    n_coeffs: usize,
    include_first: bool,
) -> Result<Array2<f64>, DspError> {
    let n_bands = log_mel.n_bands();
    let skip = usize::from(!include_first);
    if n_coeffs == 0 || n_coeffs + skip > n_bands {
        return Err(DspError::InvalidParams(format!(
            "n_coeffs {n_coeffs} out of range for {n_bands} mel bands"
        )));
    }
    let mut out = Array2::zeros((log_mel.n_frames(), n_coeffs));
    for (t, frame) in log_mel.values.rows().into_iter().enumerate() {
        let coeffs = dct2_orthonormal(frame.as_slice().unwrap());
        for c in 0..n_coeffs {
            out[[t, c]] = coeffs[c + skip];
        }
    }
    Ok(out)
}
