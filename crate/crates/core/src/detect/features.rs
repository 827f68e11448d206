//! Per-recording acoustic features for the cough detector.
//!
//! Eighteen scalars: three time-domain (zero-crossing rate, RMS, crest
//! factor), nine spectral-shape statistics averaged over STFT frames, and the
//! per-frame means of MFCC coefficients 1-6. Definitions:
//!
//! - `zcr`: sign changes between adjacent samples divided by the sample count.
//! - `crest_factor`: peak amplitude over RMS.
//! - `dominant_freq_hz`: frequency of the strongest FFT bin, per frame.
//! - `spectral_centroid_hz`: magnitude-weighted mean frequency.
//! - `spectral_rolloff85_hz`: lowest frequency below which 85% of the frame
//!   energy (squared magnitude) accumulates.
//! - `spectral_bandwidth_hz`: magnitude-weighted standard deviation around
//!   the centroid.
//! - `spectral_flatness`: geometric over arithmetic mean of the power
//!   spectrum (floored at 1e-10), in [0, 1].
//! - `spectral_slope`: least-squares slope of magnitude against frequency.
//! - `spectral_decrease`: sum over k >= 2 of (S_k - S_1) / (k - 1), divided
//!   by the sum of S_k for k >= 2 (1-based bins).
//! - `spectral_skewness`, `spectral_kurtosis`: third and fourth standardized
//!   moments of the magnitude distribution over frequency.
//!
//! Frames with zero spectral energy are skipped in the averages. An all-zero
//! signal yields the default vector (all features 0) with `degenerate` set.

use crate::audio::Waveform;
use crate::dsp::{self, stft, StftConfig};
use thiserror::Error;

pub const N_FEATURES: usize = 18;

/// Canonical feature order; model files must list exactly these names.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "zcr",
    "rms",
    "crest_factor",
    "dominant_freq_hz",
    "spectral_centroid_hz",
    "spectral_rolloff85_hz",
    "spectral_bandwidth_hz",
    "spectral_flatness",
    "spectral_slope",
    "spectral_decrease",
    "spectral_skewness",
    "spectral_kurtosis",
    "mfcc_mean_1",
    "mfcc_mean_2",
    "mfcc_mean_3",
    "mfcc_mean_4",
    "mfcc_mean_5",
    "mfcc_mean_6",
];

/// Index of a feature name in [`FEATURE_NAMES`].
pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("empty signal")]
    EmptySignal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcousticFeatureVector {
    pub zcr: f64,
    pub rms: f64,
    pub crest_factor: f64,
    pub dominant_freq_hz: f64,
    pub spectral_centroid_hz: f64,
    pub spectral_rolloff85_hz: f64,
    pub spectral_bandwidth_hz: f64,
    pub spectral_flatness: f64,
    pub spectral_slope: f64,
    pub spectral_decrease: f64,
    pub spectral_skewness: f64,
    pub spectral_kurtosis: f64,
    pub mfcc_mean: [f64; 6],
    /// Set when the input carried no energy and the default vector was
    /// returned.
    pub degenerate: bool,
}

impl AcousticFeatureVector {
    fn zeroed(degenerate: bool) -> Self {
        AcousticFeatureVector {
            zcr: 0.0,
            rms: 0.0,
            crest_factor: 0.0,
            dominant_freq_hz: 0.0,
            spectral_centroid_hz: 0.0,
            spectral_rolloff85_hz: 0.0,
            spectral_bandwidth_hz: 0.0,
            spectral_flatness: 0.0,
            spectral_slope: 0.0,
            spectral_decrease: 0.0,
            spectral_skewness: 0.0,
            spectral_kurtosis: 0.0,
            mfcc_mean: [0.0; 6],
            degenerate,
        }
    }

    /// Values in [`FEATURE_NAMES`] order.
    pub fn as_array(&self) -> [f64; N_FEATURES] {
        [
            self.zcr,
            self.rms,
            self.crest_factor,
            self.dominant_freq_hz,
            self.spectral_centroid_hz,
            self.spectral_rolloff85_hz,
            self.spectral_bandwidth_hz,
            self.spectral_flatness,
            self.spectral_slope,
            self.spectral_decrease,
            self.spectral_skewness,
            self.spectral_kurtosis,
            self.mfcc_mean[0],
            self.mfcc_mean[1],
            self.mfcc_mean[2],
            self.mfcc_mean[3],
            self.mfcc_mean[4],
            self.mfcc_mean[5],
        ]
    }
}

/// Compute the 18-feature vector of one (peak-normalized) recording.
pub fn extract_detection_features(
    w: &Waveform,
) -> Result<AcousticFeatureVector, FeatureError> {
    if w.is_empty() {
        return Err(FeatureError::EmptySignal);
    }
    if w.peak() == 0.0 {
        return Ok(AcousticFeatureVector::zeroed(true));
    }

    let mut out = AcousticFeatureVector::zeroed(false);

    // Time-domain features over the whole signal.
    let crossings = w
        .samples
        .windows(2)
        .filter(|p| f64::from(p[0]) * f64::from(p[1]) < 0.0)
        .count();
    out.zcr = crossings as f64 / w.len() as f64;
    out.rms = w.rms();
    out.crest_factor = f64::from(w.peak()) / out.rms;

    // Spectral statistics, averaged over frames with nonzero energy.
    let spec = stft(w, &StftConfig::default()).expect("canonical stft parameters are valid");
    let hz_per_bin = f64::from(w.sample_rate) / spec.n_fft as f64;
    let mut frames_used = 0usize;
    let mut acc = [0.0f64; 9];
    for row in spec.values().rows() {
        let mags = row.as_slice().unwrap();
        let total: f64 = mags.iter().sum();
        if total <= 0.0 {
            continue;
        }
        frames_used += 1;
        let stats = frame_spectral_stats(mags, hz_per_bin, total);
        for (a, s) in acc.iter_mut().zip(stats.iter()) {
            *a += s;
        }
    }
    if frames_used > 0 {
        let n = frames_used as f64;
        out.dominant_freq_hz = acc[0] / n;
        out.spectral_centroid_hz = acc[1] / n;
        out.spectral_rolloff85_hz = acc[2] / n;
        out.spectral_bandwidth_hz = acc[3] / n;
        out.spectral_flatness = acc[4] / n;
        out.spectral_slope = acc[5] / n;
        out.spectral_decrease = acc[6] / n;
        out.spectral_skewness = acc[7] / n;
        out.spectral_kurtosis = acc[8] / n;
    }

    let mfccs = dsp::mfcc(w, 6, false).expect("canonical mfcc parameters are valid");
    for c in 0..6 {
        out.mfcc_mean[c] = mfccs.column(c).mean().unwrap_or(0.0);
    }
    Ok(out)
}

/// dominant, centroid, rolloff85, bandwidth, flatness, slope, decrease,
/// skewness, kurtosis — for one magnitude frame with `total > 0`.
fn frame_spectral_stats(mags: &[f64], hz_per_bin: f64, total: f64) -> [f64; 9] {
    let n = mags.len();

    let dominant = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k as f64 * hz_per_bin)
        .unwrap_or(0.0);

    let centroid: f64 = mags
        .iter()
        .enumerate()
        .map(|(k, &s)| k as f64 * hz_per_bin * s)
        .sum::<f64>()
        / total;

    let energy_total: f64 = mags.iter().map(|&s| s * s).sum();
    let mut cum = 0.0;
    let mut rolloff = (n - 1) as f64 * hz_per_bin;
    for (k, &s) in mags.iter().enumerate() {
        cum += s * s;
        if cum >= 0.85 * energy_total {
            rolloff = k as f64 * hz_per_bin;
            break;
        }
    }

    let var: f64 = mags
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let d = k as f64 * hz_per_bin - centroid;
            d * d * s
        })
        .sum::<f64>()
        / total;
    let bandwidth = var.sqrt();

    let floored: Vec<f64> = mags.iter().map(|&s| (s * s).max(dsp::LOG_AMIN)).collect();
    let log_mean = floored.iter().map(|&p| p.ln()).sum::<f64>() / n as f64;
    let arith_mean = floored.iter().sum::<f64>() / n as f64;
    let flatness = (log_mean.exp() / arith_mean).min(1.0);

    // Least-squares slope of magnitude against frequency.
    let mean_f = hz_per_bin * (n - 1) as f64 / 2.0;
    let mean_s = total / n as f64;
    let mut cov = 0.0;
    let mut var_f = 0.0;
    for (k, &s) in mags.iter().enumerate() {
        let df = k as f64 * hz_per_bin - mean_f;
        cov += df * (s - mean_s);
        var_f += df * df;
    }
    let slope = cov / var_f;

    let tail: f64 = mags[1..].iter().sum();
    let decrease = if tail > 0.0 {
        mags[1..]
            .iter()
            .enumerate()
            .map(|(i, &s)| (s - mags[0]) / (i + 1) as f64)
            .sum::<f64>()
            / tail
    } else {
        0.0
    };

    let (skewness, kurtosis) = if bandwidth > 0.0 {
        let m3: f64 = mags
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let d = (k as f64 * hz_per_bin - centroid) / bandwidth;
                d * d * d * s
            })
            .sum::<f64>()
            / total;
        let m4: f64 = mags
            .iter()
            .enumerate()
            .map(|(k, &s)| {
                let d = (k as f64 * hz_per_bin - centroid) / bandwidth;
                d * d * d * d * s
            })
            .sum::<f64>()
            / total;
        (m3, m4)
    } else {
        (0.0, 0.0)
    };

    [
        dominant, centroid, rolloff, bandwidth, flatness, slope, decrease, skewness, kurtosis,
    ]
}
