//! Audio I/O and conditioning: WAV codec, resampling, peak normalization.
//!
//! The canonical processing rate is 16 kHz mono; [`resample`] brings arbitrary
//! input rates there and [`peak_normalize`] scales amplitudes into [-1, 1].

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{decode_wav, encode_wav, BitDepth, WavError};

/// The canonical sample rate every recording is resampled to.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;

/// A mono amplitude sequence with its sample rate.
///
/// Samples are dimensionless, nominally in [-1, 1] after [`peak_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    /// Opaque identifier of the origin recording.
    pub source_id: String,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32, source_id: impl Into<String>) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        let w = Waveform {
            samples,
            sample_rate,
            source_id: source_id.into(),
        };
        debug_assert!(w.samples.iter().all(|s| s.is_finite()));
        w
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |p, s| p.max(s.abs()))
    }

    /// Root-mean-square amplitude over the whole signal.
    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let sum_sq: f64 = self.samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
        (sum_sq / self.samples.len() as f64).sqrt()
    }
}

/// Result of [`peak_normalize`].
#[derive(Debug, Clone)]
pub struct Normalized {
    pub waveform: Waveform,
    /// Set when the input was all-zero and returned unchanged.
    pub was_silent: bool,
}

/// Scale all samples by 1/max(|samples|) so the loudest sample is exactly ±1.0.
///
/// An all-zero signal is returned unchanged with `was_silent` set, so batch
/// runs survive silent files.
pub fn peak_normalize(w: Waveform) -> Normalized {
    let peak = w.peak();
    if peak == 0.0 {
        return Normalized {
            waveform: w,
            was_silent: true,
        };
    }
    let samples = w.samples.iter().map(|&s| s / peak).collect();
    Normalized {
        waveform: Waveform {
            samples,
            sample_rate: w.sample_rate,
            source_id: w.source_id,
        },
        was_silent: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_scales_to_unit_peak() {
        let w = Waveform::new(vec![0.2, -0.5], 16_000, "t");
        let n = peak_normalize(w);
        assert!(!n.was_silent);
        assert_eq!(n.waveform.samples, vec![0.4, -1.0]);
    }

    #[test]
    fn normalize_leaves_silence_untouched() {
        let w = Waveform::new(vec![0.0, 0.0, 0.0], 16_000, "t");
        let n = peak_normalize(w.clone());
        assert!(n.was_silent);
        assert_eq!(n.waveform.samples, w.samples);
    }

    #[test]
    fn normalize_is_a_noop_on_unit_peak_input() {
        let w = Waveform::new(vec![1.0, -0.3], 16_000, "t");
        let n = peak_normalize(w.clone());
        assert_eq!(n.waveform.samples, w.samples);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(samples in proptest::collection::vec(-1e6f32..1e6, 1..64)) {
            let once = peak_normalize(Waveform::new(samples, 8_000, "p"));
            let twice = peak_normalize(once.waveform.clone());
            prop_assert_eq!(&once.waveform.samples, &twice.waveform.samples);
            if !once.was_silent {
                prop_assert_eq!(once.waveform.peak(), 1.0);
            }
        }
    }
}
