//! Short-time Fourier transform.

use super::{DspError, Spectrogram};
use crate::audio::Waveform;
use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// STFT framing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub win_length: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            n_fft: super::N_FFT,
            hop: super::HOP_LENGTH,
            win_length: super::WIN_LENGTH,
        }
    }
}

/// Magnitude spectrogram of Hann-windowed, center-aligned frames.
///
/// The signal is reflect-padded by `n_fft / 2` on each side, so frame `t` is
/// centered on sample `t * hop` and the frame count is `len / hop + 1`.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<Spectrogram, DspError> {
    if cfg.win_length < 1 || cfg.n_fft < cfg.win_length || cfg.hop < 1 {
        return Err(DspError::InvalidParams(format!(
            "need n_fft >= win_length >= 1 and hop >= 1, got n_fft={} win={} hop={}",
            cfg.n_fft, cfg.win_length, cfg.hop
        )));
    }
    if w.is_empty() {
        return Err(DspError::InvalidParams("empty signal".into()));
    }

    let n_fft = cfg.n_fft;
    let pad = n_fft / 2;
    let n_frames = w.len() / cfg.hop + 1;
    let n_bins = n_fft / 2 + 1;

    // Hann window (periodic), centered within the n_fft buffer.
    let window = hann(cfg.win_length);
    let win_offset = (n_fft - cfg.win_length) / 2;

    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let mut values = Array2::zeros((n_frames, n_bins));
    for t in 0..n_frames {
        buf.fill(Complex::new(0.0, 0.0));
        let frame_start = t as isize * cfg.hop as isize - pad as isize;
        for (j, &win) in window.iter().enumerate() {
            let src = frame_start + (win_offset + j) as isize;
            let sample = f64::from(w.samples[reflect_index(src, w.len())]);
            buf[win_offset + j] = Complex::new(sample * win, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf[..n_bins].iter().enumerate() {
            values[[t, k]] = c.norm();
        }
    }
    Ok(Spectrogram::from_parts(values, n_fft, cfg.hop, 1))
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Mirror an out-of-range index back into `[0, n)` without repeating the
/// edge sample (numpy-style "reflect").
fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i % period;
    if m < 0 {
        m += period;
    }
    let m = m as usize;
    if m < n {
        m
    } else {
        period as usize - m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64) -> Waveform {
        let n = (f64::from(rate) * secs) as usize;
        let samples = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / f64::from(rate)).sin() as f32)
            .collect();
        Waveform::new(samples, rate, "sine")
    }

    /// Direct O(n^2) DFT magnitude of one windowed frame.
    fn dft_magnitude(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..n / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                for (j, &x) in frame.iter().enumerate() {
                    let phi = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                    re += x * phi.cos();
                    im += x * phi.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn reflect_indexing_bounces() {
        // signal [a b c d]: index -1 -> b, -2 -> c, 4 -> c, 5 -> b
        assert_eq!(reflect_index(-1, 4), 1);
        assert_eq!(reflect_index(-2, 4), 2);
        assert_eq!(reflect_index(4, 4), 2);
        assert_eq!(reflect_index(5, 4), 1);
        assert_eq!(reflect_index(0, 1), 0);
        assert_eq!(reflect_index(-7, 1), 0);
    }

    #[test]
    fn zero_signal_gives_zero_spectrogram() {
        let w = Waveform::new(vec![0.0; 3200], 16_000, "t");
        let s = stft(&w, &StftConfig::default()).unwrap();
        assert_eq!(s.n_frames(), 11);
        assert_eq!(s.n_bins(), 513);
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_count_formula() {
        let w = Waveform::new(vec![0.1; 3200], 16_000, "t");
        let s = stft(&w, &StftConfig::default()).unwrap();
        assert_eq!(s.n_frames(), 3200 / 320 + 1);
    }

    #[test]
    fn tone_lands_in_the_expected_bin() {
        let w = sine(1000.0, 16_000, 1.0);
        let s = stft(&w, &StftConfig::default()).unwrap();
        let mid = s.n_frames() / 2;
        let row = s.values().row(mid);
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(argmax, (1000.0f64 * 1024.0 / 16_000.0).round() as usize);
    }

    #[test]
    fn magnitudes_match_direct_dft_on_small_frames() {
        // 120 samples of a deterministic chirp-ish signal, tiny frames.
        let samples: Vec<f32> = (0..120)
            .map(|i| ((i * i) as f32 * 0.01).sin() * 0.7)
            .collect();
        let w = Waveform::new(samples, 16_000, "t");
        let cfg = StftConfig {
            n_fft: 64,
            hop: 16,
            win_length: 64,
        };
        let s = stft(&w, &cfg).unwrap();

        let window = hann(64);
        for t in 0..s.n_frames() {
            let start = t as isize * 16 - 32;
            let frame: Vec<f64> = (0..64)
                .map(|j| {
                    f64::from(w.samples[reflect_index(start + j as isize, w.len())]) * window[j]
                })
                .collect();
            let oracle = dft_magnitude(&frame);
            for (k, &expected) in oracle.iter().enumerate() {
                let got = s.values()[[t, k]];
                let scale = expected.abs().max(1.0);
                assert!(
                    (got - expected).abs() / scale < 1e-6,
                    "frame {t} bin {k}: {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        let w = Waveform::new(vec![0.1; 64], 16_000, "t");
        let bad = StftConfig {
            n_fft: 32,
            hop: 8,
            win_length: 64,
        };
        assert!(stft(&w, &bad).is_err());
        let bad_hop = StftConfig {
            n_fft: 64,
            hop: 0,
            win_length: 64,
        };
        assert!(stft(&w, &bad_hop).is_err());
        let empty = Waveform::new(vec![], 16_000, "t");
        assert!(stft(&empty, &StftConfig::default()).is_err());
    }
}
