//! Data augmentation: mixup, spectrogram masking, and additive noise.
//!
//! Noise is mixed additively at a target SNR: the noise segment is scaled by
//! `sqrt(P_clean / (P_noise * 10^(snr/10)))` with `P` the mean square
//! amplitude. Masked spectrogram cells are filled with the input's mean by
//! default (configurable); a dB-scaled matrix keeps its level statistics
//! instead of acquiring an artificial silence floor.

use crate::audio::Waveform;
use crate::dsp::LogMelSpectrogram;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("invalid mixup alpha {0}: must be > 0")]
    InvalidAlpha(f64),
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize), b: (usize, usize) },
    #[error("invalid augment config: {0}")]
    InvalidConfig(String),
    #[error("silent {0} signal")]
    SilentInput(&'static str),
    #[error("sample rate mismatch: clean {clean} Hz vs noise {noise} Hz")]
    RateMismatch { clean: u32, noise: u32 },
    #[error("invalid soft label ({neg}, {pos})")]
    InvalidLabel { neg: f64, pos: f64 },
}

/// Fill value for masked spectrogram cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskFill {
    /// Mean of the input spectrogram (computed before masking).
    Mean,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    /// Beta(alpha, alpha) parameter of the mixup weight.
    pub alpha: f64,
    pub n_freq_masks: usize,
    /// Maximum width of one frequency mask, in mel bands.
    pub max_freq_width: usize,
    pub n_time_masks: usize,
    /// Maximum width of one time mask, as a fraction of the frame count.
    pub max_time_frac: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub mask_fill: MaskFill,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            alpha: 0.5,
            n_freq_masks: 2,
            max_freq_width: 8,
            n_time_masks: 2,
            max_time_frac: 0.10,
            snr_min_db: 0.0,
            snr_max_db: 15.0,
            mask_fill: MaskFill::Mean,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(AugmentError::InvalidAlpha(self.alpha));
        }
        if !(0.0..=1.0).contains(&self.max_time_frac) {
            return Err(AugmentError::InvalidConfig(format!(
                "max_time_frac {} outside [0, 1]",
                self.max_time_frac
            )));
        }
        if self.snr_min_db > self.snr_max_db {
            return Err(AugmentError::InvalidConfig(format!(
                "snr_min_db {} > snr_max_db {}",
                self.snr_min_db, self.snr_max_db
            )));
        }
        Ok(())
    }
}

/// Two nonnegative class weights (negative, positive) summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftLabel {
    neg: f64,
    pos: f64,
}

impl SoftLabel {
    pub fn new(neg: f64, pos: f64) -> Result<Self, AugmentError> {
        let ok = (0.0..=1.0).contains(&neg)
            && (0.0..=1.0).contains(&pos)
            && (neg + pos - 1.0).abs() <= 1e-9;
        if ok {
            Ok(SoftLabel { neg, pos })
        } else {
            Err(AugmentError::InvalidLabel { neg, pos })
        }
    }

    pub fn negative() -> Self {
        SoftLabel { neg: 1.0, pos: 0.0 }
    }

    pub fn positive() -> Self {
        SoftLabel { neg: 0.0, pos: 1.0 }
    }

    pub fn neg(&self) -> f64 {
        self.neg
    }

    pub fn pos(&self) -> f64 {
        self.pos
    }
}

/// Draw a mixup weight from Beta(alpha, alpha).
pub fn sample_mixup_lambda<R: Rng>(alpha: f64, rng: &mut R) -> Result<f64, AugmentError> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(AugmentError::InvalidAlpha(alpha));
    }
    let beta = Beta::new(alpha, alpha).map_err(|_| AugmentError::InvalidAlpha(alpha))?;
    Ok(beta.sample(rng))
}

/// Convex combination of two feature matrices and their labels.
///
/// `lambda` 1 returns `(xa, ya)` unchanged and 0 returns `(xb, yb)`.
pub fn mixup(
    xa: &Array2<f64>,
    xb: &Array2<f64>,
    ya: SoftLabel,
    yb: SoftLabel,
    lambda: f64,
) -> Result<(Array2<f64>, SoftLabel), AugmentError> {
    if xa.dim() != xb.dim() {
        return Err(AugmentError::ShapeMismatch {
            a: xa.dim(),
            b: xb.dim(),
        });
    }
    debug_assert!((0.0..=1.0).contains(&lambda));
    if lambda == 1.0 {
        return Ok((xa.clone(), ya));
    }
    if lambda == 0.0 {
        return Ok((xb.clone(), yb));
    }
    let x = xa * lambda + xb * (1.0 - lambda);
    let y = SoftLabel {
        neg: lambda * ya.neg + (1.0 - lambda) * yb.neg,
        pos: lambda * ya.pos + (1.0 - lambda) * yb.pos,
    };
    Ok((x, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskAxis {
    Frequency,
    Time,
}

/// One applied mask: `width` consecutive bands or frames starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskSpec {
    pub axis: MaskAxis,
    pub start: usize,
    pub width: usize,
}

/// Random frequency- and time-masking of a log-mel matrix.
///
/// Draws `n_freq_masks` band masks of width `U{0..=max_freq_width}` and
/// `n_time_masks` frame masks of width `U{0..=floor(max_time_frac * frames)}`.
/// Returns the masked matrix along with the drawn masks; cells outside the
/// masks are bit-identical to the input.
pub fn spec_augment<R: Rng>(
    l: &LogMelSpectrogram,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(LogMelSpectrogram, Vec<MaskSpec>), AugmentError> {
    cfg.validate()?;
    let (frames, bands) = l.values.dim();
    if cfg.n_freq_masks > 0 && cfg.max_freq_width > bands {
        return Err(AugmentError::InvalidConfig(format!(
            "max_freq_width {} exceeds {} mel bands",
            cfg.max_freq_width, bands
        )));
    }
    let max_time_width = (cfg.max_time_frac * frames as f64).floor() as usize;

    let fill = match cfg.mask_fill {
        MaskFill::Mean => l.values.mean().unwrap_or(0.0),
        MaskFill::Value(v) => v,
    };

    let mut out = l.values.clone();
    let mut masks = Vec::with_capacity(cfg.n_freq_masks + cfg.n_time_masks);
    for _ in 0..cfg.n_freq_masks {
        let width = rng.random_range(0..=cfg.max_freq_width);
        let start = rng.random_range(0..=bands - width);
        masks.push(MaskSpec {
            axis: MaskAxis::Frequency,
            start,
            width,
        });
        out.slice_mut(ndarray::s![.., start..start + width]).fill(fill);
    }
    for _ in 0..cfg.n_time_masks {
        let width = rng.random_range(0..=max_time_width);
        let start = rng.random_range(0..=frames - width);
        masks.push(MaskSpec {
            axis: MaskAxis::Time,
            start,
            width,
        });
        out.slice_mut(ndarray::s![start..start + width, ..]).fill(fill);
    }
    Ok((
        LogMelSpectrogram {
            values: out,
            ref_value: l.ref_value,
        },
        masks,
    ))
}

/// Mix `noise` into `clean` at the requested SNR.
///
/// The noise is read from a random offset and wrapped around to cover the
/// clean length, then scaled so `10 * log10(P_clean / P_scaled_noise)`
/// equals `snr_db` for the selected segment.
pub fn add_noise<R: Rng>(
    clean: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    rng: &mut R,
) -> Result<Waveform, AugmentError> {
    if clean.sample_rate != noise.sample_rate {
        return Err(AugmentError::RateMismatch {
            clean: clean.sample_rate,
            noise: noise.sample_rate,
        });
    }
    if noise.is_empty() {
        return Err(AugmentError::SilentInput("noise"));
    }
    let p_clean = mean_square(&clean.samples);
    if p_clean == 0.0 {
        return Err(AugmentError::SilentInput("clean"));
    }

    let offset = rng.random_range(0..noise.len());
    let segment: Vec<f64> = (0..clean.len())
        .map(|i| f64::from(noise.samples[(offset + i) % noise.len()]))
        .collect();
    let p_noise = segment.iter().map(|&v| v * v).sum::<f64>() / segment.len().max(1) as f64;
    if p_noise == 0.0 {
        return Err(AugmentError::SilentInput("noise"));
    }

    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let samples = clean
        .samples
        .iter()
        .zip(segment.iter())
        .map(|(&c, &n)| (f64::from(c) + gain * n) as f32)
        .collect();
    Ok(Waveform::new(
        samples,
        clean.sample_rate,
        clean.source_id.clone(),
    ))
}

fn mean_square(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::run_rng;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn lambda_draws_stay_in_unit_interval() {
        let mut rng = run_rng(3);
        for alpha in [0.1, 0.5, 1.0, 4.0] {
            for _ in 0..1000 {
                let l = sample_mixup_lambda(alpha, &mut rng).unwrap();
                assert!((0.0..=1.0).contains(&l));
            }
        }
        assert!(sample_mixup_lambda(0.0, &mut rng).is_err());
        assert!(sample_mixup_lambda(-1.0, &mut rng).is_err());
    }

    #[test]
    fn beta_half_is_symmetric_around_one_half() {
        let mut rng = run_rng(11);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| sample_mixup_lambda(0.5, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn beta_one_is_uniform_by_ks_test() {
        let mut rng = run_rng(17);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n)
            .map(|_| sample_mixup_lambda(1.0, &mut rng).unwrap())
            .collect();
        draws.sort_by(f64::total_cmp);
        // Kolmogorov-Smirnov statistic against the uniform CDF F(x) = x.
        let mut d = 0.0f64;
        for (i, &x) in draws.iter().enumerate() {
            d = d.max((x - i as f64 / n as f64).abs());
            d = d.max(((i + 1) as f64 / n as f64 - x).abs());
        }
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn mixup_identity_and_arithmetic() {
        let xa = array![[2.0, -1.0], [0.5, 3.0]];
        let xb = array![[6.0, 1.0], [-0.5, 0.0]];
        let (x1, y1) = mixup(&xa, &xb, SoftLabel::positive(), SoftLabel::negative(), 1.0).unwrap();
        assert_eq!(x1, xa);
        assert_eq!(y1, SoftLabel::positive());

        let (xh, yh) = mixup(&xa, &xb, SoftLabel::positive(), SoftLabel::negative(), 0.5).unwrap();
        assert_eq!(xh[[0, 0]], 4.0);
        assert_eq!(yh.neg(), 0.5);
        assert_eq!(yh.pos(), 0.5);

        let (xq, _) = mixup(
            &array![[2.0]],
            &array![[6.0]],
            SoftLabel::negative(),
            SoftLabel::negative(),
            0.25,
        )
        .unwrap();
        assert_eq!(xq[[0, 0]], 5.0);

        assert!(matches!(
            mixup(&xa, &array![[1.0]], SoftLabel::negative(), SoftLabel::negative(), 0.5),
            Err(AugmentError::ShapeMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn mixup_stays_in_the_convex_hull(
            a in proptest::collection::vec(-10.0f64..10.0, 6),
            b in proptest::collection::vec(-10.0f64..10.0, 6),
            lambda in 0.0f64..=1.0,
            pa in 0.0f64..=1.0,
            pb in 0.0f64..=1.0,
        ) {
            let xa = Array2::from_shape_vec((2, 3), a).unwrap();
            let xb = Array2::from_shape_vec((2, 3), b).unwrap();
            let ya = SoftLabel::new(1.0 - pa, pa).unwrap();
            let yb = SoftLabel::new(1.0 - pb, pb).unwrap();
            let (x, y) = mixup(&xa, &xb, ya, yb, lambda).unwrap();
            for ((&v, &va), &vb) in x.iter().zip(xa.iter()).zip(xb.iter()) {
                prop_assert!(v >= va.min(vb) - 1e-12 && v <= va.max(vb) + 1e-12);
            }
            prop_assert!((y.neg() + y.pos() - 1.0).abs() <= 1e-9);
        }
    }

    fn lmel(values: Array2<f64>) -> LogMelSpectrogram {
        LogMelSpectrogram {
            values,
            ref_value: 1.0,
        }
    }

    #[test]
    fn zero_masks_is_the_identity() {
        let l = lmel(array![[1.0, 2.0], [3.0, 4.0]]);
        let cfg = AugmentConfig {
            n_freq_masks: 0,
            n_time_masks: 0,
            ..AugmentConfig::default()
        };
        let (out, masks) = spec_augment(&l, &cfg, &mut run_rng(1)).unwrap();
        assert_eq!(out.values, l.values);
        assert!(masks.is_empty());
    }

    #[test]
    fn freq_mask_fills_exactly_the_declared_bands() {
        // 3 frames x 4 bands; force one full-width-2 frequency mask by
        // drawing until the rng produces width 2.
        let l = lmel(array![
            [0.0, 1.0, 2.0, 3.0],
            [4.0, 5.0, 6.0, 7.0],
            [8.0, 9.0, 10.0, 11.0]
        ]);
        let mean = 5.5;
        let cfg = AugmentConfig {
            n_freq_masks: 1,
            max_freq_width: 2,
            n_time_masks: 0,
            ..AugmentConfig::default()
        };
        let mut seed = 0u64;
        let (out, mask) = loop {
            let (out, masks) = spec_augment(&l, &cfg, &mut run_rng(seed)).unwrap();
            if masks[0].width == 2 {
                break (out, masks[0]);
            }
            seed += 1;
        };
        assert_eq!(mask.axis, MaskAxis::Frequency);
        for t in 0..3 {
            for b in 0..4 {
                let expected = if (mask.start..mask.start + 2).contains(&b) {
                    mean
                } else {
                    l.values[[t, b]]
                };
                assert_eq!(out.values[[t, b]], expected);
            }
        }
    }

    #[test]
    fn only_declared_cells_change_and_seeds_reproduce() {
        let values = Array2::from_shape_fn((40, 16), |(t, b)| (t * 16 + b) as f64 * 0.1);
        let l = lmel(values);
        let cfg = AugmentConfig {
            max_freq_width: 4,
            ..AugmentConfig::default()
        };
        let (out1, masks1) = spec_augment(&l, &cfg, &mut run_rng(99)).unwrap();
        let (out2, masks2) = spec_augment(&l, &cfg, &mut run_rng(99)).unwrap();
        assert_eq!(out1.values, out2.values);
        assert_eq!(masks1, masks2);

        let in_mask = |t: usize, b: usize| {
            masks1.iter().any(|m| match m.axis {
                MaskAxis::Frequency => (m.start..m.start + m.width).contains(&b),
                MaskAxis::Time => (m.start..m.start + m.width).contains(&t),
            })
        };
        let mut masked_cells = 0usize;
        for ((t, b), &v) in out1.values.indexed_iter() {
            if in_mask(t, b) {
                masked_cells += 1;
            } else {
                assert_eq!(v, l.values[[t, b]], "untouched cell ({t}, {b}) changed");
            }
        }
        let bound = cfg.n_freq_masks * cfg.max_freq_width * 40
            + cfg.n_time_masks * (0.1f64 * 40.0) as usize * 16;
        assert!(masked_cells <= bound);
    }

    #[test]
    fn infeasible_mask_width_is_rejected() {
        let l = lmel(array![[1.0, 2.0]]);
        let cfg = AugmentConfig {
            max_freq_width: 3,
            ..AugmentConfig::default()
        };
        assert!(matches!(
            spec_augment(&l, &cfg, &mut run_rng(0)),
            Err(AugmentError::InvalidConfig(_))
        ));
    }

    #[test]
    fn equal_power_zero_snr_has_unit_gain() {
        let clean = Waveform::new(vec![0.5, -0.5, 0.5, -0.5], 16_000, "c");
        let noise = Waveform::new(vec![0.5, 0.5, 0.5, 0.5], 16_000, "n");
        let out = add_noise(&clean, &noise, 0.0, &mut run_rng(5)).unwrap();
        for (o, c) in out.samples.iter().zip(clean.samples.iter()) {
            assert_eq!(o - c, 0.5); // gain exactly 1.0 on a constant segment
        }
    }

    #[test]
    fn achieved_snr_matches_target() {
        let mut rng = run_rng(21);
        for trial in 0..50 {
            let n = 2000 + trial * 7;
            let clean = Waveform::new(
                (0..n).map(|i| 0.3 * (i as f32 * 0.05).sin()).collect(),
                16_000,
                "c",
            );
            let noise = Waveform::new(
                (0..777).map(|i| 0.2 * (i as f32 * 0.31).cos()).collect(),
                16_000,
                "n",
            );
            let snr = -5.0 + (trial as f64) * 0.5;
            let out = add_noise(&clean, &noise, snr, &mut rng).unwrap();
            assert_eq!(out.len(), clean.len());

            let diff: Vec<f32> = out
                .samples
                .iter()
                .zip(clean.samples.iter())
                .map(|(o, c)| o - c)
                .collect();
            let measured =
                10.0 * (mean_square(&clean.samples) / mean_square(&diff)).log10();
            assert!(
                (measured - snr).abs() < 0.01,
                "target {snr} dB, measured {measured} dB"
            );
        }
    }

    #[test]
    fn high_snr_output_approaches_clean() {
        let clean = Waveform::new(
            (0..4000).map(|i| 0.4 * (i as f32 * 0.02).sin()).collect(),
            16_000,
            "c",
        );
        let noise = Waveform::new(
            (0..4000).map(|i| 0.4 * (i as f32 * 0.13).cos()).collect(),
            16_000,
            "n",
        );
        let out = add_noise(&clean, &noise, 60.0, &mut run_rng(9)).unwrap();
        let num: f64 = out
            .samples
            .iter()
            .zip(clean.samples.iter())
            .map(|(o, c)| (f64::from(o - c)).powi(2))
            .sum();
        let den: f64 = clean.samples.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
        let rel = (num / den).sqrt();
        assert!(rel < 1.05e-3, "relative difference {rel}");
    }

    #[test]
    fn silent_and_mismatched_inputs_are_rejected() {
        let clean = Waveform::new(vec![0.5; 100], 16_000, "c");
        let silent = Waveform::new(vec![0.0; 100], 16_000, "n");
        let wrong_rate = Waveform::new(vec![0.5; 100], 8_000, "n");
        assert!(matches!(
            add_noise(&clean, &silent, 0.0, &mut run_rng(0)),
            Err(AugmentError::SilentInput("noise"))
        ));
        assert!(matches!(
            add_noise(&silent, &clean, 0.0, &mut run_rng(0)),
            Err(AugmentError::SilentInput("clean"))
        ));
        assert!(matches!(
            add_noise(&clean, &wrong_rate, 0.0, &mut run_rng(0)),
            Err(AugmentError::RateMismatch { .. })
        ));
    }

    #[test]
    fn add_noise_is_deterministic_given_the_seed() {
        let clean = Waveform::new(
            (0..500).map(|i| 0.3 * (i as f32 * 0.04).sin()).collect(),
            16_000,
            "c",
        );
        let noise = Waveform::new(
            (0..900).map(|i| 0.2 * (i as f32 * 0.07).cos()).collect(),
            16_000,
            "n",
        );
        let a = add_noise(&clean, &noise, 7.5, &mut run_rng(42)).unwrap();
        let b = add_noise(&clean, &noise, 7.5, &mut run_rng(42)).unwrap();
        assert_eq!(a.samples, b.samples);
    }
}
