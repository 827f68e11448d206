//! Binary persistence for log-mel matrices.
//!
//! Layout (little-endian): magic `LMEL`, u32 frame count, u32 band count,
//! then frames x bands f32 values, row-major. The dB reference is not
//! stored; readers get the canonical 1.0.

use super::LogMelSpectrogram;
use ndarray::Array2;
use std::io::{self, Read, Write};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"LMEL";

#[derive(Debug, Error)]
pub enum LmelError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: expected LMEL")]
    BadMagic,
    #[error("value at frame {frame}, band {band} is not finite")]
    NonFinite { frame: usize, band: usize },
}

pub fn write_lmel<W: Write>(l: &LogMelSpectrogram, mut out: W) -> Result<(), LmelError> {
    out.write_all(MAGIC)?;
    out.write_all(&(l.n_frames() as u32).to_le_bytes())?;
    out.write_all(&(l.n_bands() as u32).to_le_bytes())?;
    for &v in l.values.iter() {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_lmel<R: Read>(mut input: R) -> Result<LogMelSpectrogram, LmelError> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(LmelError::BadMagic);
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let frames = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let bands = u32::from_le_bytes(word) as usize;

    let mut values = Array2::zeros((frames, bands));
    for t in 0..frames {
        for b in 0..bands {
            input.read_exact(&mut word)?;
            let v = f64::from(f32::from_le_bytes(word));
            if !v.is_finite() {
                return Err(LmelError::NonFinite { frame: t, band: b });
            }
            values[[t, b]] = v;
        }
    }
    Ok(LogMelSpectrogram {
        values,
        ref_value: super::LOG_REF,
    })
}
