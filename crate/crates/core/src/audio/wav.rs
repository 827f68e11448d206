//! Minimal RIFF/WAVE codec.
//!
//! Reads 16-bit integer PCM (format tag 1) and 32-bit IEEE float (format
//! tag 3), any channel count; multi-channel input is downmixed to mono by
//! arithmetic channel mean. The writer emits a canonical 44-byte header
//! followed by one data chunk.

use super::Waveform;
use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavError {
    #[error("malformed container: {0}")]
    MalformedContainer(&'static str),
    #[error("unsupported codec: format tag {format_tag}, {bits_per_sample} bits per sample")]
    UnsupportedCodec { format_tag: u16, bits_per_sample: u16 },
    #[error("truncated data chunk: declared {declared} bytes, found {available}")]
    TruncatedData { declared: usize, available: usize },
}

/// Output sample encoding for [`encode_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    /// 16-bit integer PCM; samples are clamped to [-1, 32767/32768] and
    /// rounded to the nearest integer.
    Pcm16,
    /// 32-bit IEEE float; lossless for f32 samples.
    Float32,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WavError> {
        if self.pos + n > self.bytes.len() {
            return Err(WavError::MalformedContainer("unexpected end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WavError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Decode a WAV file into a mono [`Waveform`].
///
/// 16-bit samples map to [-1, 1) via division by 32768; floats are taken
/// as stored. The returned `source_id` is empty and is filled in by callers
/// that know the file identity.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform, WavError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != b"RIFF" {
        return Err(WavError::MalformedContainer("missing RIFF magic"));
    }
    let _riff_size = r.u32()?;
    if r.take(4)? != b"WAVE" {
        return Err(WavError::MalformedContainer("missing WAVE magic"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // tag, channels, rate, bits
    loop {
        if r.pos >= bytes.len() {
            return Err(WavError::MalformedContainer("no data chunk"));
        }
        let id: [u8; 4] = r.take(4)?.try_into().unwrap();
        let size = r.u32()? as usize;
        match &id {
            b"fmt " => {
                if size < 16 {
                    return Err(WavError::MalformedContainer("fmt chunk too small"));
                }
                let body = r.take(size)?;
                let tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes([body[4], body[5], body[6], body[7]]);
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if channels == 0 {
                    return Err(WavError::MalformedContainer("zero channels"));
                }
                if rate == 0 {
                    return Err(WavError::MalformedContainer("zero sample rate"));
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                let (tag, channels, rate, bits) = fmt
                    .ok_or(WavError::MalformedContainer("data chunk before fmt chunk"))?;
                let available = bytes.len() - r.pos;
                if available < size {
                    return Err(WavError::TruncatedData {
                        declared: size,
                        available,
                    });
                }
                let data = r.take(size)?;
                let samples = decode_samples(data, tag, channels, bits)?;
                return Ok(Waveform::new(samples, rate, ""));
            }
            _ => {
                // Skip unknown chunks (LIST, fact, ...), honoring word alignment.
                r.take(size + (size & 1))?;
            }
        }
    }
}

fn decode_samples(
    data: &[u8],
    tag: u16,
    channels: u16,
    bits: u16,
) -> Result<Vec<f32>, WavError> {
    let bytes_per_sample = match (tag, bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_IEEE_FLOAT, 32) => 4,
        _ => {
            return Err(WavError::UnsupportedCodec {
                format_tag: tag,
                bits_per_sample: bits,
            })
        }
    };
    let frame_bytes = bytes_per_sample * channels as usize;
    if frame_bytes == 0 || !data.len().is_multiple_of(frame_bytes) {
        return Err(WavError::MalformedContainer("data chunk not frame-aligned"));
    }
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    for frame in data.chunks_exact(frame_bytes) {
        let mut acc = 0.0f64;
        for ch in frame.chunks_exact(bytes_per_sample) {
            let v = match tag {
                FORMAT_PCM => f64::from(i16::from_le_bytes([ch[0], ch[1]])) / 32768.0,
                _ => f64::from(f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]])),
            };
            acc += v;
        }
        samples.push((acc / f64::from(channels)) as f32);
    }
    Ok(samples)
}

/// Encode a waveform as a mono WAV file.
pub fn encode_wav(w: &Waveform, depth: BitDepth) -> Vec<u8> {
    let (tag, bits): (u16, u16) = match depth {
        BitDepth::Pcm16 => (FORMAT_PCM, 16),
        BitDepth::Float32 => (FORMAT_IEEE_FLOAT, 32),
    };
    let bytes_per_sample = u32::from(bits) / 8;
    let data_size = w.samples.len() as u32 * bytes_per_sample;
    let byte_rate = w.sample_rate * bytes_per_sample;

    let mut out = Vec::with_capacity(44 + data_size as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_size).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&w.sample_rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_size.to_le_bytes());
    match depth {
        BitDepth::Pcm16 => {
            for &s in &w.samples {
                let q = (f64::from(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
        BitDepth::Float32 => {
            for &s in &w.samples {
                out.extend_from_slice(&s.to_le_bytes());
            }
        }
    }
    out
}
