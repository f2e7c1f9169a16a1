use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{AudioBuffer, AudioError};
use crate::scalar::{count, Real};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Sample encoding used when writing a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Pcm16,
    Float32,
}

struct Format {
    tag: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

fn malformed(path: &Path, reason: impl Into<String>) -> AudioError {
    AudioError::MalformedHeader { path: path.to_path_buf(), reason: reason.into() }
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Reads a PCM16 or float32 RIFF/WAVE file, averaging channels down to mono.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => AudioError::MissingFile(path.to_path_buf()),
        _ => AudioError::Io { path: path.to_path_buf(), source: e },
    })?;
    decode(&bytes, path)
}

fn decode<T: Real>(bytes: &[u8], path: &Path) -> Result<AudioBuffer<T>, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed(path, "missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(size).min(bytes.len());
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed(path, "fmt chunk shorter than 16 bytes"));
                }
                let mut tag = u16_at(body, 0);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(malformed(path, "truncated WAVE_FORMAT_EXTENSIBLE chunk"));
                    }
                    // First two bytes of the sub-format GUID carry the real tag.
                    tag = u16_at(body, 24);
                }
                format = Some(Format {
                    tag,
                    channels: u16_at(body, 2),
                    rate: u32_at(body, 4),
                    bits: u16_at(body, 14),
                });
            }
            b"data" => {
                data = Some(body);
            }
            _ => {}
        }
        pos = body_start.saturating_add(size).saturating_add(size & 1);
    }
    let format = format.ok_or_else(|| malformed(path, "no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed(path, "no data chunk"))?;
    if format.channels == 0 {
        return Err(malformed(path, "zero channels"));
    }
    if format.rate == 0 {
        return Err(malformed(path, "zero sample rate"));
    }
    let sample_bytes = match (format.tag, format.bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        (tag, bits) => {
            return Err(AudioError::UnsupportedEncoding { path: path.to_path_buf(), format_tag: tag, bits })
        }
    };
    let channels = usize::from(format.channels);
    let frame_bytes = sample_bytes * channels;
    let n_frames = data.len() / frame_bytes;
    let mut samples = Vec::with_capacity(n_frames);
    let inv_channels = T::one() / count::<T>(channels);
    for frame in data.chunks_exact(frame_bytes) {
        let mut acc = 0.0f64;
        for ch in frame.chunks_exact(sample_bytes) {
            acc += if sample_bytes == 2 {
                f64::from(i16::from_le_bytes([ch[0], ch[1]])) / 32768.0
            } else {
                f64::from(f32::from_le_bytes([ch[0], ch[1], ch[2], ch[3]]))
            };
        }
        let v = if channels == 1 { T::lit(acc) } else { T::lit(acc) * inv_channels };
        if !v.is_finite() {
            return Err(malformed(path, format!("non-finite sample at frame {}", samples.len())));
        }
        samples.push(v);
    }
    Ok(AudioBuffer::from_parts(samples, format.rate))
}

/// Quantizes one normalized sample to a 16-bit code, clipping to [-1, 1).
pub(crate) fn quantize_pcm16<T: Real>(x: T) -> i16 {
    let scaled = (x.to_f64_lossy() * 32768.0).round();
    scaled.clamp(-32768.0, 32767.0) as i16
}

/// Writes `buffer` as a mono RIFF/WAVE file.
pub fn write_wav<T: Real>(buffer: &AudioBuffer<T>, path: impl AsRef<Path>, bit_depth: BitDepth) -> Result<(), AudioError> {
    let path = path.as_ref();
    buffer.ensure_non_empty()?;
    let (tag, bits) = match bit_depth {
        BitDepth::Pcm16 => (FORMAT_PCM, 16u16),
        BitDepth::Float32 => (FORMAT_FLOAT, 32u16),
    };
    let block_align = bits / 8;
    let data_len = buffer.len() * usize::from(block_align);
    let data_len32 = u32::try_from(data_len).map_err(|_| AudioError::Unwritable {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "data exceeds 4 GiB RIFF limit"),
    })?;

    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate_hz().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate_hz() * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len32.to_le_bytes());
    match bit_depth {
        BitDepth::Pcm16 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&quantize_pcm16(s).to_le_bytes());
            }
        }
        BitDepth::Float32 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&(s.to_f64_lossy() as f32).to_le_bytes());
            }
        }
    }

    let unwritable = |source| AudioError::Unwritable { path: path.to_path_buf(), source };
    let file = fs::File::create(path).map_err(unwritable)?;
    let mut w = BufWriter::new(file);
    w.write_all(&out).map_err(unwritable)?;
    w.flush().map_err(unwritable)
}
