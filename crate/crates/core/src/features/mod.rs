//! Cepstral front-ends (LFCC, CQCC), delta regression and the feature file format.

mod cqcc;
mod lfcc;

pub use cqcc::{cqcc, cqt, uniform_grid, CqccConfig, CqtMatrix, MIN_FMIN_HZ};
pub use lfcc::{frame_signal, lfcc, linear_filterbank, LfccConfig, LFCC_RATE_HZ};

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::channel::{resample, ChannelError};
use crate::scalar::Real;

/// Magic bytes opening a feature file.
pub const FEATURE_MAGIC: &[u8; 4] = b"LBFM";
/// Feature file format version.
pub const FEATURE_VERSION: u32 = 1;
/// Delta regression half-width in frames.
pub const DELTA_WIDTH: usize = 2;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("audio has {samples} samples, shorter than one {window}-sample window")]
    TooShort { samples: usize, window: usize },
    #[error("front-end expects {expected} Hz audio, got {actual} Hz")]
    RateMismatch { expected: u32, actual: u32 },
    #[error("invalid front-end configuration: {0}")]
    InvalidConfig(String),
    #[error("feature matrix shape mismatch: {0}")]
    Shape(String),
    #[error("feature value at index {0} is not finite")]
    NonFinite(usize),
    #[error("malformed feature file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("cannot access feature file {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Lfcc,
    Cqcc,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Lfcc => 0,
            FeatureKind::Cqcc => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::Lfcc),
            1 => Some(FeatureKind::Cqcc),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Lfcc => "lfcc",
            FeatureKind::Cqcc => "cqcc",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lfcc" => Ok(FeatureKind::Lfcc),
            "cqcc" => Ok(FeatureKind::Cqcc),
            other => Err(FeatureError::InvalidConfig(format!("unknown feature kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Row-major `frames x dims` matrix of finite feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    frames: usize,
    dims: usize,
    values: Vec<T>,
    kind: FeatureKind,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(frames: usize, dims: usize, values: Vec<T>, kind: FeatureKind) -> Result<Self, FeatureError> {
        if frames.checked_mul(dims) != Some(values.len()) {
            return Err(FeatureError::Shape(format!("{frames} x {dims} needs {} values, got {}", frames * dims, values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(i));
        }
        Ok(Self { frames, dims, values, kind })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.values[t * self.dims..(t + 1) * self.dims]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.dims.max(1)).take(self.frames)
    }

    /// Concatenates matrices of one kind and width along the frame axis.
    pub fn stack(parts: &[FeatureMatrix<T>]) -> Result<Self, FeatureError> {
        let first = parts.first().ok_or_else(|| FeatureError::Shape("nothing to stack".into()))?;
        let mut values = Vec::with_capacity(parts.iter().map(|p| p.values.len()).sum());
        for p in parts {
            if p.dims != first.dims || p.kind != first.kind {
                return Err(FeatureError::Shape(format!(
                    "cannot stack {} x {} {} with {} {}",
                    p.frames, p.dims, p.kind, first.dims, first.kind
                )));
            }
            values.extend_from_slice(&p.values);
        }
        let frames = values.len() / first.dims.max(1);
        Ok(Self { frames, dims: first.dims, values, kind: first.kind })
    }

    /// Serializes in the `LBFM` layout (values stored as f32 little-endian).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + 4 * self.values.len());
        out.extend_from_slice(FEATURE_MAGIC);
        out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.frames as u32).to_le_bytes());
        out.extend_from_slice(&(self.dims as u32).to_le_bytes());
        out.push(self.kind.code());
        for v in &self.values {
            out.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, FeatureError> {
        let bad = |reason: &str| FeatureError::Format { path: path.to_path_buf(), reason: reason.to_string() };
        if bytes.len() < 17 || &bytes[..4] != FEATURE_MAGIC {
            return Err(bad("missing LBFM header"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != FEATURE_VERSION {
            return Err(bad(&format!("unsupported version {}", word(4))));
        }
        let frames = word(8) as usize;
        let dims = word(12) as usize;
        let kind = FeatureKind::from_code(bytes[16]).ok_or_else(|| bad(&format!("unknown kind byte {}", bytes[16])))?;
        let body = &bytes[17..];
        if frames.checked_mul(dims).and_then(|n| n.checked_mul(4)) != Some(body.len()) {
            return Err(bad(&format!("{frames} x {dims} header does not match {} payload bytes", body.len())));
        }
        let values = body.chunks_exact(4).map(|c| T::lit(f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))).collect();
        Self::new(frames, dims, values, kind).map_err(|e| bad(&e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<(), FeatureError> {
        let io = |source| FeatureError::Io { path: path.to_path_buf(), source };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn read(path: &Path) -> Result<Self, FeatureError> {
        let bytes = fs::read(path).map_err(|source| FeatureError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes, path)
    }
}

/// Regression deltas over `rows` (frames x dims, row-major) with edge replication.
fn deltas(rows: &[f64], frames: usize, dims: usize) -> Vec<f64> {
    let norm = 2.0 * (1..=DELTA_WIDTH).map(|t| (t * t) as f64).sum::<f64>();
    let at = |t: isize, d: usize| rows[(t.clamp(0, frames as isize - 1) as usize) * dims + d];
    let mut out = vec![0.0; frames * dims];
    for t in 0..frames {
        for d in 0..dims {
            let mut acc = 0.0;
            for tau in 1..=DELTA_WIDTH {
                let ti = t as isize;
                let tau_i = tau as isize;
                acc += tau as f64 * (at(ti + tau_i, d) - at(ti - tau_i, d));
            }
            out[t * dims + d] = acc / norm;
        }
    }
    out
}

/// Appends regression deltas and delta-deltas: `[static, delta, delta-delta]`.
pub fn append_deltas<T: Real>(features: &FeatureMatrix<T>) -> FeatureMatrix<T> {
    let (frames, dims) = (features.frames, features.dims);
    let stat: Vec<f64> = features.values.iter().map(|v| v.to_f64_lossy()).collect();
    let d1 = if frames == 0 { Vec::new() } else { deltas(&stat, frames, dims) };
    let d2 = if frames == 0 { Vec::new() } else { deltas(&d1, frames, dims) };
    let mut values = Vec::with_capacity(3 * stat.len());
    for t in 0..frames {
        for src in [&stat, &d1, &d2] {
            values.extend(src[t * dims..(t + 1) * dims].iter().map(|&v| T::lit(v)));
        }
    }
    FeatureMatrix { frames, dims: 3 * dims, values, kind: features.kind }
}

/// Extracts features of `kind` with default configurations, resampling to 16 kHz first
/// when needed (LFCC itself only accepts 16 kHz input).
pub fn extract<T: Real>(audio: &AudioBuffer<T>, kind: FeatureKind) -> Result<FeatureMatrix<T>, FeatureError> {
    let working = if audio.sample_rate_hz() == LFCC_RATE_HZ { audio.clone() } else { resample(audio, LFCC_RATE_HZ)? };
    match kind {
        FeatureKind::Lfcc => lfcc(&working, &LfccConfig::default()),
        FeatureKind::Cqcc => cqcc(&working, &CqccConfig::default()),
    }
}
