//! Mono audio container, WAV I/O and per-file seeding.

mod seed;
mod wav;

pub use seed::{derive_seed, SeedContext};
pub use wav::{read_wav, write_wav, BitDepth};

use std::path::PathBuf;

use thiserror::Error;

use crate::scalar::{count, Real};

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio file not found: {0}")]
    MissingFile(PathBuf),
    #[error("malformed RIFF/WAVE data in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },
    #[error("unsupported WAV encoding in {path}: format tag {format_tag}, {bits} bits")]
    UnsupportedEncoding { path: PathBuf, format_tag: u16, bits: u16 },
    #[error("cannot write {path}: {source}")]
    Unwritable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty audio buffer")]
    Empty,
    #[error("sample rate must be positive")]
    ZeroRate,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
}

/// Mono signal with normalized amplitude and its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate_hz: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: u32) -> Result<Self, AudioError> {
        if sample_rate_hz == 0 {
            return Err(AudioError::ZeroRate);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::NonFinite(i));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    /// Builds a buffer whose samples are known to be finite and rate positive.
    pub(crate) fn from_parts(samples: Vec<T>, sample_rate_hz: u32) -> Self {
        debug_assert!(sample_rate_hz > 0);
        debug_assert!(samples.iter().all(|s| s.is_finite()));
        Self { samples, sample_rate_hz }
    }

    pub fn silence(len: usize, sample_rate_hz: u32) -> Result<Self, AudioError> {
        Self::new(vec![T::zero(); len], sample_rate_hz)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn peak(&self) -> T {
        self.samples.iter().fold(T::zero(), |m, s| m.max(s.abs()))
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: T) -> Self {
        Self::from_parts(self.samples.iter().map(|&s| s * gain).collect(), self.sample_rate_hz)
    }

    pub(crate) fn ensure_non_empty(&self) -> Result<(), AudioError> {
        if self.samples.is_empty() {
            Err(AudioError::Empty)
        } else {
            Ok(())
        }
    }
}

/// Root-mean-square amplitude.
pub fn rms<T: Real>(buffer: &AudioBuffer<T>) -> Result<T, AudioError> {
    buffer.ensure_non_empty()?;
    Ok(rms_of(buffer.samples()))
}

pub(crate) fn rms_of<T: Real>(x: &[T]) -> T {
    let energy: T = x.iter().map(|&s| s * s).sum();
    (energy / count(x.len())).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rms_of_constant_and_zero() {
        let b = AudioBuffer::new(vec![0.5f64; 1000], 16_000).unwrap();
        assert!((rms(&b).unwrap() - 0.5).abs() < 1e-12);
        let z = AudioBuffer::<f64>::silence(10, 16_000).unwrap();
        assert_eq!(rms(&z).unwrap(), 0.0);
    }

    #[test]
    fn rms_of_full_scale_sine() {
        let fs = 16_000.0;
        let x: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 440.0 * n as f64 / fs).sin())
            .collect();
        let b = AudioBuffer::new(x, 16_000).unwrap();
        assert!((rms(&b).unwrap() - 0.7071).abs() < 1e-3);
    }

    #[test]
    fn rms_rejects_empty() {
        let b = AudioBuffer::<f32>::new(vec![], 8000).unwrap();
        assert!(matches!(rms(&b), Err(AudioError::Empty)));
    }

    #[test]
    fn constructor_validates() {
        assert!(matches!(AudioBuffer::new(vec![0.0f64], 0), Err(AudioError::ZeroRate)));
        assert!(matches!(
            AudioBuffer::new(vec![0.0f64, f64::NAN], 8000),
            Err(AudioError::NonFinite(1))
        ));
    }

    proptest! {
        #[test]
        fn rms_is_scale_equivariant(
            xs in prop::collection::vec(-1.0f64..1.0, 1..200),
            k in -50.0f64..50.0,
        ) {
            let b = AudioBuffer::new(xs, 16_000).unwrap();
            let base = rms(&b).unwrap();
            let scaled = rms(&b.scaled(k)).unwrap();
            let expected = k.abs() * base;
            prop_assert!((scaled - expected).abs() <= 1e-9 * expected.max(1e-300));
        }
    }
}
