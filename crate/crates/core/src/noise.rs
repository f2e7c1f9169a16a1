//! Additive-noise laundering at an exact target SNR.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::audio::{read_wav, rms, rms_of, AudioBuffer, AudioError, SeedContext};
use crate::channel::{resample, ChannelError};
use crate::scalar::Real;

/// Standard deviation of the synthetic white-noise generator.
pub const WHITE_NOISE_STD: f64 = 0.1;

/// Noise names of the laundering grid, in report order.
pub const NOISE_NAMES: [&str; 5] = ["babble", "volvo", "white", "cafe", "street"];

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("undefined SNR: {0} has zero RMS")]
    UndefinedSnr(&'static str),
    #[error("signal and noise differ in {0}")]
    Mismatch(String),
    #[error("SNR target must be finite")]
    NonFiniteSnr,
    #[error("unknown noise '{0}'")]
    UnknownNoise(String),
    #[error("noise bank is missing or has unusable entries: {}", .0.join("; "))]
    BankGaps(Vec<String>),
    #[error("malformed noise manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Target signal-to-noise ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrTarget {
    pub snr_db: f64,
}

impl SnrTarget {
    pub fn new(snr_db: f64) -> Result<Self, NoiseError> {
        if snr_db.is_finite() {
            Ok(Self { snr_db })
        } else {
            Err(NoiseError::NonFiniteSnr)
        }
    }
}

/// i.i.d. zero-mean Gaussian noise with standard deviation 0.1.
pub fn generate_white_noise<T: Real>(n_samples: usize, sample_rate_hz: u32, ctx: &SeedContext) -> Result<AudioBuffer<T>, NoiseError> {
    if sample_rate_hz == 0 {
        return Err(AudioError::ZeroRate.into());
    }
    let mut rng = ctx.rng();
    let normal = Normal::new(0.0, WHITE_NOISE_STD).expect("valid std");
    let samples = (0..n_samples).map(|_| T::lit(normal.sample(&mut rng))).collect();
    Ok(AudioBuffer::from_parts(samples, sample_rate_hz))
}

/// Reads `n_samples` from `noise` starting at `offset`, wrapping circularly.
pub fn fit_noise_at_offset<T: Real>(noise: &AudioBuffer<T>, n_samples: usize, offset: usize) -> Result<AudioBuffer<T>, NoiseError> {
    noise.ensure_non_empty()?;
    let src = noise.samples();
    let samples = (0..n_samples).map(|i| src[(offset + i) % src.len()]).collect();
    Ok(AudioBuffer::from_parts(samples, noise.sample_rate_hz()))
}

/// Random circular excerpt of `noise` of length `n_samples`; the offset is drawn from `ctx`.
pub fn fit_noise_to_length<T: Real>(noise: &AudioBuffer<T>, n_samples: usize, ctx: &SeedContext) -> Result<AudioBuffer<T>, NoiseError> {
    noise.ensure_non_empty()?;
    let offset = ctx.rng().random_range(0..noise.len());
    fit_noise_at_offset(noise, n_samples, offset)
}

/// Gain applied to `noise` so that the mixture hits `target`.
pub fn snr_gain<T: Real>(signal: &AudioBuffer<T>, noise: &AudioBuffer<T>, target: SnrTarget) -> Result<f64, NoiseError> {
    let rs = rms(signal)?.to_f64_lossy();
    let rn = rms(noise)?.to_f64_lossy();
    if rs == 0.0 {
        return Err(NoiseError::UndefinedSnr("signal"));
    }
    if rn == 0.0 {
        return Err(NoiseError::UndefinedSnr("noise"));
    }
    Ok(rs / (rn * 10f64.powf(target.snr_db / 20.0)))
}

/// `signal + g * noise` with `g = rms(signal) / (rms(noise) * 10^(snr/20))`.
pub fn mix_at_snr<T: Real>(signal: &AudioBuffer<T>, noise: &AudioBuffer<T>, target: SnrTarget) -> Result<AudioBuffer<T>, NoiseError> {
    if signal.len() != noise.len() {
        return Err(NoiseError::Mismatch(format!("length ({} vs {})", signal.len(), noise.len())));
    }
    if signal.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(NoiseError::Mismatch(format!(
            "sample rate ({} vs {} Hz)",
            signal.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    let g = T::lit(snr_gain(signal, noise, target)?);
    let out = signal.samples().iter().zip(noise.samples()).map(|(&s, &n)| s + g * n).collect();
    Ok(AudioBuffer::from_parts(out, signal.sample_rate_hz()))
}

/// Measured SNR in dB between a clean signal and a residual.
pub fn measured_snr_db<T: Real>(signal: &[T], residual: &[T]) -> f64 {
    20.0 * (rms_of(signal).to_f64_lossy() / rms_of(residual).to_f64_lossy()).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource<T> {
    Recording(AudioBuffer<T>),
    SyntheticWhite,
}

/// Named noises available to the additive-noise attack.
#[derive(Debug, Clone, Default)]
pub struct NoiseBank<T> {
    entries: BTreeMap<String, NoiseSource<T>>,
    sample_rate_hz: u32,
}

/// Value of a manifest entry selecting the built-in white-noise generator.
pub const SYNTHETIC_WHITE: &str = "synthetic-white";

impl<T: Real> NoiseBank<T> {
    pub fn new(sample_rate_hz: u32) -> Self {
        Self { entries: BTreeMap::new(), sample_rate_hz }
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Adds a recording, resampling it to the working rate; silent recordings are rejected.
    pub fn insert_recording(&mut self, name: &str, audio: AudioBuffer<T>) -> Result<(), NoiseError> {
        let audio = if audio.sample_rate_hz() == self.sample_rate_hz {
            audio
        } else {
            resample(&audio, self.sample_rate_hz)?
        };
        if rms(&audio)? == T::zero() {
            return Err(NoiseError::BankGaps(vec![format!("{name}: recording is silent")]));
        }
        self.entries.insert(name.to_string(), NoiseSource::Recording(audio));
        Ok(())
    }

    pub fn insert_synthetic_white(&mut self, name: &str) {
        self.entries.insert(name.to_string(), NoiseSource::SyntheticWhite);
    }

    pub fn get(&self, name: &str) -> Option<&NoiseSource<T>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Loads a bank from `name -> path` pairs; a path equal to `synthetic-white`
    /// selects the generator. Every problem is collected before failing.
    pub fn load(sources: &BTreeMap<String, String>, base_dir: &Path, sample_rate_hz: u32) -> Result<Self, NoiseError> {
        let mut bank = Self::new(sample_rate_hz);
        let mut gaps = Vec::new();
        for (name, source) in sources {
            if source == SYNTHETIC_WHITE {
                bank.insert_synthetic_white(name);
                continue;
            }
            let path = resolve(base_dir, source);
            match read_wav::<T>(&path) {
                Ok(audio) => {
                    if let Err(e) = bank.insert_recording(name, audio) {
                        gaps.push(format!("{name}: {e}"));
                    }
                }
                Err(e) => gaps.push(format!("{name}: {e}")),
            }
        }
        if gaps.is_empty() {
            Ok(bank)
        } else {
            Err(NoiseError::BankGaps(gaps))
        }
    }

    /// Fails with every name in `required` that the bank cannot serve.
    pub fn require(&self, required: &[&str]) -> Result<(), NoiseError> {
        let missing: Vec<String> = required
            .iter()
            .filter(|n| !self.entries.contains_key(**n))
            .map(|n| format!("{n}: not configured"))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(NoiseError::BankGaps(missing))
        }
    }
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Parses a plain-text noise manifest: one `name path` pair per line, `#` comments.
pub fn parse_noise_manifest(text: &str) -> Result<BTreeMap<String, String>, NoiseError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, char::is_whitespace);
        let name = parts.next().unwrap_or("");
        let path = parts.next().map(str::trim).unwrap_or("");
        if path.is_empty() {
            return Err(NoiseError::Manifest { line: i + 1, reason: "expected '<name> <path>'".into() });
        }
        if out.insert(name.to_string(), path.to_string()).is_some() {
            return Err(NoiseError::Manifest { line: i + 1, reason: format!("duplicate noise '{name}'") });
        }
    }
    Ok(out)
}

/// Fits the named noise to the signal and mixes it at `target`.
pub fn apply_noise_attack<T: Real>(
    signal: &AudioBuffer<T>,
    bank: &NoiseBank<T>,
    noise_name: &str,
    target: SnrTarget,
    ctx: &SeedContext,
) -> Result<AudioBuffer<T>, NoiseError> {
    let source = bank.get(noise_name).ok_or_else(|| NoiseError::UnknownNoise(noise_name.to_string()))?;
    let noise = match source {
        NoiseSource::SyntheticWhite => generate_white_noise(signal.len(), signal.sample_rate_hz(), ctx)?,
        NoiseSource::Recording(rec) => fit_noise_to_length(rec, signal.len(), ctx)?,
    };
    mix_at_snr(signal, &noise, target)
}
