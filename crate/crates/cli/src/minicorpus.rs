//! Synthetic mini-corpus for hermetic end-to-end runs.
//!
//! "Bonafide" utterances are harmonic tones with vibrato, a syllable-like envelope
//! and soft noise; "spoof" utterances are drawn from the same generator and passed
//! through a notch filter and coarse amplitude quantization. Noise-bank entries are
//! synthetic stand-ins. None of this is speech data.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use launderbench_core::audio::{write_wav, AudioBuffer, BitDepth};
use launderbench_core::channel::{apply_filter, Biquad, FilterCascade};
use launderbench_core::eval::{Key, Trial, TrialSet};
use launderbench_core::noise::SYNTHETIC_WHITE;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const MINI_RATE_HZ: u32 = 16_000;
/// Utterances per class and partition.
pub const MINI_PER_CLASS: usize = 20;
pub const MINI_DURATION_S: f64 = 0.8;
/// Centre frequency and quality factor of the spoof notch.
pub const SPOOF_NOTCH_HZ: f64 = 2000.0;
pub const SPOOF_NOTCH_Q: f64 = 1.0;
/// Quantization step of the spoof signal (5-bit amplitude grid over [-1, 1]).
pub const SPOOF_QUANT_STEP: f64 = 2.0 / 256.0;
/// Standard deviation of the soft noise added to every utterance.
pub const SOFT_NOISE_STD: f64 = 0.005;
const NOISE_LEN_S: f64 = 3.0;

/// Paths of a generated mini-corpus.
#[derive(Debug, Clone)]
pub struct MiniCorpus {
    pub root: PathBuf,
    /// All utterances, `<utt_id>.wav`.
    pub audio_dir: PathBuf,
    pub train_protocol: PathBuf,
    pub eval_protocol: PathBuf,
    pub grid_config: PathBuf,
}

fn partition_ids(prefix: &str) -> Vec<(String, Key)> {
    (0..2 * MINI_PER_CLASS)
        .map(|i| {
            let key = if i < MINI_PER_CLASS { Key::Bonafide } else { Key::Spoof };
            (format!("MINI_{prefix}_{i:04}"), key)
        })
        .collect()
}

/// Harmonic tone with vibrato, a raised-sine envelope and soft Gaussian noise.
pub fn harmonic_utterance(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = f64::from(MINI_RATE_HZ);
    let n = (MINI_DURATION_S * fs) as usize;
    let f0 = rng.random_range(100.0..240.0);
    let harmonics = rng.random_range(8..16usize);
    let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    let tilt = rng.random_range(0.7..1.3);
    let vib_rate = rng.random_range(3.0..6.0);
    let vib_depth = rng.random_range(0.01..0.04);
    let syllables = rng.random_range(2.0..5.0);
    let noise = Normal::new(0.0, SOFT_NOISE_STD).expect("valid std");
    let mut phase = 0.0f64;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let f = f0 * (1.0 + vib_depth * (std::f64::consts::TAU * vib_rate * t).sin());
        phase += std::f64::consts::TAU * f / fs;
        let mut v = 0.0;
        for (h, ph) in phases.iter().enumerate() {
            let k = (h + 1) as f64;
            if k * f < 0.45 * fs {
                v += (k * phase + ph).sin() / k.powf(tilt);
            }
        }
        let env = 0.55 + 0.45 * (std::f64::consts::PI * syllables * t).sin().abs();
        x.push(0.25 * env * v + noise.sample(rng));
    }
    x
}

/// RBJ notch as a single biquad section.
pub fn notch_filter(center_hz: f64, q: f64, sample_rate_hz: u32) -> FilterCascade<f64> {
    let w0 = std::f64::consts::TAU * center_hz / f64::from(sample_rate_hz);
    let alpha = w0.sin() / (2.0 * q);
    let a0 = 1.0 + alpha;
    let c = -2.0 * w0.cos();
    FilterCascade {
        sections: vec![Biquad { b0: 1.0 / a0, b1: c / a0, b2: 1.0 / a0, a1: c / a0, a2: (1.0 - alpha) / a0 }],
        order: 2,
        cutoff_hz: center_hz,
        sample_rate_hz,
    }
}

/// Spoof transform: notch, then rounding to the quantization grid.
pub fn spoof_transform(x: Vec<f64>) -> Result<Vec<f64>> {
    let audio = AudioBuffer::new(x, MINI_RATE_HZ)?;
    let notched = apply_filter(&notch_filter(SPOOF_NOTCH_HZ, SPOOF_NOTCH_Q, MINI_RATE_HZ), &audio)?;
    Ok(notched.samples().iter().map(|v| ((v / SPOOF_QUANT_STEP).round() * SPOOF_QUANT_STEP).clamp(-1.0, 1.0)).collect())
}

/// Noise stand-ins named after the standard noise bank entries.
fn synthetic_noise(name: &str, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let fs = f64::from(MINI_RATE_HZ);
    let n = (NOISE_LEN_S * fs) as usize;
    let white = Normal::new(0.0, 1.0).expect("valid std");
    match name {
        "babble" | "cafe" => {
            let voices: Vec<Vec<f64>> = (0..6).map(|_| harmonic_utterance(rng)).collect();
            let mut x: Vec<f64> = (0..n).map(|i| voices.iter().enumerate().map(|(v, s)| s[(i + v * 2311) % s.len()]).sum()).collect();
            if name == "cafe" {
                // Sparse decaying clicks for cutlery.
                for _ in 0..12 {
                    let at = rng.random_range(0..n);
                    let f = rng.random_range(2500.0..5000.0);
                    for k in 0..400.min(n - at) {
                        let t = k as f64 / fs;
                        x[at + k] += 0.8 * (-t * 150.0).exp() * (std::f64::consts::TAU * f * t).sin();
                    }
                }
            }
            x
        }
        "volvo" => {
            // Low-passed random walk: engine and road rumble.
            let (mut y, mut lp) = (0.0f64, 0.0f64);
            (0..n)
                .map(|_| {
                    y = 0.995 * y + white.sample(rng);
                    lp += 0.05 * (y - lp);
                    lp
                })
                .collect()
        }
        _ => {
            // Street: pinkish noise with slow amplitude modulation.
            let mut b = [0.0f64; 3];
            (0..n)
                .map(|i| {
                    let w = white.sample(rng);
                    b[0] = 0.997 * b[0] + 0.029 * w;
                    b[1] = 0.985 * b[1] + 0.032 * w;
                    b[2] = 0.950 * b[2] + 0.048 * w;
                    let am = 1.0 + 0.5 * (std::f64::consts::TAU * 0.4 * i as f64 / fs).sin();
                    am * (b[0] + b[1] + b[2] + 0.02 * w)
                })
                .collect()
        }
    }
}

fn normalize_peak(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

fn write_audio(path: &Path, x: Vec<f64>) -> Result<()> {
    let audio = AudioBuffer::new(x, MINI_RATE_HZ)?;
    write_wav(&audio, path, BitDepth::Pcm16).with_context(|| format!("writing {}", path.display()))
}

/// Writes the corpus under `root`: `audio/`, `noises/`, `protocols/{train,eval}.txt`
/// and `grid.toml` (standard grid, proxy codec, synthetic noise bank).
pub fn generate_minicorpus(root: &Path, seed: u64) -> Result<MiniCorpus> {
    let audio_dir = root.join("audio");
    let noise_dir = root.join("noises");
    let protocol_dir = root.join("protocols");
    for d in [&audio_dir, &noise_dir, &protocol_dir] {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut protocols = Vec::new();
    for (prefix, file) in [("T", "train.txt"), ("E", "eval.txt")] {
        let mut trials = Vec::new();
        for (i, (id, key)) in partition_ids(prefix).into_iter().enumerate() {
            let x = harmonic_utterance(&mut rng);
            let x = if key == Key::Spoof { spoof_transform(x)? } else { x };
            write_audio(&audio_dir.join(format!("{id}.wav")), x)?;
            trials.push(Trial {
                speaker_id: format!("MINI_S{:02}", i % 5),
                utt_id: id,
                environment: None,
                attack_system_id: (key == Key::Spoof).then(|| "NQ".to_string()),
                key,
            });
        }
        let path = protocol_dir.join(file);
        fs::write(&path, TrialSet::from_trials(trials)?.to_text()).with_context(|| format!("writing {}", path.display()))?;
        protocols.push(path);
    }
    let mut bank = String::new();
    for name in ["babble", "volvo", "cafe", "street"] {
        let mut x = synthetic_noise(name, &mut rng);
        normalize_peak(&mut x, 0.5);
        write_audio(&noise_dir.join(format!("{name}.wav")), x)?;
        bank += &format!("{name} = \"noises/{name}.wav\"\n");
    }
    bank += &format!("white = \"{SYNTHETIC_WHITE}\"\n");
    let grid_config = root.join("grid.toml");
    let toml = format!(
        "# Standard grid over the synthetic mini-corpus; the proxy codec keeps runs hermetic.\n\
         paper-grid = true\nseed = {seed}\ncodec = \"proxy\"\n\n[noise-bank]\n{bank}"
    );
    fs::write(&grid_config, toml).with_context(|| format!("writing {}", grid_config.display()))?;
    let mut protocols = protocols.into_iter();
    Ok(MiniCorpus {
        root: root.to_path_buf(),
        audio_dir,
        train_protocol: protocols.next().expect("train protocol"),
        eval_protocol: protocols.next().expect("eval protocol"),
        grid_config,
    })
}
