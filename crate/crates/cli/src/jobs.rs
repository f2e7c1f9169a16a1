//! Execution of a single laundering job and the caches shared between jobs.

use std::collections::HashMap;
use std::fs;
use std::hash::Hash;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use anyhow::{anyhow, Context, Result};
use launderbench_core::audio::{derive_seed, read_wav, write_wav, AudioBuffer, SeedContext};
use launderbench_core::channel::{apply_filter, design_butterworth_lowpass, lossy_proxy, recompress, resample};
use launderbench_core::noise::{apply_noise_attack, SnrTarget};
use launderbench_core::room::{apply_reverb, simulate_rir, RirConfig, ShoeboxRoom, ANTI_CLIP_PEAK};
use launderbench_core::{Bank, Cascade, Rir};

use crate::grid::{AttackGrid, AttackSpec, CodecMode};

type Slot<V> = Arc<OnceLock<Result<Arc<V>, String>>>;

/// Compute-once map: concurrent requests for one key wait for a single computation.
#[derive(Debug)]
pub struct OnceCache<K, V> {
    slots: Mutex<HashMap<K, Slot<V>>>,
}

impl<K, V> Default for OnceCache<K, V> {
    fn default() -> Self {
        Self { slots: Mutex::new(HashMap::new()) }
    }
}

impl<K: Eq + Hash + Clone, V> OnceCache<K, V> {
    pub fn get_or_try_init(&self, key: &K, init: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        let slot = {
            let mut slots = self.slots.lock().unwrap_or_else(|e| e.into_inner());
            slots.entry(key.clone()).or_default().clone()
        };
        slot.get_or_init(|| init().map(Arc::new).map_err(|e| format!("{e:#}"))).clone().map_err(|e| anyhow!(e))
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Resources reused across jobs: room responses per (RT60, rate), filters per
/// (cutoff, order, rate) and noise banks per rate.
#[derive(Debug, Default)]
pub struct SharedCaches {
    pub rirs: OnceCache<(u64, u32), Rir>,
    pub filters: OnceCache<(u32, usize, u32), Cascade>,
    pub banks: OnceCache<u32, Bank>,
}

/// Everything a job needs besides its own inputs.
pub struct JobContext<'a> {
    pub grid: &'a AttackGrid,
    pub caches: &'a SharedCaches,
    /// Directory for laundered outputs.
    pub out_dir: &'a Path,
    /// Scratch directory for transcoder temporaries.
    pub scratch_dir: &'a Path,
}

/// Scales the buffer down when its peak exceeds the anti-clipping limit.
pub fn limit_peak(audio: AudioBuffer<f64>) -> AudioBuffer<f64> {
    let peak = audio.peak();
    if peak > ANTI_CLIP_PEAK {
        audio.scaled(ANTI_CLIP_PEAK / peak)
    } else {
        audio
    }
}

/// Applies one attack to decoded audio.
pub fn apply_attack(
    ctx: &JobContext<'_>,
    audio: &AudioBuffer<f64>,
    spec: &AttackSpec,
    orig_utt_id: &str,
) -> Result<AudioBuffer<f64>> {
    let fs = audio.sample_rate_hz();
    let tag = spec.tag();
    let grid = ctx.grid;
    let out = match spec {
        AttackSpec::Reverberation { rt60_s } => {
            let rir = ctx.caches.rirs.get_or_try_init(&(rt60_s.to_bits(), fs), || {
                let cfg = RirConfig { absorption_model: grid.absorption_model, ..RirConfig::default() };
                simulate_rir(&ShoeboxRoom::laundering_default(), *rt60_s, fs, &cfg)
                    .with_context(|| format!("simulating the {rt60_s} s room response at {fs} Hz"))
            })?;
            apply_reverb(audio, &rir)?
        }
        AttackSpec::AdditiveNoise { noise, snr_db } => {
            let bank = ctx.caches.banks.get_or_try_init(&fs, || {
                Bank::load(&grid.noise_bank, &grid.base_dir, fs).context("loading the noise bank")
            })?;
            let seed = SeedContext::new(grid.seed, orig_utt_id, &tag);
            apply_noise_attack(audio, &bank, noise, SnrTarget::new(*snr_db)?, &seed)?
        }
        AttackSpec::Recompression { bitrate_kbps } => match grid.codec {
            CodecMode::Proxy => lossy_proxy(audio, *bitrate_kbps)?,
            CodecMode::External => {
                let stream = derive_seed(&SeedContext::new(grid.seed, orig_utt_id, &tag));
                recompress(audio, *bitrate_kbps, &grid.transcoder, ctx.scratch_dir, stream)?
            }
        },
        AttackSpec::Resampling { rate_hz } => resample(audio, *rate_hz)?,
        AttackSpec::LowPass { cutoff_hz, order } => {
            let cascade = ctx.caches.filters.get_or_try_init(&(*cutoff_hz, *order, fs), || {
                design_butterworth_lowpass(*order, f64::from(*cutoff_hz), fs)
                    .with_context(|| format!("designing the {cutoff_hz} Hz low-pass at {fs} Hz"))
            })?;
            apply_filter(&cascade, audio)?
        }
    };
    Ok(limit_peak(out))
}

/// Launders `input` with `spec` and writes `<laundered_id>.wav` into the output
/// directory, atomically. A resampling attack to the input's own rate copies the
/// file unchanged.
pub fn run_launder_job(
    ctx: &JobContext<'_>,
    input: &Path,
    orig_utt_id: &str,
    spec: &AttackSpec,
    laundered_id: &str,
) -> Result<PathBuf> {
    let dest = ctx.out_dir.join(format!("{laundered_id}.wav"));
    let tmp = ctx.out_dir.join(format!("{laundered_id}.wav.partial"));
    let audio: AudioBuffer<f64> = read_wav(input).with_context(|| format!("reading {}", input.display()))?;
    let identity = matches!(spec, AttackSpec::Resampling { rate_hz } if *rate_hz == audio.sample_rate_hz());
    if identity {
        fs::copy(input, &tmp).with_context(|| format!("copying {} to {}", input.display(), tmp.display()))?;
    } else {
        let out = apply_attack(ctx, &audio, spec, orig_utt_id).with_context(|| format!("job {laundered_id}"))?;
        write_wav(&out, &tmp, ctx.grid.bit_depth).with_context(|| format!("writing {}", tmp.display()))?;
    }
    fs::rename(&tmp, &dest).with_context(|| format!("moving {} into place", dest.display()))?;
    Ok(dest)
}
