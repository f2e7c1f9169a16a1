//! Grid configuration files (TOML).
//!
//! ```toml
//! paper-grid = true          # the 29 standard attacks
//! seed = 2024
//! codec = "external"         # or "proxy"
//! bit-depth = "pcm16"        # or "float32"
//!
//! [low-pass]
//! cutoff-hz = 7000
//! order = 5
//!
//! [reverb]
//! absorption-model = "calibrated"   # or "sabine"
//!
//! [noise-bank]               # paths relative to this file; "synthetic-white" uses the generator
//! babble = "noise/babble.wav"
//! white = "synthetic-white"
//!
//! [transcoder]
//! encode = "ffmpeg -y -i {in} -b:a {bitrate_kbps}k {out}"
//! decode = "ffmpeg -y -i {in} -ar {rate_hz} -ac 1 {out}"
//!
//! [[attack]]                 # extra attacks, appended after the preset
//! kind = "reverberation"
//! rt60 = 1.2
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use launderbench_core::audio::BitDepth;
use launderbench_core::channel::{TranscoderTemplate, DEFAULT_DECODE_TEMPLATE, DEFAULT_ENCODE_TEMPLATE, GRID_BITRATES_KBPS};
use launderbench_core::room::AbsorptionModel;
use serde::Deserialize;
use thiserror::Error;

use crate::grid::{paper_specs, AttackGrid, AttackSpec, CodecMode, DEFAULT_LPF_CUTOFF_HZ, DEFAULT_LPF_ORDER};

/// Highest accepted Butterworth order.
pub const MAX_LPF_ORDER: usize = 20;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawConfig {
    #[serde(default)]
    paper_grid: bool,
    #[serde(default)]
    seed: u64,
    codec: Option<String>,
    bit_depth: Option<String>,
    low_pass: Option<RawLowPass>,
    reverb: Option<RawReverb>,
    #[serde(default)]
    noise_bank: BTreeMap<String, String>,
    transcoder: Option<RawTranscoder>,
    #[serde(default)]
    attack: Vec<RawAttack>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawLowPass {
    cutoff_hz: Option<i64>,
    order: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawReverb {
    absorption_model: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTranscoder {
    encode: Option<String>,
    decode: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawAttack {
    #[serde(rename_all = "kebab-case")]
    Reverberation { rt60: f64 },
    #[serde(rename_all = "kebab-case")]
    AdditiveNoise { noise: String, snr_db: f64 },
    #[serde(rename_all = "kebab-case")]
    Recompression { bitrate_kbps: i64 },
    #[serde(rename_all = "kebab-case")]
    Resampling { rate_hz: i64 },
    #[serde(rename_all = "kebab-case")]
    LowPass { cutoff_hz: i64, order: Option<i64> },
}

pub fn load_grid_config(path: &Path) -> Result<AttackGrid, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_grid_config(&text, &base)
}

fn valid_noise_name(name: &str) -> bool {
    !name.is_empty() && !name.contains("__") && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Parses and validates a grid configuration; every schema violation is reported
/// with its field path.
pub fn parse_grid_config(text: &str, base_dir: &Path) -> Result<AttackGrid, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut errors = Vec::new();

    let codec = match raw.codec.as_deref().unwrap_or("external") {
        "external" => CodecMode::External,
        "proxy" => CodecMode::Proxy,
        other => {
            errors.push(format!("codec: expected \"external\" or \"proxy\", got \"{other}\""));
            CodecMode::External
        }
    };
    let bit_depth = match raw.bit_depth.as_deref().unwrap_or("pcm16") {
        "pcm16" => BitDepth::Pcm16,
        "float32" => BitDepth::Float32,
        other => {
            errors.push(format!("bit-depth: expected \"pcm16\" or \"float32\", got \"{other}\""));
            BitDepth::Pcm16
        }
    };
    let absorption_model = match raw.reverb.as_ref().and_then(|r| r.absorption_model.as_deref()).unwrap_or("calibrated") {
        "calibrated" => AbsorptionModel::Calibrated,
        "sabine" => AbsorptionModel::Sabine,
        other => {
            errors.push(format!("reverb.absorption-model: expected \"calibrated\" or \"sabine\", got \"{other}\""));
            AbsorptionModel::Calibrated
        }
    };

    let check_cutoff = |field: &str, v: i64, errors: &mut Vec<String>| -> u32 {
        if v <= 0 || v > i64::from(u32::MAX) {
            errors.push(format!("{field}: must be a positive frequency in Hz, got {v}"));
            DEFAULT_LPF_CUTOFF_HZ
        } else {
            v as u32
        }
    };
    let check_order = |field: &str, v: i64, errors: &mut Vec<String>| -> usize {
        if !(1..=MAX_LPF_ORDER as i64).contains(&v) {
            errors.push(format!("{field}: must be in 1..={MAX_LPF_ORDER}, got {v}"));
            DEFAULT_LPF_ORDER
        } else {
            v as usize
        }
    };
    let lpf_cutoff_hz = raw
        .low_pass
        .as_ref()
        .and_then(|l| l.cutoff_hz)
        .map(|v| check_cutoff("low-pass.cutoff-hz", v, &mut errors))
        .unwrap_or(DEFAULT_LPF_CUTOFF_HZ);
    let lpf_order = raw
        .low_pass
        .as_ref()
        .and_then(|l| l.order)
        .map(|v| check_order("low-pass.order", v, &mut errors))
        .unwrap_or(DEFAULT_LPF_ORDER);

    let mut specs = if raw.paper_grid { paper_specs(lpf_cutoff_hz, lpf_order) } else { Vec::new() };
    for (i, a) in raw.attack.iter().enumerate() {
        let at = |field: &str| format!("attack[{i}].{field}");
        let spec = match a {
            RawAttack::Reverberation { rt60 } => {
                if !(rt60.is_finite() && *rt60 > 0.0) {
                    errors.push(format!("{}: must be a positive number of seconds, got {rt60}", at("rt60")));
                    continue;
                }
                AttackSpec::Reverberation { rt60_s: *rt60 }
            }
            RawAttack::AdditiveNoise { noise, snr_db } => {
                if !valid_noise_name(noise) {
                    errors.push(format!("{}: '{noise}' must be non-empty [A-Za-z0-9_-] without '__'", at("noise")));
                    continue;
                }
                if !snr_db.is_finite() {
                    errors.push(format!("{}: must be finite", at("snr-db")));
                    continue;
                }
                AttackSpec::AdditiveNoise { noise: noise.clone(), snr_db: *snr_db }
            }
            RawAttack::Recompression { bitrate_kbps } => {
                if *bitrate_kbps <= 0 || *bitrate_kbps > 10_000 {
                    errors.push(format!("{}: must be in 1..=10000, got {bitrate_kbps}", at("bitrate-kbps")));
                    continue;
                }
                AttackSpec::Recompression { bitrate_kbps: *bitrate_kbps as u32 }
            }
            RawAttack::Resampling { rate_hz } => {
                if *rate_hz <= 0 || *rate_hz > 768_000 {
                    errors.push(format!("{}: must be in 1..=768000, got {rate_hz}", at("rate-hz")));
                    continue;
                }
                AttackSpec::Resampling { rate_hz: *rate_hz as u32 }
            }
            RawAttack::LowPass { cutoff_hz, order } => AttackSpec::LowPass {
                cutoff_hz: check_cutoff(&at("cutoff-hz"), *cutoff_hz, &mut errors),
                order: order.map(|o| check_order(&at("order"), o, &mut errors)).unwrap_or(lpf_order),
            },
        };
        specs.push(spec);
    }
    if specs.is_empty() {
        errors.push("attack: no attacks configured (set paper-grid = true or add [[attack]] entries)".into());
    }
    let mut seen = std::collections::HashSet::new();
    for s in &specs {
        if !seen.insert(s.tag()) {
            errors.push(format!("attack: duplicate condition '{}'", s.tag()));
        }
    }
    if codec == CodecMode::Proxy {
        for s in &specs {
            if let AttackSpec::Recompression { bitrate_kbps } = s {
                if !GRID_BITRATES_KBPS.contains(bitrate_kbps) {
                    errors.push(format!("attack: proxy codec supports only {GRID_BITRATES_KBPS:?} kbit/s, got {bitrate_kbps}"));
                }
            }
        }
    }
    for name in raw.noise_bank.keys() {
        if !valid_noise_name(name) {
            errors.push(format!("noise-bank.{name}: invalid noise name"));
        }
    }

    let transcoder = {
        let t = raw.transcoder.as_ref();
        let enc = t.and_then(|t| t.encode.clone()).unwrap_or_else(|| DEFAULT_ENCODE_TEMPLATE.to_string());
        let dec = t.and_then(|t| t.decode.clone()).unwrap_or_else(|| DEFAULT_DECODE_TEMPLATE.to_string());
        match TranscoderTemplate::new(enc, dec) {
            Ok(t) => t,
            Err(e) => {
                errors.push(format!("transcoder: {e}"));
                TranscoderTemplate::default()
            }
        }
    };

    let grid = AttackGrid {
        specs,
        seed: raw.seed,
        noise_bank: raw.noise_bank,
        base_dir: base_dir.to_path_buf(),
        transcoder,
        codec,
        bit_depth,
        absorption_model,
        lpf_cutoff_hz,
    };
    let missing: Vec<&str> = grid.required_noises().into_iter().filter(|n| !grid.noise_bank.contains_key(*n)).collect();
    if !missing.is_empty() {
        errors.push(format!("noise-bank: missing entries for noises used by the grid: {}", missing.join(", ")));
    }
    if errors.is_empty() {
        Ok(grid)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}
