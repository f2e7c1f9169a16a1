//! Attack specifications, their canonical tags and the standard laundering grid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use launderbench_core::audio::BitDepth;
use launderbench_core::channel::{TranscoderTemplate, GRID_BITRATES_KBPS};
use launderbench_core::noise::NOISE_NAMES;
use launderbench_core::room::AbsorptionModel;

/// Reverberation times of the standard grid, in seconds.
pub const GRID_RT60_S: [f64; 3] = [0.3, 0.6, 0.9];
/// SNRs of the standard grid, in dB.
pub const GRID_SNR_DB: [f64; 3] = [0.0, 10.0, 20.0];
/// Target rates of the standard resampling attack.
pub const GRID_RATES_HZ: [u32; 4] = [8000, 11_025, 22_050, 44_100];
/// Default low-pass cutoff and order.
pub const DEFAULT_LPF_CUTOFF_HZ: u32 = 7000;
pub const DEFAULT_LPF_ORDER: usize = 5;

/// Attack family, used for accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackFamily {
    Reverberation,
    AdditiveNoise,
    Recompression,
    Resampling,
    LowPass,
}

impl AttackFamily {
    pub const ALL: [AttackFamily; 5] = [
        AttackFamily::Reverberation,
        AttackFamily::AdditiveNoise,
        AttackFamily::Recompression,
        AttackFamily::Resampling,
        AttackFamily::LowPass,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            AttackFamily::Reverberation => "Rev",
            AttackFamily::AdditiveNoise => "AN",
            AttackFamily::Recompression => "Rec",
            AttackFamily::Resampling => "Res",
            AttackFamily::LowPass => "LPF",
        }
    }
}

/// One laundering attack with its parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Reverberation { rt60_s: f64 },
    AdditiveNoise { noise: String, snr_db: f64 },
    Recompression { bitrate_kbps: u32 },
    Resampling { rate_hz: u32 },
    LowPass { cutoff_hz: u32, order: usize },
}

/// Formats a parameter for a tag: `0.3 -> 0_3`, `-5 -> m5`.
fn tag_number(v: f64) -> String {
    format!("{v}").replace('.', "_").replace('-', "m")
}

impl AttackSpec {
    pub fn family(&self) -> AttackFamily {
        match self {
            AttackSpec::Reverberation { .. } => AttackFamily::Reverberation,
            AttackSpec::AdditiveNoise { .. } => AttackFamily::AdditiveNoise,
            AttackSpec::Recompression { .. } => AttackFamily::Recompression,
            AttackSpec::Resampling { .. } => AttackFamily::Resampling,
            AttackSpec::LowPass { .. } => AttackFamily::LowPass,
        }
    }

    /// Canonical condition tag, a pure function of kind and parameter.
    pub fn tag(&self) -> String {
        match self {
            AttackSpec::Reverberation { rt60_s } => format!("rt_{}", tag_number(*rt60_s)),
            AttackSpec::AdditiveNoise { noise, snr_db } => format!("{noise}_{}", tag_number(*snr_db)),
            AttackSpec::Recompression { bitrate_kbps } => format!("mp3_{bitrate_kbps}"),
            AttackSpec::Resampling { rate_hz } => format!("rs_{rate_hz}"),
            AttackSpec::LowPass { cutoff_hz, .. } => format!("lpf_{cutoff_hz}"),
        }
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// The 29 standard specs: 3 reverberation, 15 noise, 6 recompression, 4 resampling, 1 low-pass.
pub fn paper_specs(lpf_cutoff_hz: u32, lpf_order: usize) -> Vec<AttackSpec> {
    let mut specs: Vec<AttackSpec> = GRID_RT60_S.iter().map(|&rt60_s| AttackSpec::Reverberation { rt60_s }).collect();
    for noise in NOISE_NAMES {
        for snr_db in GRID_SNR_DB {
            specs.push(AttackSpec::AdditiveNoise { noise: noise.to_string(), snr_db });
        }
    }
    specs.extend(GRID_BITRATES_KBPS.iter().map(|&bitrate_kbps| AttackSpec::Recompression { bitrate_kbps }));
    specs.extend(GRID_RATES_HZ.iter().map(|&rate_hz| AttackSpec::Resampling { rate_hz }));
    specs.push(AttackSpec::LowPass { cutoff_hz: lpf_cutoff_hz, order: lpf_order });
    specs
}

/// How recompression is performed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecMode {
    /// External transcoder driven by command templates.
    External,
    /// Deterministic built-in stand-in for hermetic runs.
    Proxy,
}

/// A validated laundering configuration.
#[derive(Debug, Clone)]
pub struct AttackGrid {
    pub specs: Vec<AttackSpec>,
    pub seed: u64,
    /// Noise name to recording path (relative to `base_dir`) or `synthetic-white`.
    pub noise_bank: BTreeMap<String, String>,
    pub base_dir: PathBuf,
    pub transcoder: TranscoderTemplate,
    pub codec: CodecMode,
    pub bit_depth: BitDepth,
    pub absorption_model: AbsorptionModel,
    pub lpf_cutoff_hz: u32,
}

impl AttackGrid {
    /// Noise names referenced by the specs, in first-use order.
    pub fn required_noises(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.specs {
            if let AttackSpec::AdditiveNoise { noise, .. } = s {
                if !out.contains(&noise.as_str()) {
                    out.push(noise);
                }
            }
        }
        out
    }

    pub fn spec_by_tag(&self, tag: &str) -> Option<&AttackSpec> {
        self.specs.iter().find(|s| s.tag() == tag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use launderbench_core::eval::report_layout;

    #[test]
    fn paper_grid_has_29_specs_with_canonical_tags() {
        let specs = paper_specs(7000, 5);
        assert_eq!(specs.len(), 29);
        let tags: Vec<String> = specs.iter().map(AttackSpec::tag).collect();
        assert_eq!(&tags[..3], &["rt_0_3", "rt_0_6", "rt_0_9"]);
        assert_eq!(tags[3], "babble_0");
        assert_eq!(tags[17], "street_20");
        assert_eq!(&tags[18..24], &["mp3_16", "mp3_64", "mp3_128", "mp3_192", "mp3_256", "mp3_320"]);
        assert_eq!(&tags[24..28], &["rs_8000", "rs_11025", "rs_22050", "rs_44100"]);
        assert_eq!(tags[28], "lpf_7000");
        let counts = AttackFamily::ALL.map(|f| specs.iter().filter(|s| s.family() == f).count());
        assert_eq!(counts, [3, 15, 6, 4, 1]);
    }

    #[test]
    fn report_layout_covers_grid_tags() {
        let layout: Vec<String> = report_layout(7000).iter().filter_map(|r| r.tag().map(str::to_string)).collect();
        let mut expected = vec!["clean".to_string()];
        expected.extend(paper_specs(7000, 5).iter().map(AttackSpec::tag));
        assert_eq!(layout, expected);
    }

    #[test]
    fn tag_formatting() {
        assert_eq!(AttackSpec::AdditiveNoise { noise: "white".into(), snr_db: -5.0 }.tag(), "white_m5");
        assert_eq!(AttackSpec::AdditiveNoise { noise: "cafe".into(), snr_db: 2.5 }.tag(), "cafe_2_5");
        assert_eq!(AttackSpec::Reverberation { rt60_s: 1.0 }.tag(), "rt_1");
    }
}
