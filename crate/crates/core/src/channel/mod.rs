//! Post-sensor channel attacks: low-pass filtering, resampling and lossy recompression.

mod codec;
mod filter;
mod resample;

pub use codec::{
    lossy_proxy, proxy_band_fraction, proxy_levels, recompress, TranscoderTemplate, DEFAULT_DECODE_TEMPLATE,
    DEFAULT_ENCODE_TEMPLATE, DEFAULT_TIMEOUT_S, GRID_BITRATES_KBPS, TIMEOUT_ENV,
};
pub use filter::{apply_filter, design_butterworth_lowpass, Biquad, FilterCascade};
pub use resample::{reduce_ratio, resample, ResampleRatio, Resampler, STOPBAND_ATTENUATION_DB};

use thiserror::Error;

use crate::audio::AudioError;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist of {sample_rate_hz} Hz")]
    CutoffAtOrAboveNyquist { cutoff_hz: f64, sample_rate_hz: u32 },
    #[error("invalid filter design: {0}")]
    InvalidDesign(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    RateMismatch { expected: u32, actual: u32 },
    #[error("sample rates must be positive")]
    InvalidRate,
    #[error("unsupported bitrate {0} kbit/s")]
    InvalidBitrate(u32),
    #[error("invalid transcoder template: {0}")]
    Template(String),
    #[error("transcoder command '{command}' failed: {detail}")]
    Transcoder { command: String, detail: String },
    #[error(transparent)]
    Audio(#[from] AudioError),
}
