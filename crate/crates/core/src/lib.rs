//! Laundering attacks (reverberation, additive noise, recompression, resampling,
//! low-pass filtering), cepstral front-ends, a GMM back-end and EER scoring for
//! measuring the robustness of audio anti-spoofing countermeasures.
//!
//! Signal-processing code is generic over [`Real`]; the aliases below fix the
//! scalar to `f64` (the default used throughout the pipeline) or `f32`.

pub mod audio;
pub mod channel;
pub mod dsp;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod noise;
pub mod room;
pub mod scalar;

pub use scalar::Real;

/// Mono audio with `f64` samples.
pub type Audio = audio::AudioBuffer<f64>;
/// Mono audio with `f32` samples.
pub type Audio32 = audio::AudioBuffer<f32>;
/// Feature matrix with `f64` values.
pub type Features = features::FeatureMatrix<f64>;
/// Feature matrix with `f32` values.
pub type Features32 = features::FeatureMatrix<f32>;
/// Room impulse response with `f64` taps.
pub type Rir = room::RoomImpulseResponse<f64>;
/// Butterworth cascade with `f64` coefficients.
pub type Cascade = channel::FilterCascade<f64>;
/// Noise bank holding `f64` recordings.
pub type Bank = noise::NoiseBank<f64>;
pub use gmm::GmmModel as Gmm;
