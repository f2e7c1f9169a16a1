//! Shoebox-room reverberation by the image-source method.
//!
//! Absorption is uniform over the six walls. It starts from the Sabine inversion
//! for the requested RT60 and, by default, is refined until the Schroeder decay of
//! the simulated response matches the request. Each image source contributes
//! `(1 - alpha)^(reflections / 2) / (4 pi d)` at delay `d / c`, spread over an
//! 81-tap Hann-windowed sinc so fractional delays are preserved.

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::dsp::fft_convolve;
use crate::scalar::Real;

/// Sabine's constant `24 ln(10) / c` at c = 343 m/s, in s/m.
pub const SABINE_CONSTANT: f64 = 0.161;
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
pub const FRACTIONAL_DELAY_TAPS: usize = 81;
pub const DEFAULT_ORDER_CAP: u32 = 100;
/// Peak above which reverberated output is rescaled.
pub const ANTI_CLIP_PEAK: f64 = 0.999;

#[derive(Debug, Error)]
pub enum RoomError {
    #[error("invalid room: {0}")]
    InvalidRoom(String),
    #[error("RT60 must be positive and finite, got {0}")]
    InvalidRt60(f64),
    #[error("unachievable RT60 {rt60_s} s: required absorption {alpha:.4} exceeds 1")]
    UnachievableRt60 { rt60_s: f64, alpha: f64 },
    #[error("reflection order {order} exceeds configured cap {cap}")]
    OrderExceedsCap { order: u32, cap: u32 },
    #[error("impulse response has no energy")]
    SilentResponse,
    #[error("decay range -5 dB to -25 dB not reached within the impulse response")]
    DecayRangeNotReached,
    #[error("sample rate mismatch: audio {audio_hz} Hz, impulse response {rir_hz} Hz")]
    RateMismatch { audio_hz: u32, rir_hz: u32 },
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Rectangular room with one omnidirectional source and microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct ShoeboxRoom {
    dimensions: [f64; 3],
    source: [f64; 3],
    microphone: [f64; 3],
    speed_of_sound: f64,
}

impl ShoeboxRoom {
    pub fn new(dimensions: [f64; 3], source: [f64; 3], microphone: [f64; 3]) -> Result<Self, RoomError> {
        Self::with_speed_of_sound(dimensions, source, microphone, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn with_speed_of_sound(
        dimensions: [f64; 3],
        source: [f64; 3],
        microphone: [f64; 3],
        speed_of_sound: f64,
    ) -> Result<Self, RoomError> {
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(RoomError::InvalidRoom(format!("speed of sound {speed_of_sound}")));
        }
        for axis in 0..3 {
            let l = dimensions[axis];
            if !(l.is_finite() && l > 0.0) {
                return Err(RoomError::InvalidRoom(format!("dimension {axis} = {l}")));
            }
            for (name, p) in [("source", source), ("microphone", microphone)] {
                if !(p[axis] > 0.0 && p[axis] < l) {
                    return Err(RoomError::InvalidRoom(format!(
                        "{name} coordinate {axis} = {} outside (0, {l})",
                        p[axis]
                    )));
                }
            }
        }
        if source == microphone {
            return Err(RoomError::InvalidRoom("source and microphone coincide".into()));
        }
        Ok(Self { dimensions, source, microphone, speed_of_sound })
    }

    /// The 10 x 7.5 x 3.5 m room used by the laundering grid.
    pub fn laundering_default() -> Self {
        Self::new([10.0, 7.5, 3.5], [2.5, 3.7, 1.76], [6.3, 4.9, 1.2]).expect("valid built-in geometry")
    }

    pub fn dimensions(&self) -> [f64; 3] {
        self.dimensions
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn volume(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        x * y * z
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dimensions;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn direct_distance(&self) -> f64 {
        (0..3).map(|k| (self.source[k] - self.microphone[k]).powi(2)).sum::<f64>().sqrt()
    }
}

/// Uniform wall energy-absorption coefficient that yields `rt60_s` under Sabine's formula.
pub fn sabine_absorption(room: &ShoeboxRoom, rt60_s: f64) -> Result<f64, RoomError> {
    if !(rt60_s.is_finite() && rt60_s > 0.0) {
        return Err(RoomError::InvalidRt60(rt60_s));
    }
    let alpha = SABINE_CONSTANT * room.volume() / (room.surface_area() * rt60_s);
    if alpha > 1.0 {
        return Err(RoomError::UnachievableRt60 { rt60_s, alpha });
    }
    Ok(alpha)
}

/// How the uniform wall absorption is chosen for a requested RT60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsorptionModel {
    /// Sabine inversion only. Shoebox image sources decay slower than a diffuse
    /// field, so the realized RT60 overshoots the request at low absorption.
    Sabine,
    /// Start from the Sabine value and refine it until the Schroeder estimate of
    /// the simulated response matches the request.
    #[default]
    Calibrated,
}

/// Relative RT60 error at which calibration stops.
pub const CALIBRATION_TOLERANCE: f64 = 0.02;
const CALIBRATION_MAX_STEPS: usize = 12;

/// Image-source simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RirConfig {
    /// Fixed reflection order; `None` derives `ceil(c * RT60 / min(dimensions))`.
    pub max_order: Option<u32>,
    pub order_cap: u32,
    /// Overrides the Sabine-derived absorption (used to probe the anechoic limit).
    pub absorption: Option<f64>,
    pub absorption_model: AbsorptionModel,
}

impl Default for RirConfig {
    fn default() -> Self {
        Self {
            max_order: None,
            order_cap: DEFAULT_ORDER_CAP,
            absorption: None,
            absorption_model: AbsorptionModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomImpulseResponse<T> {
    pub taps: Vec<T>,
    pub sample_rate_hz: u32,
    pub rt60_target_s: f64,
    pub max_order: u32,
    pub absorption: f64,
    /// Direct-path delay in (fractional) samples.
    pub direct_delay_samples: f64,
}

impl<T: Real> RoomImpulseResponse<T> {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.to_f64_lossy().powi(2)).sum()
    }

    /// First tap whose magnitude reaches half of the global peak.
    ///
    /// The windowed-sinc interpolator puts small pre-ringing taps ahead of every
    /// arrival, so the onset is located on the main lobe rather than the first
    /// nonzero value.
    pub fn onset_index(&self) -> Option<usize> {
        let peak = self.taps.iter().fold(0.0f64, |m, t| m.max(t.to_f64_lossy().abs()));
        if peak == 0.0 {
            return None;
        }
        self.taps.iter().position(|t| t.to_f64_lossy().abs() >= 0.5 * peak)
    }

    pub fn to_audio(&self) -> AudioBuffer<T> {
        AudioBuffer::from_parts(self.taps.clone(), self.sample_rate_hz)
    }
}

fn auto_order(room: &ShoeboxRoom, rt60_s: f64) -> u32 {
    let min_dim = room.dimensions.iter().cloned().fold(f64::INFINITY, f64::min);
    (room.speed_of_sound * rt60_s / min_dim).ceil() as u32
}

/// Mirror-image coordinate along one axis for image index `i` (|i| reflections).
#[inline]
fn image_coordinate(i: i64, length: f64, source: f64) -> f64 {
    if i.rem_euclid(2) == 0 {
        i as f64 * length + source
    } else {
        (i + 1) as f64 * length - source
    }
}

/// Simulates the room impulse response for `rt60_s` at `sample_rate_hz`.
pub fn simulate_rir<T: Real>(
    room: &ShoeboxRoom,
    rt60_s: f64,
    sample_rate_hz: u32,
    cfg: &RirConfig,
) -> Result<RoomImpulseResponse<T>, RoomError> {
    if sample_rate_hz == 0 {
        return Err(AudioError::ZeroRate.into());
    }
    let sabine = match cfg.absorption {
        Some(a) if (0.0..=1.0).contains(&a) => {
            if !(rt60_s.is_finite() && rt60_s > 0.0) {
                return Err(RoomError::InvalidRt60(rt60_s));
            }
            None
        }
        Some(a) => return Err(RoomError::InvalidRoom(format!("absorption {a} outside [0, 1]"))),
        None => Some(sabine_absorption(room, rt60_s)?),
    };
    let order = cfg.max_order.unwrap_or_else(|| auto_order(room, rt60_s));
    if order > cfg.order_cap {
        return Err(RoomError::OrderExceedsCap { order, cap: cfg.order_cap });
    }

    let fs = f64::from(sample_rate_hz);
    let direct_delay = room.direct_distance() / room.speed_of_sound * fs;
    let half = FRACTIONAL_DELAY_TAPS / 2;
    let n_taps = ((1.1 * rt60_s * fs).ceil() as usize).max(direct_delay.ceil() as usize + half + 1);

    let (alpha, taps) = match (cfg.absorption, sabine, cfg.absorption_model) {
        (Some(a), _, _) => (a, render_images(room, a, order, n_taps, fs)),
        (None, Some(a), AbsorptionModel::Sabine) => (a, render_images(room, a, order, n_taps, fs)),
        (None, Some(a), AbsorptionModel::Calibrated) => calibrate(room, a, rt60_s, order, n_taps, sample_rate_hz),
        (None, None, _) => unreachable!("absorption resolved above"),
    };

    Ok(RoomImpulseResponse {
        taps: taps.into_iter().map(T::lit).collect(),
        sample_rate_hz,
        rt60_target_s: rt60_s,
        max_order: order,
        absorption: alpha,
        direct_delay_samples: direct_delay,
    })
}

/// Secant search on `ln(alpha)` against `ln(estimated / target)`.
///
/// Falls back to the best response seen when the tolerance is not reached.
fn calibrate(
    room: &ShoeboxRoom,
    sabine_alpha: f64,
    target: f64,
    order: u32,
    n_taps: usize,
    sample_rate_hz: u32,
) -> (f64, Vec<f64>) {
    let fs = f64::from(sample_rate_hz);
    let misfit = |taps: &[f64]| match estimate_rt60_from_taps(taps, sample_rate_hz) {
        Ok(est) => (est / target).ln(),
        // A response too short to measure behaves as if barely reverberant.
        Err(_) => f64::NEG_INFINITY,
    };

    let mut alpha = sabine_alpha;
    let mut taps = render_images(room, alpha, order, n_taps, fs);
    let mut err = misfit(&taps);
    let mut best = (err.abs(), alpha, taps.clone());
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..CALIBRATION_MAX_STEPS {
        if err.abs() <= (1.0 + CALIBRATION_TOLERANCE).ln() {
            break;
        }
        let log_alpha = alpha.ln();
        // Decay rate scales roughly like alpha, hence the unit-slope first guess.
        let slope = match prev {
            Some((pa, pe)) if (log_alpha - pa).abs() > 1e-9 && err.is_finite() && pe.is_finite() => {
                let s = (err - pe) / (log_alpha - pa);
                if s < -0.05 { s } else { -1.0 }
            }
            _ => -1.0,
        };
        let step = if err.is_finite() { -err / slope } else { -0.5 };
        prev = Some((log_alpha, err));
        alpha = (log_alpha + step.clamp(-1.0, 1.0)).exp().clamp(1e-4, 1.0);
        taps = render_images(room, alpha, order, n_taps, fs);
        err = misfit(&taps);
        if err.abs() < best.0 {
            best = (err.abs(), alpha, taps.clone());
        }
    }
    (best.1, best.2)
}

/// Accumulates every image source up to `order` reflections into `n_taps` taps.
fn render_images(room: &ShoeboxRoom, alpha: f64, order: u32, n_taps: usize, fs: f64) -> Vec<f64> {
    let c = room.speed_of_sound;
    let half = (FRACTIONAL_DELAY_TAPS / 2) as i64;
    let max_dist = (n_taps as i64 + half) as f64 / fs * c;
    let beta = (1.0 - alpha).sqrt();
    let order = i64::from(order);
    let [lx, ly, lz] = room.dimensions;
    let [sx, sy, sz] = room.source;
    let [mx, my, mz] = room.microphone;
    let window_span = FRACTIONAL_DELAY_TAPS as f64;

    // One partial response per x-image index, summed afterwards in index order so
    // the result does not depend on thread scheduling.
    let partials: Vec<Option<Vec<f64>>> = (-order..=order)
        .into_par_iter()
        .map(|ix| {
            let dx = image_coordinate(ix, lx, sx) - mx;
            if dx.abs() > max_dist {
                return None;
            }
            let mut taps = vec![0.0f64; n_taps];
            let rem_x = order - ix.abs();
            for iy in -rem_x..=rem_x {
                let dy = image_coordinate(iy, ly, sy) - my;
                let dxy2 = dx * dx + dy * dy;
                if dxy2 > max_dist * max_dist {
                    continue;
                }
                let rem_y = rem_x - iy.abs();
                for iz in -rem_y..=rem_y {
                    let dz = image_coordinate(iz, lz, sz) - mz;
                    let dist = (dxy2 + dz * dz).sqrt();
                    if dist > max_dist {
                        continue;
                    }
                    let reflections = (ix.abs() + iy.abs() + iz.abs()) as i32;
                    if beta == 0.0 && reflections > 0 {
                        continue;
                    }
                    let gain = beta.powi(reflections) / (4.0 * std::f64::consts::PI * dist);
                    let delay = dist / c * fs;
                    let center = delay.round() as i64;
                    // sin(pi (n - delay)) only flips sign between integer n.
                    let base_sin = (std::f64::consts::PI * (center as f64 - delay)).sin();
                    for n in (center - half).max(0)..=(center + half).min(n_taps as i64 - 1) {
                        let x = n as f64 - delay;
                        let sinc = if x.abs() < 1e-12 {
                            1.0
                        } else {
                            let sign = if (n - center).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                            sign * base_sin / (std::f64::consts::PI * x)
                        };
                        let w = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * x / window_span).cos());
                        taps[n as usize] += gain * sinc * w;
                    }
                }
            }
            Some(taps)
        })
        .collect();

    let mut taps = vec![0.0f64; n_taps];
    for partial in partials.into_iter().flatten() {
        for (t, p) in taps.iter_mut().zip(partial) {
            *t += p;
        }
    }
    taps
}

/// Schroeder backward-integration decay time, extrapolated from the -5 to -25 dB range.
pub fn estimate_rt60<T: Real>(rir: &RoomImpulseResponse<T>) -> Result<f64, RoomError> {
    estimate_rt60_from_taps(&rir.taps, rir.sample_rate_hz)
}

pub fn estimate_rt60_from_taps<T: Real>(taps: &[T], sample_rate_hz: u32) -> Result<f64, RoomError> {
    let mut edc = vec![0.0f64; taps.len()];
    let mut acc = 0.0f64;
    for (e, t) in edc.iter_mut().zip(taps).rev() {
        acc += t.to_f64_lossy().powi(2);
        *e = acc;
    }
    let total = acc;
    if total <= 0.0 {
        return Err(RoomError::SilentResponse);
    }
    let db: Vec<f64> = edc.iter().map(|&e| 10.0 * (e / total).log10()).collect();
    let start = db.iter().position(|&v| v <= -5.0).ok_or(RoomError::DecayRangeNotReached)?;
    let end = db.iter().position(|&v| v <= -25.0).ok_or(RoomError::DecayRangeNotReached)?;
    if !db[end].is_finite() || end < start + 2 {
        return Err(RoomError::DecayRangeNotReached);
    }

    // Least-squares line through the decay curve between the two crossings.
    let fs = f64::from(sample_rate_hz);
    let pts = &db[start..=end];
    let n = pts.len() as f64;
    let mean_t = (start + end) as f64 / 2.0 / fs;
    let mean_y = pts.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in pts.iter().enumerate() {
        let t = (start + i) as f64 / fs - mean_t;
        sxy += t * (y - mean_y);
        sxx += t * t;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(RoomError::DecayRangeNotReached);
    }
    Ok(-60.0 / slope)
}

/// Convolves `audio` with `rir`, keeping the full tail, and rescales if the peak exceeds 0.999.
pub fn apply_reverb<T: Real>(audio: &AudioBuffer<T>, rir: &RoomImpulseResponse<T>) -> Result<AudioBuffer<T>, RoomError> {
    if audio.sample_rate_hz() != rir.sample_rate_hz {
        return Err(RoomError::RateMismatch { audio_hz: audio.sample_rate_hz(), rir_hz: rir.sample_rate_hz });
    }
    audio.ensure_non_empty()?;
    if rir.taps.is_empty() {
        return Err(RoomError::SilentResponse);
    }
    let mut out = fft_convolve(audio.samples(), &rir.taps);
    let peak = out.iter().fold(T::zero(), |m, s| m.max(s.abs()));
    let limit = T::lit(ANTI_CLIP_PEAK);
    if peak > limit {
        let g = limit / peak;
        out.iter_mut().for_each(|s| *s = *s * g);
    }
    Ok(AudioBuffer::from_parts(out, audio.sample_rate_hz()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sabine_values() {
        let room = ShoeboxRoom::laundering_default();
        assert!((room.volume() - 262.5).abs() < 1e-9);
        assert!((room.surface_area() - 272.5).abs() < 1e-9);
        // 0.161 * 262.5 / (272.5 * rt60)
        let a3 = sabine_absorption(&room, 0.3).unwrap();
        let a9 = sabine_absorption(&room, 0.9).unwrap();
        assert!((a3 - 0.516_972).abs() < 1e-4, "{a3}");
        assert!((a9 - 0.172_324).abs() < 1e-4, "{a9}");
        let a6 = sabine_absorption(&room, 0.6).unwrap();
        assert!((a3 / a6 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_room_cannot_reach_short_rt60() {
        let room = ShoeboxRoom::new([1.0, 1.0, 1.0], [0.2, 0.2, 0.2], [0.7, 0.7, 0.7]).unwrap();
        assert!(matches!(sabine_absorption(&room, 0.01), Err(RoomError::UnachievableRt60 { .. })));
        assert!(matches!(sabine_absorption(&room, 0.0), Err(RoomError::InvalidRt60(_))));
    }

    #[test]
    fn room_validation() {
        assert!(ShoeboxRoom::new([1.0, 1.0, 1.0], [0.5, 0.5, 0.5], [0.5, 0.5, 0.5]).is_err());
        assert!(ShoeboxRoom::new([1.0, 1.0, 1.0], [1.5, 0.5, 0.5], [0.2, 0.5, 0.5]).is_err());
        assert!(ShoeboxRoom::new([1.0, -1.0, 1.0], [0.5, 0.5, 0.5], [0.2, 0.5, 0.5]).is_err());
    }

    #[test]
    fn order_zero_is_direct_path() {
        let room = ShoeboxRoom::laundering_default();
        let cfg = RirConfig { max_order: Some(0), ..Default::default() };
        let rir: RoomImpulseResponse<f64> = simulate_rir(&room, 0.3, 16_000, &cfg).unwrap();
        // sqrt(3.8^2 + 1.2^2 + 0.56^2) = 4.02412 m -> 187.71 samples
        let expected = 4.024_127 / 343.0 * 16_000.0;
        assert!((rir.direct_delay_samples - expected).abs() < 1e-3);
        let onset = rir.onset_index().unwrap() as f64;
        assert!((onset - expected).abs() <= 1.0, "onset {onset}");
        assert!(rir.taps.len() >= (1.1f64 * 0.3 * 16_000.0).ceil() as usize);
        // Nothing beyond the sinc support of the direct arrival.
        let center = expected.round() as usize;
        assert!(rir.taps[center + 41..].iter().all(|&t| t == 0.0));
    }

    #[test]
    fn anechoic_walls_leave_direct_path_only() {
        let room = ShoeboxRoom::laundering_default();
        let direct: RoomImpulseResponse<f64> =
            simulate_rir(&room, 0.3, 16_000, &RirConfig { max_order: Some(0), ..Default::default() }).unwrap();
        let full: RoomImpulseResponse<f64> = simulate_rir(
            &room,
            0.3,
            16_000,
            &RirConfig { max_order: Some(12), absorption: Some(1.0), ..Default::default() },
        )
        .unwrap();
        assert_eq!(direct.taps, full.taps);
    }

    #[test]
    fn order_cap_is_enforced() {
        let room = ShoeboxRoom::laundering_default();
        let cfg = RirConfig { order_cap: 10, ..Default::default() };
        let err = simulate_rir::<f64>(&room, 0.9, 16_000, &cfg).unwrap_err();
        assert!(matches!(err, RoomError::OrderExceedsCap { order: 89, cap: 10 }));
    }

    #[test]
    fn energy_decreases_with_absorption() {
        let room = ShoeboxRoom::laundering_default();
        let mut last = f64::INFINITY;
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let cfg = RirConfig { max_order: Some(8), absorption: Some(alpha), ..Default::default() };
            let e = simulate_rir::<f64>(&room, 0.3, 16_000, &cfg).unwrap().energy();
            assert!(e <= last, "alpha {alpha}: {e} > {last}");
            last = e;
        }
    }

    #[test]
    fn rt60_of_synthetic_exponential() {
        let fs = 16_000u32;
        let t60 = 0.5;
        let taps: Vec<f64> = (0..(2.0 * t60 * fs as f64) as usize)
            .map(|n| (-6.9078 * n as f64 / fs as f64 / t60).exp())
            .collect();
        let est = estimate_rt60_from_taps(&taps, fs).unwrap();
        assert!((est - 0.5).abs() < 0.02, "{est}");
        let scaled: Vec<f64> = taps.iter().map(|t| t * 37.0).collect();
        let est2 = estimate_rt60_from_taps(&scaled, fs).unwrap();
        assert!((est - est2).abs() < 1e-9);
    }

    #[test]
    fn rt60_of_single_impulse_is_degenerate() {
        let mut taps = vec![0.0f64; 100];
        taps[10] = 1.0;
        assert!(matches!(estimate_rt60_from_taps(&taps, 16_000), Err(RoomError::DecayRangeNotReached)));
        assert!(matches!(estimate_rt60_from_taps(&[0.0f64; 4], 16_000), Err(RoomError::SilentResponse)));
    }

    fn impulse_rir(delay: usize, len: usize) -> RoomImpulseResponse<f64> {
        let mut taps = vec![0.0; len];
        taps[delay] = 1.0;
        RoomImpulseResponse {
            taps,
            sample_rate_hz: 16_000,
            rt60_target_s: 0.0,
            max_order: 0,
            absorption: 1.0,
            direct_delay_samples: delay as f64,
        }
    }

    #[test]
    fn reverb_identity_and_shift() {
        let x: Vec<f64> = (0..500).map(|n| ((n as f64) * 0.37).sin() * 0.5).collect();
        let audio = AudioBuffer::new(x.clone(), 16_000).unwrap();
        let y = apply_reverb(&audio, &impulse_rir(0, 1)).unwrap();
        assert_eq!(y.len(), 500);
        for (a, b) in y.samples().iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
        let y = apply_reverb(&audio, &impulse_rir(7, 20)).unwrap();
        assert_eq!(y.len(), 519);
        for (n, v) in y.samples().iter().enumerate() {
            let want = if (7..507).contains(&n) { x[n - 7] } else { 0.0 };
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn reverb_rejects_rate_mismatch_and_limits_peak() {
        let audio = AudioBuffer::new(vec![0.9f64; 64], 8000).unwrap();
        assert!(matches!(apply_reverb(&audio, &impulse_rir(0, 4)), Err(RoomError::RateMismatch { .. })));
        let audio = AudioBuffer::new(vec![0.9f64; 64], 16_000).unwrap();
        let mut rir = impulse_rir(0, 4);
        rir.taps = vec![1.0, 1.0, 0.0, 0.0];
        let y = apply_reverb(&audio, &rir).unwrap();
        assert!((y.peak() - ANTI_CLIP_PEAK).abs() < 1e-12);
    }
}
