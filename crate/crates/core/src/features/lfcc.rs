use num_complex::Complex;

use super::{append_deltas, FeatureError, FeatureKind, FeatureMatrix};
use crate::audio::AudioBuffer;
use crate::dsp::{apply_dct, dct2_matrix, forward_fft, hamming};
use crate::scalar::Real;

/// The only sample rate accepted by [`lfcc`].
pub const LFCC_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LfccConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub n_filters: usize,
    /// Number of cepstral coefficients kept, including c0.
    pub n_coeffs: usize,
    pub log_floor: f64,
}

impl Default for LfccConfig {
    fn default() -> Self {
        Self { window_ms: 20.0, hop_ms: 10.0, fft_size: 512, n_filters: 20, n_coeffs: 20, log_floor: 1e-10 }
    }
}

impl LfccConfig {
    fn validate(&self, sample_rate_hz: u32) -> Result<(usize, usize), FeatureError> {
        let invalid = |m: String| Err(FeatureError::InvalidConfig(m));
        if self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return invalid(format!("n_coeffs {} must be in 1..={}", self.n_coeffs, self.n_filters));
        }
        if !(self.hop_ms > 0.0 && self.window_ms >= self.hop_ms) {
            return invalid(format!("need 0 < hop_ms ({}) <= window_ms ({})", self.hop_ms, self.window_ms));
        }
        if !(self.log_floor > 0.0) {
            return invalid("log_floor must be positive".into());
        }
        let (w, h) = window_and_hop(sample_rate_hz, self.window_ms, self.hop_ms);
        if w > self.fft_size {
            return invalid(format!("window of {w} samples exceeds fft_size {}", self.fft_size));
        }
        Ok((w, h))
    }
}

fn window_and_hop(sample_rate_hz: u32, window_ms: f64, hop_ms: f64) -> (usize, usize) {
    let fs = f64::from(sample_rate_hz);
    let w = (window_ms * fs / 1000.0).round() as usize;
    let h = (hop_ms * fs / 1000.0).round() as usize;
    (w.max(1), h.max(1))
}

/// Splits `audio` into Hamming-windowed frames of `window_ms`, hopped by `hop_ms`.
/// Frame count is `1 + floor((N - W) / H)`; the signal is never padded.
pub fn frame_signal<T: Real>(audio: &AudioBuffer<T>, window_ms: f64, hop_ms: f64) -> Result<Vec<Vec<T>>, FeatureError> {
    if !(hop_ms > 0.0 && window_ms > 0.0) {
        return Err(FeatureError::InvalidConfig("window and hop must be positive".into()));
    }
    let (w, h) = window_and_hop(audio.sample_rate_hz(), window_ms, hop_ms);
    let x = audio.samples();
    if x.len() < w {
        return Err(FeatureError::TooShort { samples: x.len(), window: w });
    }
    let win = hamming::<T>(w);
    let n_frames = 1 + (x.len() - w) / h;
    Ok((0..n_frames).map(|m| x[m * h..m * h + w].iter().zip(&win).map(|(&a, &b)| a * b).collect()).collect())
}

/// Triangular filters with `n_filters + 2` edges linearly spaced over `[0, fs/2]`,
/// evaluated on the `fft_size / 2 + 1` FFT bins. Row-major `n_filters x n_bins`.
pub fn linear_filterbank(n_filters: usize, fft_size: usize, sample_rate_hz: u32) -> Vec<f64> {
    let n_bins = fft_size / 2 + 1;
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    let edges: Vec<f64> = (0..n_filters + 2).map(|i| nyquist * i as f64 / (n_filters + 1) as f64).collect();
    let mut bank = vec![0.0; n_filters * n_bins];
    for j in 0..n_filters {
        let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
        for b in 0..n_bins {
            let f = b as f64 * f64::from(sample_rate_hz) / fft_size as f64;
            let w = if f > lo && f <= mid {
                (f - lo) / (mid - lo)
            } else if f > mid && f < hi {
                (hi - f) / (hi - mid)
            } else {
                0.0
            };
            bank[j * n_bins + b] = w;
        }
    }
    bank
}

/// Linear-frequency cepstral coefficients with deltas and delta-deltas.
pub fn lfcc<T: Real>(audio: &AudioBuffer<T>, cfg: &LfccConfig) -> Result<FeatureMatrix<T>, FeatureError> {
    if audio.sample_rate_hz() != LFCC_RATE_HZ {
        return Err(FeatureError::RateMismatch { expected: LFCC_RATE_HZ, actual: audio.sample_rate_hz() });
    }
    cfg.validate(audio.sample_rate_hz())?;
    let frames = frame_signal(audio, cfg.window_ms, cfg.hop_ms)?;
    let n_bins = cfg.fft_size / 2 + 1;
    let bank = linear_filterbank(cfg.n_filters, cfg.fft_size, audio.sample_rate_hz());
    let dct = dct2_matrix::<f64>(cfg.n_filters);
    let fft = forward_fft::<f64>(cfg.fft_size);
    let mut buf = vec![Complex::<f64>::default(); cfg.fft_size];
    let mut values = Vec::with_capacity(frames.len() * cfg.n_coeffs);
    let mut power = vec![0.0; n_bins];
    let mut log_energy = vec![0.0; cfg.n_filters];
    for frame in &frames {
        buf.iter_mut().for_each(|c| *c = Complex::default());
        for (dst, v) in buf.iter_mut().zip(frame) {
            dst.re = v.to_f64_lossy();
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (j, le) in log_energy.iter_mut().enumerate() {
            let e: f64 = bank[j * n_bins..(j + 1) * n_bins].iter().zip(&power).map(|(w, p)| w * p).sum();
            *le = e.max(cfg.log_floor).ln();
        }
        values.extend(apply_dct(&dct, &log_energy, cfg.n_coeffs).into_iter().map(T::lit));
    }
    let stat = FeatureMatrix::new(frames.len(), cfg.n_coeffs, values, FeatureKind::Lfcc)?;
    Ok(append_deltas(&stat))
}
