use num_complex::Complex64;

use super::ChannelError;
use crate::audio::AudioBuffer;
use crate::scalar::Real;

/// One direct-form-II-transposed second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad<T> {
    pub b0: T,
    pub b1: T,
    pub b2: T,
    pub a1: T,
    pub a2: T,
}

impl<T: Real> Biquad<T> {
    /// Poles of the section (roots of `z^2 + a1 z + a2`); a first-order section has one.
    pub fn poles(&self) -> Vec<Complex64> {
        let a1 = self.a1.to_f64_lossy();
        let a2 = self.a2.to_f64_lossy();
        if a2 == 0.0 {
            return vec![Complex64::new(-a1, 0.0)];
        }
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        vec![(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let f = |v: T| v.to_f64_lossy();
        let z2 = z_inv * z_inv;
        (f(self.b0) + f(self.b1) * z_inv + f(self.b2) * z2) / (1.0 + f(self.a1) * z_inv + f(self.a2) * z2)
    }
}

/// Cascade of second-order sections with its design metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterCascade<T> {
    pub sections: Vec<Biquad<T>>,
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: u32,
}

impl<T: Real> FilterCascade<T> {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = std::f64::consts::TAU * freq_hz / f64::from(self.sample_rate_hz);
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().flat_map(|s| s.poles()).all(|p| p.norm() < 1.0)
    }
}

/// Digital Butterworth low-pass: analog prototype poles, prewarped bilinear transform,
/// grouped into conjugate-pair sections plus one first-order section for odd orders.
/// Each section is normalized to unit DC gain.
pub fn design_butterworth_lowpass<T: Real>(order: usize, cutoff_hz: f64, sample_rate_hz: u32) -> Result<FilterCascade<T>, ChannelError> {
    if order == 0 {
        return Err(ChannelError::InvalidDesign("order must be at least 1".into()));
    }
    let fs = f64::from(sample_rate_hz);
    if !(cutoff_hz > 0.0 && cutoff_hz < fs / 2.0) {
        return Err(ChannelError::CutoffAtOrAboveNyquist { cutoff_hz, sample_rate_hz });
    }
    let k = 2.0 * fs;
    let warped = k * (std::f64::consts::PI * cutoff_hz / fs).tan();
    let bilinear = |s: Complex64| (k + s) / (k - s);
    let analog_pole = |i: usize| {
        let theta = std::f64::consts::PI * (2 * i + order + 1) as f64 / (2 * order) as f64;
        Complex64::from_polar(warped, theta)
    };

    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 0..order / 2 {
        let z = bilinear(analog_pole(i));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad { b0: T::lit(g), b1: T::lit(2.0 * g), b2: T::lit(g), a1: T::lit(a1), a2: T::lit(a2) });
    }
    if order % 2 == 1 {
        let z = bilinear(Complex64::new(-warped, 0.0)).re;
        let g = (1.0 - z) / 2.0;
        sections.push(Biquad { b0: T::lit(g), b1: T::lit(g), b2: T::zero(), a1: T::lit(-z), a2: T::zero() });
    }
    Ok(FilterCascade { sections, order, cutoff_hz, sample_rate_hz })
}

/// Runs the cascade over `audio` from zero initial state; output has the input length.
pub fn apply_filter<T: Real>(cascade: &FilterCascade<T>, audio: &AudioBuffer<T>) -> Result<AudioBuffer<T>, ChannelError> {
    if audio.sample_rate_hz() != cascade.sample_rate_hz {
        return Err(ChannelError::RateMismatch { expected: cascade.sample_rate_hz, actual: audio.sample_rate_hz() });
    }
    let mut y = audio.samples().to_vec();
    for s in &cascade.sections {
        let (mut s1, mut s2) = (T::zero(), T::zero());
        for v in y.iter_mut() {
            let x = *v;
            let out = s.b0 * x + s1;
            s1 = s.b1 * x - s.a1 * out + s2;
            s2 = s.b2 * x - s.a2 * out;
            *v = out;
        }
    }
    Ok(AudioBuffer::from_parts(y, audio.sample_rate_hz()))
}
