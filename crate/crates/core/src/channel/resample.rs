use num_integer::Integer;

use super::ChannelError;
use crate::audio::AudioBuffer;
use crate::dsp::{kaiser, sinc};
use crate::scalar::Real;

/// Stopband attenuation of the interpolation filter, in dB.
pub const STOPBAND_ATTENUATION_DB: f64 = 80.0;
/// Transition width relative to the cutoff band `pi / max(L, M)`.
pub const TRANSITION_FRACTION: f64 = 0.1;

/// Rational rate change `up / down` in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResampleRatio {
    pub up: u64,
    pub down: u64,
}

impl ResampleRatio {
    pub fn is_identity(&self) -> bool {
        self.up == 1 && self.down == 1
    }

    /// Output length for `input_len` samples: `ceil(input_len * up / down)`.
    pub fn output_len(&self, input_len: usize) -> usize {
        ((input_len as u128 * u128::from(self.up)).div_ceil(u128::from(self.down))) as usize
    }
}

pub fn reduce_ratio(source_rate: u32, target_rate: u32) -> Result<ResampleRatio, ChannelError> {
    if source_rate == 0 || target_rate == 0 {
        return Err(ChannelError::InvalidRate);
    }
    let g = source_rate.gcd(&target_rate);
    Ok(ResampleRatio { up: u64::from(target_rate / g), down: u64::from(source_rate / g) })
}

/// Polyphase windowed-sinc rational resampler.
///
/// The prototype low-pass runs at `L * fs` with its stopband edge at
/// `pi / max(L, M)`, a Kaiser window sized for the stopband attenuation and a
/// transition band of `TRANSITION_FRACTION` of that edge.
#[derive(Debug, Clone)]
pub struct Resampler {
    ratio: ResampleRatio,
    source_rate: u32,
    target_rate: u32,
    /// `phases[p][m] = L * h[p + m L]`.
    phases: Vec<Vec<f64>>,
    center: usize,
}

impl Resampler {
    pub fn new(source_rate: u32, target_rate: u32) -> Result<Self, ChannelError> {
        let ratio = reduce_ratio(source_rate, target_rate)?;
        let (up, down) = (ratio.up as usize, ratio.down as usize);
        if ratio.is_identity() {
            return Ok(Self { ratio, source_rate, target_rate, phases: vec![vec![1.0]], center: 0 });
        }
        let band = std::f64::consts::PI / up.max(down) as f64;
        let transition = TRANSITION_FRACTION * band;
        let cutoff = band - transition / 2.0;
        let beta = 0.1102 * (STOPBAND_ATTENUATION_DB - 8.7);
        let mut taps = ((STOPBAND_ATTENUATION_DB - 7.95) / (2.285 * transition)).ceil() as usize + 1;
        if taps % 2 == 0 {
            taps += 1;
        }
        let center = (taps - 1) / 2;
        let window = kaiser(taps, beta);
        let mut h: Vec<f64> = (0..taps)
            .map(|k| {
                let x = k as f64 - center as f64;
                cutoff / std::f64::consts::PI * sinc(cutoff / std::f64::consts::PI * x) * window[k]
            })
            .collect();
        let sum: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v *= up as f64 / sum);

        let phases = (0..up).map(|p| h.iter().skip(p).step_by(up).copied().collect()).collect();
        Ok(Self { ratio, source_rate, target_rate, phases, center })
    }

    pub fn ratio(&self) -> ResampleRatio {
        self.ratio
    }

    pub fn filter_len(&self) -> usize {
        self.phases.iter().map(Vec::len).sum()
    }

    pub fn process<T: Real>(&self, audio: &AudioBuffer<T>) -> Result<AudioBuffer<T>, ChannelError> {
        if audio.sample_rate_hz() != self.source_rate {
            return Err(ChannelError::RateMismatch { expected: self.source_rate, actual: audio.sample_rate_hz() });
        }
        if self.ratio.is_identity() || audio.is_empty() {
            return Ok(AudioBuffer::from_parts(audio.samples().to_vec(), self.target_rate));
        }
        let x = audio.samples();
        let up = self.ratio.up as usize;
        let down = self.ratio.down as usize;
        let out_len = self.ratio.output_len(x.len());
        let mut out = Vec::with_capacity(out_len);
        for n in 0..out_len {
            let q = n * down + self.center;
            let phase = &self.phases[q % up];
            let newest = q / up;
            let mut acc = 0.0f64;
            // Taps beyond the input are zeros.
            let first_m = newest.saturating_sub(x.len() - 1);
            for (m, &h) in phase.iter().enumerate().skip(first_m) {
                if m > newest {
                    break;
                }
                acc += h * x[newest - m].to_f64_lossy();
            }
            out.push(T::lit(acc));
        }
        Ok(AudioBuffer::from_parts(out, self.target_rate))
    }
}

/// Resamples `audio` to `target_rate`; equal rates pass through unchanged.
pub fn resample<T: Real>(audio: &AudioBuffer<T>, target_rate: u32) -> Result<AudioBuffer<T>, ChannelError> {
    Resampler::new(audio.sample_rate_hz(), target_rate)?.process(audio)
}
