use num_complex::Complex64;
use rayon::prelude::*;

use super::{append_deltas, FeatureError, FeatureKind, FeatureMatrix};
use crate::audio::AudioBuffer;
use crate::dsp::{apply_dct, dct2_rows};
use crate::scalar::Real;

/// Lowest admissible CQT frequency.
pub const MIN_FMIN_HZ: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct CqccConfig {
    pub bins_per_octave: usize,
    pub n_octaves: u32,
    /// Highest analysed frequency; `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    /// Number of cepstral coefficients kept, including c0.
    pub n_coeffs: usize,
    pub hop_samples: usize,
    /// Uniform grid density; `None` means the total CQT bin count.
    pub resample_points: Option<usize>,
    /// Added to `|X|^2` before the logarithm.
    pub log_floor: f64,
}

impl Default for CqccConfig {
    fn default() -> Self {
        Self {
            bins_per_octave: 96,
            n_octaves: 9,
            fmax_hz: None,
            n_coeffs: 30,
            hop_samples: 256,
            resample_points: None,
            log_floor: 1e-10,
        }
    }
}

impl CqccConfig {
    pub fn total_bins(&self) -> usize {
        self.bins_per_octave * self.n_octaves as usize
    }

    pub fn fmax(&self, sample_rate_hz: u32) -> f64 {
        self.fmax_hz.unwrap_or(f64::from(sample_rate_hz) / 2.0)
    }

    pub fn fmin(&self, sample_rate_hz: u32) -> f64 {
        self.fmax(sample_rate_hz) / 2f64.powi(self.n_octaves as i32)
    }

    /// Quality factor `1 / (2^(1/B) - 1)`.
    pub fn q_factor(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    /// Center frequencies `fmin * 2^(k/B)`.
    pub fn center_frequencies(&self, sample_rate_hz: u32) -> Vec<f64> {
        let fmin = self.fmin(sample_rate_hz);
        (0..self.total_bins()).map(|k| fmin * 2f64.powf(k as f64 / self.bins_per_octave as f64)).collect()
    }

    fn validate(&self, sample_rate_hz: u32) -> Result<(), FeatureError> {
        let invalid = |m: String| Err(FeatureError::InvalidConfig(m));
        if self.bins_per_octave == 0 || self.n_octaves == 0 || self.hop_samples == 0 {
            return invalid("bins_per_octave, n_octaves and hop_samples must be positive".into());
        }
        let fmax = self.fmax(sample_rate_hz);
        if !(fmax > 0.0 && fmax <= f64::from(sample_rate_hz) / 2.0) {
            return invalid(format!("fmax {fmax} Hz must lie in (0, Nyquist]"));
        }
        let fmin = self.fmin(sample_rate_hz);
        if fmin < MIN_FMIN_HZ {
            return invalid(format!("fmin {fmin} Hz is below {MIN_FMIN_HZ} Hz"));
        }
        let points = self.resample_points.unwrap_or(self.total_bins());
        if points == 0 || self.n_coeffs == 0 || self.n_coeffs > points {
            return invalid(format!("n_coeffs {} must be in 1..={points}", self.n_coeffs));
        }
        if !(self.log_floor > 0.0) {
            return invalid("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// Constant-Q transform: `frames x bins` complex coefficients, row-major.
#[derive(Debug, Clone)]
pub struct CqtMatrix {
    pub frames: usize,
    pub bins: usize,
    pub values: Vec<Complex64>,
    pub freqs_hz: Vec<f64>,
    pub window_lengths: Vec<usize>,
    /// Bins whose window is longer than the signal; computed over zero padding.
    pub padded_bins: Vec<usize>,
}

impl CqtMatrix {
    pub fn at(&self, frame: usize, bin: usize) -> Complex64 {
        self.values[frame * self.bins + bin]
    }
}

/// `e^{i 2 pi cycles}` with the argument reduced before scaling for accuracy.
fn turn(cycles: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * cycles.fract())
}

/// Bins processed together; their independent recurrences keep the inner loop
/// free of long dependency chains and let it vectorize.
const GROUP: usize = 8;

/// Prefix sums `P_r[i] = sum_{t<i} x[t] e^{i 2 pi r t}` for the three rates
/// `r = -f`, `-f + 1/N` and `-f - 1/N` of each bin of a group, evaluated at the
/// sorted `checkpoints`.
///
/// Returns, per checkpoint, `[P_0, P_up, P_down]` for every bin of the group.
/// Phasors are recomputed from scratch every `RESYNC` samples to bound drift.
fn modulated_prefixes(x: &[f64], freq_cycles: &[f64; GROUP], inv_n: &[f64; GROUP], checkpoints: &[usize]) -> Vec<[[Complex64; 3]; GROUP]> {
    const RESYNC: usize = 1024;
    let step: [Complex64; GROUP] = std::array::from_fn(|g| turn(-freq_cycles[g]));
    let mod_step: [Complex64; GROUP] = std::array::from_fn(|g| turn(inv_n[g]));
    let (sr, si) = (step.map(|c| c.re), step.map(|c| c.im));
    let (mr_step, mi_step) = (mod_step.map(|c| c.re), mod_step.map(|c| c.im));
    let mut acc = [[0.0f64; GROUP]; 6];
    let (mut zr, mut zi, mut mr, mut mi) = ([0.0f64; GROUP], [0.0f64; GROUP], [0.0f64; GROUP], [0.0f64; GROUP]);
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut t = 0usize;
    for &c in checkpoints {
        while t < c {
            if t % RESYNC == 0 {
                for g in 0..GROUP {
                    let z = turn(-freq_cycles[g] * t as f64);
                    let m = turn(inv_n[g] * t as f64);
                    (zr[g], zi[g], mr[g], mi[g]) = (z.re, z.im, m.re, m.im);
                }
            }
            let end = c.min((t / RESYNC + 1) * RESYNC);
            for &v in &x[t..end] {
                for g in 0..GROUP {
                    let (wr, wi) = (zr[g] * v, zi[g] * v);
                    acc[0][g] += wr;
                    acc[1][g] += wi;
                    // w * m and w * conj(m) share their four products.
                    let (ac, bd, ad, bc) = (wr * mr[g], wi * mi[g], wr * mi[g], wi * mr[g]);
                    acc[2][g] += ac - bd;
                    acc[3][g] += ad + bc;
                    acc[4][g] += ac + bd;
                    acc[5][g] += bc - ad;
                    let nzr = zr[g] * sr[g] - zi[g] * si[g];
                    zi[g] = zr[g] * si[g] + zi[g] * sr[g];
                    zr[g] = nzr;
                    let nmr = mr[g] * mr_step[g] - mi[g] * mi_step[g];
                    mi[g] = mr[g] * mi_step[g] + mi[g] * mr_step[g];
                    mr[g] = nmr;
                }
            }
            t = end;
        }
        out.push(std::array::from_fn(|g| {
            [
                Complex64::new(acc[0][g], acc[1][g]),
                Complex64::new(acc[2][g], acc[3][g]),
                Complex64::new(acc[4][g], acc[5][g]),
            ]
        }));
    }
    out
}

/// One group of CQT bins across all frames.
///
/// Frame `m` is centered at `m * hop` and computes
/// `X = (1/N) sum_n x[s+n] w[n] e^{-i 2 pi f n / fs}` with a periodic Hann `w` of
/// length `N` and `s = m * hop - N/2`; samples outside the signal are zero. The Hann
/// window is `1/2 - (e^{i 2 pi n/N} + e^{-i 2 pi n/N}) / 4`, so every windowed sum is
/// an exact combination of three modulated prefix-sum differences. Groups shorter
/// than `GROUP` are padded by repeating their last bin.
fn cqt_bins(x: &[f64], freq_cycles: &[f64], n_ks: &[usize], hop: usize, frames: usize) -> Vec<Vec<Complex64>> {
    let used = freq_cycles.len();
    let fc: [f64; GROUP] = std::array::from_fn(|g| freq_cycles[g.min(used - 1)]);
    let nk: [usize; GROUP] = std::array::from_fn(|g| n_ks[g.min(used - 1)]);
    let inv_n = nk.map(|n| 1.0 / n as f64);
    let len = x.len() as isize;
    let bounds: Vec<[(isize, usize, usize); GROUP]> = (0..frames)
        .map(|m| {
            std::array::from_fn(|g| {
                let s = (m * hop) as isize - (nk[g] / 2) as isize;
                (s, s.clamp(0, len) as usize, (s + nk[g] as isize).clamp(0, len) as usize)
            })
        })
        .collect();
    let mut checkpoints: Vec<usize> = bounds.iter().flatten().flat_map(|&(_, lo, hi)| [lo, hi]).collect();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let sums = modulated_prefixes(x, &fc, &inv_n, &checkpoints);
    let at = |i: usize| &sums[checkpoints.binary_search(&i).expect("checkpoint recorded")];
    (0..used)
        .map(|g| {
            bounds
                .iter()
                .map(|b| {
                    let (s, lo, hi) = b[g];
                    if lo >= hi {
                        return Complex64::default();
                    }
                    let (h, l) = (at(hi)[g], at(lo)[g]);
                    let sf = s as f64;
                    let a = h[0] - l[0];
                    let up = turn(-inv_n[g] * sf) * (h[1] - l[1]);
                    let down = turn(inv_n[g] * sf) * (h[2] - l[2]);
                    turn(fc[g] * sf) * (0.5 * a - 0.25 * (up + down)) * inv_n[g]
                })
                .collect()
        })
        .collect()
}

/// Constant-Q transform with geometric bins `fmin * 2^(k/B)` and window lengths
/// `round(Q fs / f_k)`, hopped by `hop_samples` with `1 + floor(N / hop)` centered frames.
pub fn cqt<T: Real>(audio: &AudioBuffer<T>, cfg: &CqccConfig) -> Result<CqtMatrix, FeatureError> {
    let fs = audio.sample_rate_hz();
    cfg.validate(fs)?;
    if audio.is_empty() {
        return Err(FeatureError::TooShort { samples: 0, window: 1 });
    }
    let x: Vec<f64> = audio.samples().iter().map(|v| v.to_f64_lossy()).collect();
    let freqs = cfg.center_frequencies(fs);
    let q = cfg.q_factor();
    let window_lengths: Vec<usize> = freqs.iter().map(|f| ((q * f64::from(fs) / f).round() as usize).max(1)).collect();
    let padded_bins = (0..freqs.len()).filter(|&k| window_lengths[k] > x.len()).collect();
    let frames = 1 + x.len() / cfg.hop_samples;
    let cycles: Vec<f64> = freqs.iter().map(|f| f / f64::from(fs)).collect();
    let columns: Vec<Vec<Complex64>> = cycles
        .par_chunks(GROUP)
        .zip(window_lengths.par_chunks(GROUP))
        .flat_map_iter(|(f, n)| cqt_bins(&x, f, n, cfg.hop_samples, frames))
        .collect();
    let bins = freqs.len();
    let mut values = vec![Complex64::default(); frames * bins];
    for (k, col) in columns.iter().enumerate() {
        for (m, v) in col.iter().enumerate() {
            values[m * bins + k] = *v;
        }
    }
    Ok(CqtMatrix { frames, bins, values, freqs_hz: freqs, window_lengths, padded_bins })
}

/// Maps `points` uniformly spaced frequencies over `[freqs[0], freqs[last]]` onto the
/// increasing grid `freqs`: each entry is `(i, w)` meaning `(1 - w) v[i] + w v[i + 1]`.
pub fn uniform_grid(freqs: &[f64], points: usize) -> Vec<(usize, f64)> {
    let last = freqs.len() - 1;
    let (lo, hi) = (freqs[0], freqs[last]);
    (0..points)
        .map(|j| {
            if j == 0 || last == 0 {
                return (0, 0.0);
            }
            if j == points - 1 {
                return (last, 0.0);
            }
            let g = lo + (hi - lo) * j as f64 / (points - 1) as f64;
            let i = (freqs.partition_point(|&f| f <= g) - 1).min(last - 1);
            (i, ((g - freqs[i]) / (freqs[i + 1] - freqs[i])).clamp(0.0, 1.0))
        })
        .collect()
}

fn interpolate(v: &[f64], grid: &[(usize, f64)]) -> Vec<f64> {
    grid.iter().map(|&(i, w)| if w == 0.0 { v[i] } else { (1.0 - w) * v[i] + w * v[i + 1] }).collect()
}

/// Constant-Q cepstral coefficients with deltas and delta-deltas.
pub fn cqcc<T: Real>(audio: &AudioBuffer<T>, cfg: &CqccConfig) -> Result<FeatureMatrix<T>, FeatureError> {
    let spec = cqt(audio, cfg)?;
    let points = cfg.resample_points.unwrap_or(spec.bins);
    let grid = uniform_grid(&spec.freqs_hz, points);
    let dct = dct2_rows::<f64>(points, cfg.n_coeffs);
    let rows: Vec<Vec<f64>> = (0..spec.frames)
        .into_par_iter()
        .map(|m| {
            let logs: Vec<f64> = spec.values[m * spec.bins..(m + 1) * spec.bins]
                .iter()
                .map(|c| (c.norm_sqr() + cfg.log_floor).ln())
                .collect();
            apply_dct(&dct, &interpolate(&logs, &grid), cfg.n_coeffs)
        })
        .collect();
    let values = rows.into_iter().flatten().map(T::lit).collect();
    let stat = FeatureMatrix::new(spec.frames, cfg.n_coeffs, values, FeatureKind::Cqcc)?;
    Ok(append_deltas(&stat))
}
