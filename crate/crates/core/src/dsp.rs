//! Shared numerical building blocks: windows, DCT, FFT convolution.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::{count, Real};

/// Symmetric Hamming window of length `n`.
pub fn hamming<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = count::<T>(n - 1);
    (0..n)
        .map(|i| T::lit(0.54) - T::lit(0.46) * (T::TAU() * count::<T>(i) / denom).cos())
        .collect()
}

/// Periodic Hann window of length `n` (sums to a constant at 50% overlap).
pub fn hann_periodic<T: Real>(n: usize) -> Vec<T> {
    let len = count::<T>(n);
    (0..n)
        .map(|i| T::lit(0.5) - T::lit(0.5) * (T::TAU() * count::<T>(i) / len).cos())
        .collect()
}

/// Symmetric Hann window of length `n`.
pub fn hann_symmetric<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let denom = count::<T>(n - 1);
    (0..n)
        .map(|i| T::lit(0.5) - T::lit(0.5) * (T::TAU() * count::<T>(i) / denom).cos())
        .collect()
}

/// Normalized sinc, `sin(pi x) / (pi x)`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let r = half / k as f64;
        term *= r * r;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser window of odd or even length `n` with shape parameter `beta`.
pub fn kaiser(n: usize, beta: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let norm = bessel_i0(beta);
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let r = 2.0 * i as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm
        })
        .collect()
}

/// Orthonormal DCT-II matrix, `size x size`, row-major. Row `k` is basis `k`.
pub fn dct2_matrix<T: Real>(size: usize) -> Vec<T> {
    dct2_rows(size, size)
}

/// First `rows` rows of the orthonormal DCT-II matrix of `size`.
pub fn dct2_rows<T: Real>(size: usize, rows: usize) -> Vec<T> {
    let n = size as f64;
    let mut m = Vec::with_capacity(size * rows);
    for k in 0..rows {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for i in 0..size {
            let v = scale * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos();
            m.push(T::lit(v));
        }
    }
    m
}

/// First `n_out` orthonormal DCT-II coefficients of `x` using a precomputed matrix.
pub(crate) fn apply_dct<T: Real>(matrix: &[T], x: &[T], n_out: usize) -> Vec<T> {
    let n = x.len();
    (0..n_out)
        .map(|k| matrix[k * n..(k + 1) * n].iter().zip(x).map(|(&a, &b)| a * b).sum())
        .collect()
}

pub(crate) fn forward_fft<T: Real>(len: usize) -> Arc<dyn Fft<T>> {
    FftPlanner::new().plan_fft_forward(len)
}

/// Linear convolution by FFT overlap-add; output length `a.len() + b.len() - 1`.
///
/// `b` is treated as the filter and transformed once.
pub fn fft_convolve<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let fft_len = (2 * b.len()).max(64).next_power_of_two();
    let block = fft_len - b.len() + 1;

    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut scratch = vec![Complex::default(); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];

    let mut kernel: Vec<Complex<T>> = b.iter().map(|&v| Complex::new(v, T::zero())).collect();
    kernel.resize(fft_len, Complex::default());
    fwd.process_with_scratch(&mut kernel, &mut scratch);

    let scale = T::one() / count::<T>(fft_len);
    let mut out = vec![T::zero(); out_len];
    let mut buf = vec![Complex::<T>::default(); fft_len];
    for (bi, chunk) in a.chunks(block).enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::default());
        for (dst, &v) in buf.iter_mut().zip(chunk) {
            dst.re = v;
        }
        fwd.process_with_scratch(&mut buf, &mut scratch);
        for (x, k) in buf.iter_mut().zip(&kernel) {
            *x = *x * *k;
        }
        inv.process_with_scratch(&mut buf, &mut scratch);
        let start = bi * block;
        let valid = (chunk.len() + b.len() - 1).min(out_len - start);
        for (o, c) in out[start..start + valid].iter_mut().zip(&buf) {
            *o = *o + c.re * scale;
        }
    }
    out
}
