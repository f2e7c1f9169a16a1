//! Diagonal-covariance Gaussian mixture back-end: k-means++ seeding, EM training,
//! log-likelihood-ratio scoring and the model file format.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::{FeatureKind, FeatureMatrix};
use crate::scalar::Real;

/// Magic bytes opening a model file.
pub const MODEL_MAGIC: &[u8; 4] = b"LBGM";
/// Model file format version.
pub const MODEL_VERSION: u32 = 1;
/// Absolute lower bound on any variance.
pub const MIN_VARIANCE: f64 = 1e-10;
/// Components with less responsibility mass than this keep their previous parameters.
const DEAD_COMPONENT_MASS: f64 = 1e-8;
/// Frames per E-step chunk; chunks are reduced in index order.
const CHUNK_FRAMES: usize = 512;
/// Chunks evaluated concurrently before folding into the running totals.
const CHUNKS_PER_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("need at least {k} frames for {k} components, got {frames}")]
    TooFewFrames { frames: usize, k: usize },
    #[error("training data is empty")]
    Empty,
    #[error("training data contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("dimension mismatch: model has {expected}, features have {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("feature kind mismatch: model trained on {expected}, features are {actual}")]
    KindMismatch { expected: FeatureKind, actual: FeatureKind },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed model file {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("cannot access model file {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub em_iters: usize,
    pub kmeans_iters: usize,
    /// Variance floor as a fraction of the global per-dimension variance.
    pub var_floor_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { k: 512, em_iters: 10, kmeans_iters: 10, var_floor_factor: 1e-3, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), GmmError> {
        if self.k == 0 || self.em_iters == 0 {
            return Err(GmmError::InvalidConfig("k and em_iters must be at least 1".into()));
        }
        if !(self.var_floor_factor >= 0.0 && self.var_floor_factor.is_finite()) {
            return Err(GmmError::InvalidConfig("var_floor_factor must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Mixture parameters; all matrices are `k x d` row-major.
#[derive(Debug, Clone)]
pub struct GmmModel {
    k: usize,
    d: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    kind: FeatureKind,
    /// `ln w_k - 0.5 sum_d ln(2 pi var_kd)`; `-inf` for zero-weight components.
    log_norm: Vec<f64>,
    inv_var: Vec<f64>,
}

impl PartialEq for GmmModel {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k
            && self.d == other.d
            && self.kind == other.kind
            && self.weights == other.weights
            && self.means == other.means
            && self.variances == other.variances
    }
}

impl GmmModel {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
        d: usize,
        kind: FeatureKind,
    ) -> Result<Self, GmmError> {
        let k = weights.len();
        let invalid = |m: String| Err(GmmError::InvalidConfig(m));
        if k == 0 || d == 0 || means.len() != k * d || variances.len() != k * d {
            return invalid(format!("inconsistent shapes for k = {k}, d = {d}"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return invalid("weights must be non-negative and sum to 1".into());
        }
        if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) || means.iter().any(|m| !m.is_finite()) {
            return invalid("means must be finite and variances positive".into());
        }
        let inv_var = variances.iter().map(|v| 1.0 / v).collect();
        let log_norm = (0..k)
            .map(|c| {
                let det: f64 = variances[c * d..(c + 1) * d].iter().map(|v| (std::f64::consts::TAU * v).ln()).sum();
                weights[c].ln() - 0.5 * det
            })
            .collect();
        Ok(Self { k, d, weights, means, variances, kind, log_norm, inv_var })
    }

    pub fn components(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> usize {
        self.d
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Per-component log joint densities `ln w_k + ln N(x; mu_k, var_k)` written into `out`.
    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (c, o) in out.iter_mut().enumerate() {
            if self.log_norm[c] == f64::NEG_INFINITY {
                *o = f64::NEG_INFINITY;
                continue;
            }
            let mu = &self.means[c * self.d..(c + 1) * self.d];
            let iv = &self.inv_var[c * self.d..(c + 1) * self.d];
            let mut q = 0.0;
            for ((&xv, &m), &i) in x.iter().zip(mu).zip(iv) {
                let diff = xv - m;
                q += diff * diff * i;
            }
            *o = self.log_norm[c] - 0.5 * q;
        }
    }

    /// `ln sum_k w_k N(x; mu_k, diag var_k)` evaluated by log-sum-exp.
    pub fn log_likelihood<T: Real>(&self, frame: &[T]) -> Result<f64, GmmError> {
        if frame.len() != self.d {
            return Err(GmmError::DimensionMismatch { expected: self.d, actual: frame.len() });
        }
        let x: Vec<f64> = frame.iter().map(|v| v.to_f64_lossy()).collect();
        let mut buf = vec![0.0; self.k];
        self.component_log_densities(&x, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    /// Mean per-frame log-likelihood of a feature matrix.
    pub fn mean_log_likelihood<T: Real>(&self, features: &FeatureMatrix<T>) -> Result<f64, GmmError> {
        self.check(features)?;
        let data = to_f64(features);
        Ok(self.frame_log_likelihoods(&data).iter().sum::<f64>() / features.frames().max(1) as f64)
    }

    fn frame_log_likelihoods(&self, data: &[f64]) -> Vec<f64> {
        data.par_chunks(self.d * CHUNK_FRAMES)
            .flat_map_iter(|chunk| {
                let mut buf = vec![0.0; self.k];
                chunk
                    .chunks_exact(self.d)
                    .map(|x| {
                        self.component_log_densities(x, &mut buf);
                        log_sum_exp(&buf)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn check<T: Real>(&self, features: &FeatureMatrix<T>) -> Result<(), GmmError> {
        if features.kind() != self.kind {
            return Err(GmmError::KindMismatch { expected: self.kind, actual: features.kind() });
        }
        if features.dims() != self.d {
            return Err(GmmError::DimensionMismatch { expected: self.d, actual: features.dims() });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(17 + 8 * self.k * (1 + 2 * self.d));
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.push(self.kind.code());
        for v in self.weights.iter().chain(&self.means).chain(&self.variances) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self, GmmError> {
        let bad = |reason: String| GmmError::Format { path: path.to_path_buf(), reason };
        if bytes.len() < 17 || &bytes[..4] != MODEL_MAGIC {
            return Err(bad("missing LBGM header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != MODEL_VERSION {
            return Err(bad(format!("unsupported version {}", word(4))));
        }
        let (k, d) = (word(8) as usize, word(12) as usize);
        let kind = FeatureKind::from_code(bytes[16]).ok_or_else(|| bad(format!("unknown kind byte {}", bytes[16])))?;
        let body = &bytes[17..];
        let expected = k.checked_mul(1 + 2 * d).and_then(|n| n.checked_mul(8));
        if expected != Some(body.len()) {
            return Err(bad(format!("k = {k}, d = {d} header does not match {} payload bytes", body.len())));
        }
        let vals: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let (weights, rest) = vals.split_at(k);
        let (means, variances) = rest.split_at(k * d);
        Self::new(weights.to_vec(), means.to_vec(), variances.to_vec(), d, kind).map_err(|e| bad(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), GmmError> {
        fs::write(path, self.to_bytes()).map_err(|source| GmmError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, GmmError> {
        let bytes = fs::read(path).map_err(|source| GmmError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes, path)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

fn to_f64<T: Real>(features: &FeatureMatrix<T>) -> Vec<f64> {
    features.values().iter().map(|v| v.to_f64_lossy()).collect()
}

/// Per-dimension floor: `factor * global variance`, never below [`MIN_VARIANCE`].
fn variance_floor(data: &[f64], d: usize, factor: f64) -> Vec<f64> {
    let n = (data.len() / d) as f64;
    let mut mean = vec![0.0; d];
    for row in data.chunks_exact(d) {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for row in data.chunks_exact(d) {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter().map(|v| (factor * v / n).max(MIN_VARIANCE)).collect()
}

fn validate_data<T: Real>(features: &FeatureMatrix<T>, k: usize) -> Result<Vec<f64>, GmmError> {
    if features.frames() == 0 || features.dims() == 0 {
        return Err(GmmError::Empty);
    }
    if features.frames() < k {
        return Err(GmmError::TooFewFrames { frames: features.frames(), k });
    }
    let data = to_f64(features);
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(GmmError::NonFinite(i));
    }
    Ok(data)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Inverse-CDF draw: first index whose cumulative weight exceeds `u * total`.
fn draw(weights: &[f64], rng: &mut ChaCha8Rng) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc > target && w > 0.0 {
            return Some(i);
        }
    }
    weights.iter().rposition(|&w| w > 0.0)
}

/// Distinct rows in sorted order with their multiplicities.
fn unique_rows(data: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut rows: Vec<&[f64]> = data.chunks_exact(d).collect();
    let cmp = |a: &&[f64], b: &&[f64]| a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal);
    rows.sort_by(cmp);
    let mut points = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut prev: Option<&[f64]> = None;
    for r in rows {
        if prev.is_some_and(|p| cmp(&p, &r).is_eq()) {
            *counts.last_mut().expect("a previous row") += 1.0;
        } else {
            points.extend_from_slice(r);
            counts.push(1.0);
            prev = Some(r);
        }
    }
    (points, counts)
}

fn nearest(x: &[f64], centroids: &[f64], d: usize) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.chunks_exact(d).enumerate() {
        let dist = sq_dist(x, mu);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best.0
}

/// k-means++ seeding followed by weighted Lloyd iterations over the distinct frames.
/// The resulting clusters define the initial weights, means and floored variances.
pub fn kmeans_init<T: Real>(features: &FeatureMatrix<T>, cfg: &TrainConfig) -> Result<GmmModel, GmmError> {
    cfg.validate()?;
    let data = validate_data(features, cfg.k)?;
    let d = features.dims();
    let floor = variance_floor(&data, d, cfg.var_floor_factor);
    Ok(init_from_data(&data, d, cfg, &floor, features.kind()))
}

fn init_from_data(data: &[f64], d: usize, cfg: &TrainConfig, floor: &[f64], kind: FeatureKind) -> GmmModel {
    let (points, counts) = unique_rows(data, d);
    let n_unique = counts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut centroids = Vec::with_capacity(cfg.k * d);
    let first = draw(&counts, &mut rng).expect("non-empty data");
    centroids.extend_from_slice(&points[first * d..(first + 1) * d]);
    let mut best_d2: Vec<f64> = points.par_chunks(d).map(|p| sq_dist(p, &centroids[..d])).collect();
    for _ in 1..cfg.k {
        let weights: Vec<f64> = best_d2.iter().zip(&counts).map(|(a, b)| a * b).collect();
        // With fewer distinct points than components, fall back to count-weighted draws.
        let pick = draw(&weights, &mut rng).or_else(|| draw(&counts, &mut rng)).expect("non-empty data");
        let c = points[pick * d..(pick + 1) * d].to_vec();
        best_d2.par_iter_mut().zip(points.par_chunks(d)).for_each(|(b, p)| *b = b.min(sq_dist(p, &c)));
        centroids.extend(c);
    }

    let mut assign = vec![0usize; n_unique];
    for _ in 0..cfg.kmeans_iters.max(1) {
        assign = points.par_chunks(d).map(|p| nearest(p, &centroids, d)).collect();
        let mut sums = vec![0.0; cfg.k * d];
        let mut mass = vec![0.0; cfg.k];
        for (i, &c) in assign.iter().enumerate() {
            mass[c] += counts[i];
            for j in 0..d {
                sums[c * d + j] += counts[i] * points[i * d + j];
            }
        }
        for c in 0..cfg.k {
            if mass[c] > 0.0 {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / mass[c];
                }
            }
        }
    }
    assign = points.par_chunks(d).map(|p| nearest(p, &centroids, d)).collect();

    let n: f64 = counts.iter().sum();
    let mut mass = vec![0.0; cfg.k];
    let mut var = vec![0.0; cfg.k * d];
    for (i, &c) in assign.iter().enumerate() {
        mass[c] += counts[i];
        for j in 0..d {
            let diff = points[i * d + j] - centroids[c * d + j];
            var[c * d + j] += counts[i] * diff * diff;
        }
    }
    for c in 0..cfg.k {
        for j in 0..d {
            let v = if mass[c] > 0.0 { var[c * d + j] / mass[c] } else { 0.0 };
            var[c * d + j] = v.max(floor[j]);
        }
    }
    let weights = normalize(mass.iter().map(|m| m / n).collect());
    GmmModel::new(weights, centroids, var, d, kind).expect("k-means produces a valid mixture")
}

fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Sufficient statistics of one E-step.
struct Accumulator {
    ll: f64,
    mass: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Accumulator {
    fn zeros(k: usize, d: usize) -> Self {
        Self { ll: 0.0, mass: vec![0.0; k], first: vec![0.0; k * d], second: vec![0.0; k * d] }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.ll += other.ll;
        self.mass.iter_mut().zip(&other.mass).for_each(|(a, b)| *a += b);
        self.first.iter_mut().zip(&other.first).for_each(|(a, b)| *a += b);
        self.second.iter_mut().zip(&other.second).for_each(|(a, b)| *a += b);
    }
}

fn e_step_chunk(model: &GmmModel, chunk: &[f64]) -> Accumulator {
    let (k, d) = (model.k, model.d);
    let mut acc = Accumulator::zeros(k, d);
    let mut buf = vec![0.0; k];
    for x in chunk.chunks_exact(d) {
        model.component_log_densities(x, &mut buf);
        let lse = log_sum_exp(&buf);
        acc.ll += lse;
        for c in 0..k {
            let g = (buf[c] - lse).exp();
            if g == 0.0 {
                continue;
            }
            acc.mass[c] += g;
            let (f, s) = (&mut acc.first[c * d..(c + 1) * d], &mut acc.second[c * d..(c + 1) * d]);
            for j in 0..d {
                f[j] += g * x[j];
                s[j] += g * x[j] * x[j];
            }
        }
    }
    acc
}

/// E-step over all frames with a schedule-independent reduction order.
fn e_step(model: &GmmModel, data: &[f64]) -> Accumulator {
    let chunks: Vec<&[f64]> = data.chunks(model.d * CHUNK_FRAMES).collect();
    let mut total = Accumulator::zeros(model.k, model.d);
    for batch in chunks.chunks(CHUNKS_PER_BATCH) {
        let parts: Vec<Accumulator> = batch.par_iter().map(|c| e_step_chunk(model, c)).collect();
        for p in &parts {
            total.merge(p);
        }
    }
    total
}

fn m_step(model: &GmmModel, acc: &Accumulator, floor: &[f64]) -> GmmModel {
    let (k, d) = (model.k, model.d);
    let total: f64 = acc.mass.iter().sum();
    let mut means = model.means.clone();
    let mut vars = model.variances.clone();
    for c in 0..k {
        let m = acc.mass[c];
        if m < DEAD_COMPONENT_MASS {
            continue;
        }
        for j in 0..d {
            let mu = acc.first[c * d + j] / m;
            means[c * d + j] = mu;
            vars[c * d + j] = (acc.second[c * d + j] / m - mu * mu).max(floor[j]);
        }
    }
    let weights = normalize(acc.mass.iter().map(|m| m / total).collect());
    GmmModel::new(weights, means, vars, d, model.kind).expect("M-step preserves validity")
}

/// A trained model with its mean log-likelihood after initialization and after each EM iteration.
#[derive(Debug, Clone)]
pub struct TrainedGmm {
    pub model: GmmModel,
    pub log_likelihood_history: Vec<f64>,
}

/// k-means initialization followed by `em_iters` EM iterations with variance flooring.
pub fn em_train<T: Real>(features: &FeatureMatrix<T>, cfg: &TrainConfig) -> Result<TrainedGmm, GmmError> {
    cfg.validate()?;
    let data = validate_data(features, cfg.k)?;
    let d = features.dims();
    let n = features.frames() as f64;
    let floor = variance_floor(&data, d, cfg.var_floor_factor);
    let mut model = init_from_data(&data, d, cfg, &floor, features.kind());
    let mut history = Vec::with_capacity(cfg.em_iters + 1);
    for _ in 0..cfg.em_iters {
        let acc = e_step(&model, &data);
        history.push(acc.ll / n);
        model = m_step(&model, &acc, &floor);
    }
    history.push(e_step(&model, &data).ll / n);
    Ok(TrainedGmm { model, log_likelihood_history: history })
}

/// Mean per-frame log-likelihood ratio `ln p(x | bonafide) - ln p(x | spoof)`.
///
/// Positive and negative frame ratios are summed separately in magnitude order, so
/// the score is independent of frame order and exactly antisymmetric in the models.
pub fn llr_score<T: Real>(bonafide: &GmmModel, spoof: &GmmModel, features: &FeatureMatrix<T>) -> Result<f64, GmmError> {
    bonafide.check(features)?;
    spoof.check(features)?;
    if features.frames() == 0 {
        return Err(GmmError::Empty);
    }
    let data = to_f64(features);
    let lb = bonafide.frame_log_likelihoods(&data);
    let ls = spoof.frame_log_likelihoods(&data);
    let (mut pos, mut neg): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for (a, b) in lb.iter().zip(&ls) {
        let r = a - b;
        if r >= 0.0 {
            pos.push(r);
        } else {
            neg.push(-r);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let sum = pos.iter().sum::<f64>() - neg.iter().sum::<f64>();
    Ok(sum / features.frames() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn matrix(rows: Vec<Vec<f64>>) -> FeatureMatrix<f64> {
        let d = rows[0].len();
        FeatureMatrix::new(rows.len(), d, rows.concat(), FeatureKind::Lfcc).unwrap()
    }

    fn gaussian_rows(n: usize, means: &[f64], sd: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sd).unwrap();
        (0..n).map(|_| means.iter().map(|m| m + noise.sample(&mut rng)).collect()).collect()
    }

    fn cfg(k: usize) -> TrainConfig {
        TrainConfig { k, em_iters: 10, kmeans_iters: 10, var_floor_factor: 1e-3, seed: 7 }
    }

    #[test]
    fn single_cluster_init_is_sample_moments() {
        let rows = gaussian_rows(200, &[1.0, -2.0], 0.5, 1);
        let m = kmeans_init(&matrix(rows.clone()), &cfg(1)).unwrap();
        let n = rows.len() as f64;
        for j in 0..2 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((m.means()[j] - mean).abs() < 1e-12);
            assert!((m.variances()[j] - var).abs() < 1e-12);
        }
        assert_eq!(m.weights(), &[1.0]);
    }

    #[test]
    fn duplicated_dataset_gives_identical_centroids() {
        let rows = gaussian_rows(150, &[0.0, 0.0, 0.0], 1.0, 2);
        let doubled: Vec<Vec<f64>> = rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
        let a = kmeans_init(&matrix(rows), &cfg(5)).unwrap();
        let b = kmeans_init(&matrix(doubled), &cfg(5)).unwrap();
        assert_eq!(a.means(), b.means());
    }

    #[test]
    fn one_component_per_point() {
        let rows = gaussian_rows(6, &[3.0, 4.0], 2.0, 3);
        let data = rows.concat();
        let floor = variance_floor(&data, 2, 1e-3);
        let m = kmeans_init(&matrix(rows.clone()), &cfg(6)).unwrap();
        let mut centroids: Vec<Vec<f64>> = m.means().chunks(2).map(<[f64]>::to_vec).collect();
        let mut expected = rows;
        centroids.sort_by(|a, b| a[0].total_cmp(&b[0]));
        expected.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(centroids, expected);
        for v in m.variances().chunks(2) {
            assert_eq!(v, floor.as_slice());
        }
    }

    #[test]
    fn too_few_frames_and_bad_input() {
        let rows = gaussian_rows(3, &[0.0], 1.0, 4);
        assert!(matches!(em_train(&matrix(rows), &cfg(4)), Err(GmmError::TooFewFrames { frames: 3, k: 4 })));
        let empty = FeatureMatrix::<f64>::new(0, 2, vec![], FeatureKind::Lfcc).unwrap();
        assert!(matches!(em_train(&empty, &cfg(1)), Err(GmmError::Empty)));
        assert!(em_train(&matrix(vec![vec![1.0]]), &TrainConfig { em_iters: 0, ..cfg(1) }).is_err());
    }

    #[test]
    fn single_gaussian_recovery() {
        let n = 10_000;
        let rows = gaussian_rows(n, &[2.5], 1.5, 5);
        let t = em_train(&matrix(rows), &cfg(1)).unwrap();
        assert!((t.model.means()[0] - 2.5).abs() < 3.0 * 1.5 / (n as f64).sqrt());
        assert!((t.model.variances()[0] / 2.25 - 1.0).abs() < 0.1);
    }

    #[test]
    fn separated_mixture_recovery() {
        let mut rows = gaussian_rows(500, &[-5.0], 1.0, 6);
        rows.extend(gaussian_rows(500, &[5.0], 1.0, 8));
        let t = em_train(&matrix(rows), &cfg(2)).unwrap();
        let mut comps: Vec<(f64, f64)> = t.model.means().iter().copied().zip(t.model.weights().iter().copied()).collect();
        comps.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((comps[0].0 + 5.0).abs() < 0.3 && (comps[1].0 - 5.0).abs() < 0.3, "{comps:?}");
        assert!((comps[0].1 - 0.5).abs() < 0.05 && (comps[1].1 - 0.5).abs() < 0.05, "{comps:?}");
    }

    #[test]
    fn em_is_monotone_and_valid() {
        for seed in 0..20 {
            let mut rows = gaussian_rows(150, &[0.0, 1.0, -1.0], 1.0, 100 + seed);
            rows.extend(gaussian_rows(100, &[3.0, -2.0, 0.5], 0.4, 200 + seed));
            let t = em_train(&matrix(rows), &TrainConfig { seed, ..cfg(4) }).unwrap();
            for w in t.log_likelihood_history.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {:?}", t.log_likelihood_history);
            }
            assert!((t.model.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(t.model.variances().iter().all(|&v| v >= MIN_VARIANCE));
        }
    }

    #[test]
    fn deterministic_training() {
        let rows = gaussian_rows(400, &[0.0, 0.0], 1.0, 9);
        let (a, b) = (em_train(&matrix(rows.clone()), &cfg(3)).unwrap(), em_train(&matrix(rows), &cfg(3)).unwrap());
        assert_eq!(a.model, b.model);
        assert_eq!(a.log_likelihood_history, b.log_likelihood_history);
    }

    #[test]
    fn peak_density_and_unimodality() {
        let m = GmmModel::new(vec![1.0], vec![1.0, 2.0], vec![0.5, 2.0], 2, FeatureKind::Lfcc).unwrap();
        let peak = m.log_likelihood(&[1.0, 2.0]).unwrap();
        let expected = -0.5 * ((std::f64::consts::TAU * 0.5).ln() + (std::f64::consts::TAU * 2.0).ln());
        assert!((peak - expected).abs() < 1e-12);
        let mut prev = peak;
        for step in 1..20 {
            let v = m.log_likelihood(&[1.0 + 0.3 * step as f64, 2.0]).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(matches!(m.log_likelihood(&[1.0]), Err(GmmError::DimensionMismatch { .. })));
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let m = GmmModel::new(
            vec![0.2, 0.5, 0.3],
            vec![0.0, 0.0, 1.0, -1.0, -2.0, 0.5],
            vec![1.0, 0.5, 2.0, 0.3, 0.7, 1.1],
            2,
            FeatureKind::Lfcc,
        )
        .unwrap();
        for x in [[0.1, 0.2], [1.0, -3.0], [-2.0, 2.0]] {
            let direct: f64 = (0..3)
                .map(|c| {
                    let mut p = m.weights()[c];
                    for j in 0..2 {
                        let (mu, v) = (m.means()[c * 2 + j], m.variances()[c * 2 + j]);
                        p *= (-(x[j] - mu).powi(2) / (2.0 * v)).exp() / (std::f64::consts::TAU * v).sqrt();
                    }
                    p
                })
                .sum();
            assert!((m.log_likelihood(&x).unwrap() - direct.ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn llr_properties() {
        let bona = em_train(&matrix(gaussian_rows(400, &[1.0, 1.0], 1.0, 10)), &cfg(2)).unwrap().model;
        let spoof = em_train(&matrix(gaussian_rows(400, &[-1.0, -1.0], 1.0, 11)), &cfg(2)).unwrap().model;
        let held_out = matrix(gaussian_rows(300, &[1.0, 1.0], 1.0, 12));
        assert_eq!(llr_score(&bona, &bona, &held_out).unwrap(), 0.0);
        let s = llr_score(&bona, &spoof, &held_out).unwrap();
        assert!(s > 0.0);
        assert_eq!(llr_score(&spoof, &bona, &held_out).unwrap(), -s);
        let mut reversed: Vec<Vec<f64>> = held_out.rows().map(<[f64]>::to_vec).collect();
        reversed.reverse();
        assert_eq!(llr_score(&bona, &spoof, &matrix(reversed)).unwrap(), s);
        let other = FeatureMatrix::new(1, 2, vec![0.0, 0.0], FeatureKind::Cqcc).unwrap();
        assert!(matches!(llr_score(&bona, &spoof, &other), Err(GmmError::KindMismatch { .. })));
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.lbgm");
        let data = matrix(gaussian_rows(300, &[0.5, -0.5, 2.0], 1.0, 13));
        let t = em_train(&data, &cfg(3)).unwrap();
        t.model.save(&path).unwrap();
        let loaded = GmmModel::load(&path).unwrap();
        assert_eq!(loaded, t.model);
        assert_eq!(
            llr_score(&loaded, &t.model, &data).unwrap().to_bits(),
            llr_score(&t.model, &t.model, &data).unwrap().to_bits()
        );
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        assert!(matches!(GmmModel::from_bytes(&bytes, &path), Err(GmmError::Format { .. })));
        let bytes = fs::read(&path).unwrap();
        assert!(GmmModel::from_bytes(&bytes[..bytes.len() - 3], &path).is_err());
    }
}
