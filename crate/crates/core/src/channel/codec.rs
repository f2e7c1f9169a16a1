use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_complex::Complex;
use rustfft::FftPlanner;

use super::ChannelError;
use crate::audio::{read_wav, write_wav, AudioBuffer, BitDepth};
use crate::dsp::hann_periodic;
use crate::scalar::{count, Real};

/// Bitrates of the recompression grid, in kbit/s.
pub const GRID_BITRATES_KBPS: [u32; 6] = [16, 64, 128, 192, 256, 320];
/// Environment variable holding the per-call transcoder timeout in seconds.
pub const TIMEOUT_ENV: &str = "LAUNDERBENCH_TRANSCODER_TIMEOUT_S";
pub const DEFAULT_TIMEOUT_S: u64 = 60;

pub const DEFAULT_ENCODE_TEMPLATE: &str =
    "ffmpeg -hide_banner -loglevel error -y -i {in} -codec:a libmp3lame -b:a {bitrate_kbps}k {out}";
pub const DEFAULT_DECODE_TEMPLATE: &str =
    "ffmpeg -hide_banner -loglevel error -y -i {in} -ar {rate_hz} -ac 1 -c:a pcm_s16le {out}";

/// External encode/decode command lines with `{in}`, `{out}`, `{bitrate_kbps}` placeholders.
///
/// The decode template may also use `{rate_hz}` to pin the decoded rate to the
/// rate of the original audio. Templates are split on whitespace before the
/// placeholders are substituted, so paths containing spaces stay one argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscoderTemplate {
    encode: String,
    decode: String,
}

fn occurrences(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

impl TranscoderTemplate {
    pub fn new(encode: impl Into<String>, decode: impl Into<String>) -> Result<Self, ChannelError> {
        let (encode, decode) = (encode.into(), decode.into());
        for ph in ["{in}", "{out}", "{bitrate_kbps}"] {
            if occurrences(&encode, ph) != 1 {
                return Err(ChannelError::Template(format!("encode template must contain {ph} exactly once")));
            }
        }
        for ph in ["{in}", "{out}"] {
            if occurrences(&decode, ph) != 1 {
                return Err(ChannelError::Template(format!("decode template must contain {ph} exactly once")));
            }
        }
        if occurrences(&decode, "{rate_hz}") > 1 {
            return Err(ChannelError::Template("decode template may contain {rate_hz} at most once".into()));
        }
        if encode.split_whitespace().next().is_none() || decode.split_whitespace().next().is_none() {
            return Err(ChannelError::Template("empty command".into()));
        }
        Ok(Self { encode, decode })
    }

    pub fn encode_template(&self) -> &str {
        &self.encode
    }

    pub fn decode_template(&self) -> &str {
        &self.decode
    }
}

impl Default for TranscoderTemplate {
    fn default() -> Self {
        Self::new(DEFAULT_ENCODE_TEMPLATE, DEFAULT_DECODE_TEMPLATE).expect("valid built-in templates")
    }
}

fn timeout() -> Duration {
    let secs = std::env::var(TIMEOUT_ENV).ok().and_then(|v| v.trim().parse::<u64>().ok()).unwrap_or(DEFAULT_TIMEOUT_S);
    Duration::from_secs(secs)
}

fn expand(template: &str, vars: &[(&str, String)]) -> Vec<String> {
    template
        .split_whitespace()
        .map(|tok| vars.iter().fold(tok.to_string(), |t, (k, v)| t.replace(k, v)))
        .collect()
}

fn run(argv: &[String], log_stem: &Path, limit: Duration) -> Result<(), ChannelError> {
    let program = argv[0].clone();
    let stdout_path = log_stem.with_extension("stdout");
    let stderr_path = log_stem.with_extension("stderr");
    let _logs = TempFiles(vec![stdout_path.clone(), stderr_path.clone()]);
    let io = |e: std::io::Error| ChannelError::Transcoder { command: program.clone(), detail: e.to_string() };
    let mut child = Command::new(&program)
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(File::create(&stdout_path).map_err(io)?)
        .stderr(File::create(&stderr_path).map_err(io)?)
        .spawn()
        .map_err(|e| ChannelError::Transcoder { command: program.clone(), detail: format!("cannot start: {e}") })?;

    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(io)? {
            break Some(status);
        }
        if started.elapsed() >= limit {
            let _ = child.kill();
            let _ = child.wait();
            break None;
        }
        std::thread::sleep(Duration::from_millis(5));
    };
    let diagnostics = fs::read_to_string(&stderr_path).unwrap_or_default();
    match status {
        None => Err(ChannelError::Transcoder {
            command: argv.join(" "),
            detail: format!("timed out after {} s; stderr: {}", limit.as_secs(), diagnostics.trim()),
        }),
        Some(s) if !s.success() => Err(ChannelError::Transcoder {
            command: argv.join(" "),
            detail: format!("exit status {s}; stderr: {}", diagnostics.trim()),
        }),
        Some(_) => Ok(()),
    }
}

/// Removes the listed files when dropped.
struct TempFiles(Vec<PathBuf>);

impl Drop for TempFiles {
    fn drop(&mut self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

/// Round-trips `audio` through an external lossy codec.
///
/// Temporary files live in `workdir` and carry `stream_id` in their names so that
/// concurrent calls never collide.
pub fn recompress<T: Real>(
    audio: &AudioBuffer<T>,
    bitrate_kbps: u32,
    tpl: &TranscoderTemplate,
    workdir: &Path,
    stream_id: u64,
) -> Result<AudioBuffer<T>, ChannelError> {
    if bitrate_kbps == 0 {
        return Err(ChannelError::InvalidBitrate(bitrate_kbps));
    }
    let stem = workdir.join(format!("lb_{stream_id:016x}_{bitrate_kbps}"));
    let wav_in = stem.with_extension("in.wav");
    let encoded = stem.with_extension("mp3");
    let wav_out = stem.with_extension("out.wav");
    let _cleanup = TempFiles(vec![wav_in.clone(), encoded.clone(), wav_out.clone()]);

    write_wav(audio, &wav_in, BitDepth::Pcm16)?;
    let limit = timeout();
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let enc = expand(
        tpl.encode_template(),
        &[("{in}", s(&wav_in)), ("{out}", s(&encoded)), ("{bitrate_kbps}", bitrate_kbps.to_string())],
    );
    run(&enc, &stem.with_extension("enc"), limit)?;
    let dec = expand(
        tpl.decode_template(),
        &[("{in}", s(&encoded)), ("{out}", s(&wav_out)), ("{rate_hz}", audio.sample_rate_hz().to_string())],
    );
    run(&dec, &stem.with_extension("dec"), limit)?;

    let decoded: AudioBuffer<T> = read_wav(&wav_out).map_err(|e| ChannelError::Transcoder {
        command: dec.join(" "),
        detail: format!("unreadable output: {e}"),
    })?;
    if decoded.sample_rate_hz() != audio.sample_rate_hz() {
        return Err(ChannelError::Transcoder {
            command: dec.join(" "),
            detail: format!("decoded rate {} Hz differs from input rate {} Hz", decoded.sample_rate_hz(), audio.sample_rate_hz()),
        });
    }
    Ok(decoded)
}

const PROXY_FFT: usize = 512;
const PROXY_HOP: usize = PROXY_FFT / 2;

/// Retained low-frequency fraction of the spectrum, `clamp(bitrate / 320, 0.15, 1)`.
pub fn proxy_band_fraction(bitrate_kbps: u32) -> f64 {
    (f64::from(bitrate_kbps) / 320.0).clamp(0.15, 1.0)
}

/// Magnitude quantization levels, `round(2^(4 + bitrate / 32))`.
pub fn proxy_levels(bitrate_kbps: u32) -> u64 {
    2f64.powf(4.0 + f64::from(bitrate_kbps) / 32.0).round() as u64
}

/// Deterministic codec stand-in for hermetic runs: STFT band truncation plus
/// per-frame magnitude quantization, resynthesized by overlap-add.
pub fn lossy_proxy<T: Real>(audio: &AudioBuffer<T>, bitrate_kbps: u32) -> Result<AudioBuffer<T>, ChannelError> {
    if !GRID_BITRATES_KBPS.contains(&bitrate_kbps) {
        return Err(ChannelError::InvalidBitrate(bitrate_kbps));
    }
    audio.ensure_non_empty()?;
    let n = audio.len();
    let keep = (proxy_band_fraction(bitrate_kbps) * (PROXY_FFT / 2) as f64).floor() as usize;
    let steps = count::<T>((proxy_levels(bitrate_kbps) - 1) as usize);

    // Pad by a full frame on both sides so every sample sees two overlapping windows.
    let mut padded = vec![T::zero(); n + 2 * PROXY_FFT];
    padded[PROXY_FFT..PROXY_FFT + n].copy_from_slice(audio.samples());
    let n_frames = (padded.len() - PROXY_FFT) / PROXY_HOP + 1;
    let mut out = vec![T::zero(); padded.len() + PROXY_FFT];

    let window = hann_periodic::<T>(PROXY_FFT);
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(PROXY_FFT);
    let inv = planner.plan_fft_inverse(PROXY_FFT);
    let scale = T::one() / count::<T>(PROXY_FFT);
    let mut buf = vec![Complex::<T>::default(); PROXY_FFT];
    for f in 0..n_frames {
        let start = f * PROXY_HOP;
        for (i, b) in buf.iter_mut().enumerate() {
            let v = padded.get(start + i).copied().unwrap_or_else(T::zero);
            *b = Complex::new(v * window[i], T::zero());
        }
        fwd.process(&mut buf);
        let peak = buf.iter().fold(T::zero(), |m, c| m.max(c.norm()));
        for (k, c) in buf.iter_mut().enumerate() {
            let bin = k.min(PROXY_FFT - k);
            if bin > keep {
                *c = Complex::default();
            } else if peak > T::zero() {
                let mag = c.norm();
                let q = (mag / peak * steps).round() / steps * peak;
                *c = if mag > T::zero() { *c * (q / mag) } else { Complex::default() };
            }
        }
        inv.process(&mut buf);
        for (i, c) in buf.iter().enumerate() {
            out[start + i] = out[start + i] + c.re * scale;
        }
    }
    Ok(AudioBuffer::from_parts(out[PROXY_FFT..PROXY_FFT + n].to_vec(), audio.sample_rate_hz()))
}
