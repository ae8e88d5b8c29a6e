//! PCM audio to linear-magnitude mel spectrogram.
//!
//! Frames are left-aligned at multiples of the hop and zero padded past the
//! end of the signal, so `T = ceil(len / hop)` and trailing hop-aligned
//! silence only appends all-zero frames.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Spectrogram, SpectrogramMeta};

/// STFT and mel filterbank settings. Defaults: 16 kHz, 400-point Hann
/// window, hop 160, 80 HTK mel bands over 0-8 kHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub n_fft: usize,
    pub hop: usize,
    pub mel_bands: usize,
    pub fmin: f64,
    pub fmax: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_fft: 400,
            hop: 160,
            mel_bands: 80,
            fmin: 0.0,
            fmax: 8000.0,
        }
    }
}

impl MelConfig {
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if self.n_fft < 2 || self.hop == 0 {
            return Err(Error::invalid("mel config", "n_fft must be >= 2 and hop >= 1"));
        }
        if self.mel_bands < 2 {
            return Err(Error::invalid("mel config", "mel_bands must be >= 2"));
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return Err(Error::invalid("mel config", format!("need 0 <= fmin < fmax, got {}..{}", self.fmin, self.fmax)));
        }
        if self.fmax > nyquist {
            return Err(Error::invalid(
                "mel config",
                format!("fmax {} exceeds Nyquist {nyquist} for {sample_rate_hz} Hz", self.fmax),
            ));
        }
        Ok(())
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

/// Triangular HTK-mel filters over the `n_fft / 2 + 1` FFT bins, stored
/// sparsely as `(first_bin, weights)`.
#[derive(Clone, Debug)]
pub struct MelFilterbank {
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(sample_rate_hz: u32, cfg: &MelConfig) -> Self {
        let n_bins = cfg.n_fft / 2 + 1;
        let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
        let edges: Vec<f64> = (0..cfg.mel_bands + 2)
            .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.mel_bands + 1) as f64))
            .collect();
        let bin_hz = sample_rate_hz as f64 / cfg.n_fft as f64;
        let filters = edges
            .windows(3)
            .map(|w| {
                let (left, center, right) = (w[0], w[1], w[2]);
                let weights: Vec<(usize, f64)> = (0..n_bins)
                    .filter_map(|k| {
                        let hz = k as f64 * bin_hz;
                        let up = (hz - left) / (center - left);
                        let down = (right - hz) / (right - center);
                        let v = up.min(down);
                        (v > 0.0).then_some((k, v))
                    })
                    .collect();
                match weights.first() {
                    Some(&(start, _)) => (start, weights.iter().map(|&(_, v)| v).collect()),
                    None => (0, Vec::new()),
                }
            })
            .collect();
        MelFilterbank { filters }
    }

    pub fn bands(&self) -> usize {
        self.filters.len()
    }

    /// Applies the filterbank to one magnitude frame.
    pub fn apply(&self, magnitude: &[f64], out: &mut [f32]) {
        for ((start, w), o) in self.filters.iter().zip(out.iter_mut()) {
            let acc: f64 = w.iter().zip(&magnitude[*start..]).map(|(a, b)| a * b).sum();
            *o = acc as f32;
        }
    }
}

/// Linear-magnitude mel spectrogram of mono PCM samples in `[-1, 1]`.
pub fn audio_to_mel(samples: &[f32], sample_rate_hz: u32, cfg: &MelConfig) -> Result<Spectrogram> {
    if samples.is_empty() {
        return Err(Error::invalid("audio", "no samples"));
    }
    cfg.validate(sample_rate_hz)?;
    let frames = samples.len().div_ceil(cfg.hop).max(2);
    let window = hann(cfg.n_fft);
    let bank = MelFilterbank::new(sample_rate_hz, cfg);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let n_bins = cfg.n_fft / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); cfg.n_fft];
    let mut mag = vec![0.0f64; n_bins];
    let mut column = vec![0.0f32; cfg.mel_bands];
    let mut out = Grid::zeros(cfg.mel_bands, frames);
    for t in 0..frames {
        let start = t * cfg.hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = samples.get(start + i).copied().unwrap_or(0.0) as f64;
            *slot = Complex::new(x * window[i], 0.0);
        }
        fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        bank.apply(&mag, &mut column);
        for (f, &v) in column.iter().enumerate() {
            out[(f, t)] = v.max(0.0);
        }
    }
    Ok(Spectrogram::new(out)?.with_meta(SpectrogramMeta {
        sample_rate_hz,
        hop_samples: cfg.hop,
        n_fft: cfg.n_fft,
        mel_bands: cfg.mel_bands,
    }))
}

/// Reads a 16-bit PCM mono WAV file as samples scaled to `[-1, 1)`.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f32>, u32)> {
    let path = path.as_ref();
    let wav_err = |reason: String| Error::Wav {
        path: path.to_path_buf(),
        reason,
    };
    let reader = hound::WavReader::open(path).map_err(|e| wav_err(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(wav_err(format!(
            "expected 16-bit PCM mono, found {} channel(s) of {}-bit {:?}",
            spec.channels, spec.bits_per_sample, spec.sample_format
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_err(e.to_string()))?;
    Ok((samples, spec.sample_rate))
}

pub fn write_wav(path: impl AsRef<Path>, samples: &[f32], sample_rate_hz: u32) -> Result<()> {
    let path = path.as_ref();
    let wav_err = |e: hound::Error| Error::Wav {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in samples {
        w.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}
