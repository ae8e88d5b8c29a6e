//! Deterministic stand-ins for clean speech, used by the demos, benches and
//! tests when no recorded corpus is at hand.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{audio_to_mel, MelConfig};
use crate::error::Result;
use crate::grid::{Grid, Spectrogram};

/// Voiced, syllable-paced harmonic signal with gliding pitch and formants.
pub fn speech_like_audio(n_samples: usize, sample_rate_hz: u32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate_hz as f64;
    let f0_base = 100.0 + 80.0 * rng.gen::<f64>();
    let glide = 0.3 + 0.7 * rng.gen::<f64>();
    let syllable_hz = 3.0 + 2.0 * rng.gen::<f64>();
    let formants: Vec<(f64, f64)> = [(500.0, 300.0), (1500.0, 500.0), (2500.0, 600.0)]
        .iter()
        .map(|&(c, swing)| (c * (0.9 + 0.2 * rng.gen::<f64>()), swing))
        .collect();
    let bandwidth = 120.0;

    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(n_samples);
    for n in 0..n_samples {
        let time = n as f64 / sr;
        let f0 = f0_base * (1.0 + 0.15 * (2.0 * PI * glide * time).sin());
        phase += 2.0 * PI * f0 / sr;
        let syllable = (0.5 - 0.5 * (2.0 * PI * syllable_hz * time).cos()).powi(2);
        let mut sample = 0.0;
        let mut h = 1;
        while (h as f64) * f0 < sr / 2.0 - 200.0 {
            let hf = h as f64 * f0;
            let gain: f64 = formants
                .iter()
                .enumerate()
                .map(|(k, &(c, swing))| {
                    let center = c + swing * (2.0 * PI * (0.4 + 0.2 * k as f64) * time).sin();
                    (-(hf - center).powi(2) / (2.0 * bandwidth * bandwidth)).exp() / (k + 1) as f64
                })
                .sum();
            sample += gain * (h as f64 * phase).sin() / (h as f64).sqrt();
            h += 1;
        }
        let noise = 0.002 * (rng.gen::<f64>() - 0.5);
        out.push((0.3 * syllable * sample + noise) as f32);
    }
    out
}

/// Mel spectrogram of [`speech_like_audio`] with exactly `t_frames` frames.
pub fn speech_like_spectrogram(t_frames: usize, seed: u64) -> Result<Spectrogram> {
    let cfg = MelConfig::default();
    let audio = speech_like_audio(t_frames * cfg.hop, 16_000, seed);
    audio_to_mel(&audio, 16_000, &cfg)
}

/// Smooth positive surface made of a few broad Gaussian ridges; second
/// differences are tiny compared with first differences.
pub fn smooth_spectrogram(f_bins: usize, t_frames: usize, seed: u64) -> Result<Spectrogram> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bumps: Vec<[f64; 5]> = (0..4)
        .map(|_| {
            [
                rng.gen::<f64>(),
                rng.gen::<f64>(),
                0.15 + 0.15 * rng.gen::<f64>(),
                0.15 + 0.15 * rng.gen::<f64>(),
                0.5 + rng.gen::<f64>(),
            ]
        })
        .collect();
    Spectrogram::new(Grid::from_fn(f_bins, t_frames, |f, t| {
        let (x, y) = (f as f64 / f_bins as f64, t as f64 / t_frames as f64);
        let v: f64 = bumps
            .iter()
            .map(|[cx, cy, sx, sy, a]| a * (-((x - cx) / sx).powi(2) / 2.0 - ((y - cy) / sy).powi(2) / 2.0).exp())
            .sum();
        (0.1 + v) as f32
    }))
}
