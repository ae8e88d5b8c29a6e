//! Shared fixtures for the criterion benches in `benches/`.

use liewarp::synthetic::{speech_like_audio, speech_like_spectrogram};
use liewarp::{gen_fieldset, BlobParams, FieldSet, Spectrogram, TransformMode};

pub const F_BINS: usize = 80;
pub const T_FRAMES: usize = 512;

/// An 80x512 speech-like spectrogram and one field set per mode family.
pub struct Fixture {
    pub spec: Spectrogram,
    pub warp: FieldSet,
    pub amplitude: FieldSet,
    pub audio: Vec<f32>,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        let params = BlobParams::default().with_seed(seed);
        Fixture {
            spec: speech_like_spectrogram(T_FRAMES, seed).expect("fixture spectrogram"),
            warp: gen_fieldset(F_BINS, T_FRAMES, TransformMode::Warp2D, &params).expect("warp fields"),
            amplitude: gen_fieldset(F_BINS, T_FRAMES, TransformMode::Amplitude, &params).expect("amplitude fields"),
            audio: speech_like_audio(T_FRAMES * 160, 16_000, seed),
        }
    }
}
