//! Grid containers shared by every stage of the pipeline.
//!
//! All 2D data is stored row-major with frequency along rows and time along
//! columns, so `grid[(f, t)]` addresses bin `f` of frame `t`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total number of scalar generator values for an `F x T` grid:
/// one global time field, one global frequency field and three dense fields.
pub fn field_dimensionality(f_bins: usize, t_frames: usize) -> usize {
    t_frames + f_bins + 3 * f_bins * t_frames
}

/// Dense row-major `f32` matrix.
#[derive(Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Grid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Grid {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "grid buffer",
                format!("{} values ({rows}x{cols})", rows * cols),
                format!("{} values", data.len()),
            ));
        }
        Ok(Grid { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Grid { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max_abs(&self) -> f32 {
        self.data.iter().fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_all_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sum of squares accumulated in f64.
    pub fn sum_sq(&self) -> f64 {
        self.data.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

impl Index<(usize, usize)> for Grid {
    type Output = f32;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f32 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Grid {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f32 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

/// Optional analysis metadata carried alongside a spectrogram.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramMeta {
    pub sample_rate_hz: u32,
    pub hop_samples: usize,
    pub n_fft: usize,
    pub mel_bands: usize,
}

/// Non-negative linear-magnitude grid with `F >= 2` bins and `T >= 2` frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    data: Grid,
    meta: Option<SpectrogramMeta>,
}

impl Spectrogram {
    pub fn new(data: Grid) -> Result<Self> {
        let (f, t) = data.shape();
        if f < 2 || t < 2 {
            return Err(Error::shape("spectrogram", "F >= 2 and T >= 2", format!("{f}x{t}")));
        }
        if let Some(i) = data.as_slice().iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(
                "spectrogram",
                format!("value {} at flat index {i} is not a finite non-negative magnitude", data.as_slice()[i]),
            ));
        }
        Ok(Spectrogram { data, meta: None })
    }

    /// Builds a spectrogram from values already known to satisfy the
    /// invariants (outputs of the warping kernels).
    pub(crate) fn from_trusted(data: Grid, meta: Option<SpectrogramMeta>) -> Self {
        debug_assert!(data.as_slice().iter().all(|v| *v >= 0.0));
        Spectrogram { data, meta }
    }

    pub fn with_meta(mut self, meta: SpectrogramMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn meta(&self) -> Option<&SpectrogramMeta> {
        self.meta.as_ref()
    }

    #[inline]
    pub fn f_bins(&self) -> usize {
        self.data.rows()
    }

    #[inline]
    pub fn t_frames(&self) -> usize {
        self.data.cols()
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.data
    }

    pub fn into_grid(self) -> Grid {
        self.data
    }

    /// Multiplies every magnitude by `alpha >= 0`.
    pub fn scaled(&self, alpha: f32) -> Result<Self> {
        let mut s = Spectrogram::new(self.data.map(|v| v * alpha))?;
        s.meta = self.meta.clone();
        Ok(s)
    }
}

/// Tolerance for the `[-1, 1]` range check on normalized fields.
const RANGE_TOL: f32 = 1e-6;

/// The five normalized generator fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSet {
    /// Global time warp, one value per frame.
    pub phi_time: Vec<f32>,
    /// Global frequency warp, one value per bin.
    pub phi_freq: Vec<f32>,
    pub phi_ut: Grid,
    pub phi_uf: Grid,
    pub phi_amp: Grid,
}

/// Names of the five channels in their canonical order.
pub const CHANNEL_NAMES: [&str; 5] = ["phi_time", "phi_freq", "phi_ut", "phi_uf", "phi_amp"];

impl FieldSet {
    pub fn zeros(f_bins: usize, t_frames: usize) -> Self {
        FieldSet {
            phi_time: vec![0.0; t_frames],
            phi_freq: vec![0.0; f_bins],
            phi_ut: Grid::zeros(f_bins, t_frames),
            phi_uf: Grid::zeros(f_bins, t_frames),
            phi_amp: Grid::zeros(f_bins, t_frames),
        }
    }

    /// Validates shapes and the normalized range of every channel.
    pub fn new(phi_time: Vec<f32>, phi_freq: Vec<f32>, phi_ut: Grid, phi_uf: Grid, phi_amp: Grid) -> Result<Self> {
        let fs = FieldSet {
            phi_time,
            phi_freq,
            phi_ut,
            phi_uf,
            phi_amp,
        };
        fs.validate()?;
        Ok(fs)
    }

    /// Builds a field set from flat row-major buffers, naming the offending
    /// channel on any length mismatch.
    pub fn from_slices(f_bins: usize, t_frames: usize, channels: [&[f32]; 5]) -> Result<Self> {
        let expected = [t_frames, f_bins, f_bins * t_frames, f_bins * t_frames, f_bins * t_frames];
        for ((name, buf), want) in CHANNEL_NAMES.iter().zip(channels.iter()).zip(expected) {
            if buf.len() != want {
                return Err(Error::shape(*name, format!("{want} values"), format!("{} values", buf.len())));
            }
        }
        let grid = |b: &[f32]| Grid::from_vec(f_bins, t_frames, b.to_vec());
        FieldSet::new(
            channels[0].to_vec(),
            channels[1].to_vec(),
            grid(channels[2])?,
            grid(channels[3])?,
            grid(channels[4])?,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (f, t) = self.phi_ut.shape();
        if self.phi_time.len() != t {
            return Err(Error::shape("phi_time", format!("length {t}"), format!("length {}", self.phi_time.len())));
        }
        if self.phi_freq.len() != f {
            return Err(Error::shape("phi_freq", format!("length {f}"), format!("length {}", self.phi_freq.len())));
        }
        for (name, g) in [("phi_uf", &self.phi_uf), ("phi_amp", &self.phi_amp)] {
            if g.shape() != (f, t) {
                return Err(Error::shape(name, format!("{f}x{t}"), format!("{}x{}", g.rows(), g.cols())));
            }
        }
        for (name, values) in self.channels() {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && v.abs() <= 1.0 + RANGE_TOL)) {
                return Err(Error::invalid("field set", format!("{name} value {v} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// (F, T) of the associated spectrogram.
    pub fn shape(&self) -> (usize, usize) {
        (self.phi_freq.len(), self.phi_time.len())
    }

    pub fn check_matches(&self, spec: &Spectrogram) -> Result<()> {
        if self.shape() != spec.shape() {
            let (f, t) = spec.shape();
            let (ff, ft) = self.shape();
            return Err(Error::shape("field set vs spectrogram", format!("{f}x{t}"), format!("{ff}x{ft}")));
        }
        Ok(())
    }

    /// Channels in canonical order as flat slices.
    pub fn channels(&self) -> [(&'static str, &[f32]); 5] {
        [
            (CHANNEL_NAMES[0], &self.phi_time[..]),
            (CHANNEL_NAMES[1], &self.phi_freq[..]),
            (CHANNEL_NAMES[2], self.phi_ut.as_slice()),
            (CHANNEL_NAMES[3], self.phi_uf.as_slice()),
            (CHANNEL_NAMES[4], self.phi_amp.as_slice()),
        ]
    }

    /// Five-channel vector at cell `(f, t)`, with the 1D fields broadcast.
    #[inline]
    pub fn cell(&self, f: usize, t: usize) -> [f64; 5] {
        [
            self.phi_time[t] as f64,
            self.phi_freq[f] as f64,
            self.phi_ut[(f, t)] as f64,
            self.phi_uf[(f, t)] as f64,
            self.phi_amp[(f, t)] as f64,
        ]
    }

    /// Number of channels holding any nonzero value.
    pub fn nonzero_channels(&self) -> usize {
        self.channels().iter().filter(|(_, v)| v.iter().any(|&x| x != 0.0)).count()
    }

    pub fn is_zero(&self) -> bool {
        self.nonzero_channels() == 0
    }

    pub fn max_abs(&self) -> f32 {
        self.channels()
            .iter()
            .flat_map(|(_, v)| v.iter())
            .fold(0.0f32, |m, x| m.max(x.abs()))
    }

    /// Returns a copy with every channel multiplied by `s`, clamped back to `[-1, 1]`.
    pub fn scaled(&self, s: f32) -> FieldSet {
        let c = |v: f32| (v * s).clamp(-1.0, 1.0);
        FieldSet {
            phi_time: self.phi_time.iter().map(|&v| c(v)).collect(),
            phi_freq: self.phi_freq.iter().map(|&v| c(v)).collect(),
            phi_ut: self.phi_ut.map(c),
            phi_uf: self.phi_uf.map(c),
            phi_amp: self.phi_amp.map(c),
        }
    }
}

/// Per-mode flow strengths that turn normalized fields into displacements
/// (grid cells) and amplitude modulation (dimensionless).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDict {
    pub t_stretch: f64,
    pub f_stretch: f64,
    pub warp_2d: f64,
    pub amplitude: f64,
    /// Curriculum level at which these strengths were declared.
    #[serde(default = "default_reference")]
    pub reference: f64,
}

fn default_reference() -> f64 {
    1.0
}

impl Default for EpsilonDict {
    /// Equal per-mode strengths at reference level 1.
    fn default() -> Self {
        EpsilonDict::uniform(0.5)
    }
}

impl EpsilonDict {
    pub const ZERO: EpsilonDict = EpsilonDict {
        t_stretch: 0.0,
        f_stretch: 0.0,
        warp_2d: 0.0,
        amplitude: 0.0,
        reference: 1.0,
    };

    pub fn uniform(eps: f64) -> Self {
        EpsilonDict {
            t_stretch: eps,
            f_stretch: eps,
            warp_2d: eps,
            amplitude: eps,
            reference: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.entries() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("epsilon dict", format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if !(self.reference.is_finite() && self.reference > 0.0) {
            return Err(Error::invalid("epsilon dict", format!("reference = {} must be > 0", self.reference)));
        }
        Ok(())
    }

    pub fn entries(&self) -> [(&'static str, f64); 4] {
        [
            ("t_stretch", self.t_stretch),
            ("f_stretch", self.f_stretch),
            ("warp_2d", self.warp_2d),
            ("amplitude", self.amplitude),
        ]
    }

    /// `amplitude < 1` keeps `1 + eps_a * phi_amp` strictly positive for any normalized field.
    pub fn amplitude_is_safe(&self) -> bool {
        self.amplitude < 1.0
    }

    /// Every strength divided by `n` (one sub-step of an n-step flow).
    pub fn divided(&self, n: usize) -> EpsilonDict {
        let n = n as f64;
        EpsilonDict {
            t_stretch: self.t_stretch / n,
            f_stretch: self.f_stretch / n,
            warp_2d: self.warp_2d / n,
            amplitude: self.amplitude / n,
            reference: self.reference,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|(_, v)| *v == 0.0)
    }
}

/// Kind of synthetic distortion; exactly one is applied per sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformMode {
    TStretch,
    FStretch,
    #[serde(rename = "warp_2d")]
    Warp2D,
    Amplitude,
    Identity,
}

impl TransformMode {
    /// The four modes that actually distort.
    pub const ACTIVE: [TransformMode; 4] = [
        TransformMode::TStretch,
        TransformMode::FStretch,
        TransformMode::Warp2D,
        TransformMode::Amplitude,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TransformMode::TStretch => "t_stretch",
            TransformMode::FStretch => "f_stretch",
            TransformMode::Warp2D => "warp_2d",
            TransformMode::Amplitude => "amplitude",
            TransformMode::Identity => "identity",
        }
    }
}

impl fmt::Display for TransformMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TransformMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "t_stretch" | "tstretch" => Ok(TransformMode::TStretch),
            "f_stretch" | "fstretch" => Ok(TransformMode::FStretch),
            "warp_2d" | "warp2d" => Ok(TransformMode::Warp2D),
            "amplitude" | "amp" => Ok(TransformMode::Amplitude),
            "identity" | "none" => Ok(TransformMode::Identity),
            other => Err(Error::invalid(
                "mode",
                format!("unknown mode {other:?} (expected t_stretch, f_stretch, warp_2d, amplitude or identity)"),
            )),
        }
    }
}
