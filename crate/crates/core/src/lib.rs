//! Local Lie-group distortions of magnitude spectrograms.
//!
//! Five normalized scalar fields (global time and frequency warps, two local
//! 2D warp components and an amplitude field) are scaled by per-mode
//! strengths and applied to a spectrogram through a first-order exponential
//! map. The crate generates smooth ground-truth fields, applies and
//! approximately inverts the warps, evaluates the field-prediction losses
//! and synthesizes (clean, distorted, fields) training triples.

pub mod audio;
pub mod buffer;
pub mod error;
pub mod fieldgen;
pub mod grid;
pub mod inverse;
pub mod losses;
pub mod schedule;
pub mod synth;
pub mod synthetic;
pub mod tensor_io;
pub mod transform;

pub use error::{Error, FormatError, Result};
pub use fieldgen::{control_points, gen_field_1d, gen_field_2d, gen_fieldset, interpolate_control_grid, BlobParams, ControlGrid};
pub use grid::{field_dimensionality, EpsilonDict, FieldSet, Grid, Spectrogram, SpectrogramMeta, TransformMode};
pub use inverse::{consistency_error, invert, roundtrip_error, Inversion, RoundTripError};
pub use losses::{total_loss, LossOptions, LossReport, LossWeights};
pub use schedule::{scale_eps_dict, Schedule, ScheduleKind};
pub use synth::{synthesize_corpus, synthesize_entries, synthesize_sample, CorpusSummary, SampleLimits, SynthConfig};
pub use transform::{apply_first_order, apply_flow, check_monotonic, displacement, energy_ratio, Displacement, MonotonicReport};
