//! Flat-buffer entry points for foreign callers.
//!
//! Every buffer is contiguous row-major f32 with explicit `(F, T)`. Lengths
//! are checked at the boundary and errors name the offending buffer. The
//! functions forward to the same code paths as the typed API.

use crate::error::{Error, Result};
use crate::fieldgen::{gen_fieldset, BlobParams};
use crate::grid::{EpsilonDict, FieldSet, Grid, Spectrogram, TransformMode};
use crate::inverse::invert;
use crate::losses::{total_loss, LossOptions, LossReport, LossWeights};
use crate::transform::apply_flow;

/// Field channels as flat buffers in canonical order: `phi_time` (T),
/// `phi_freq` (F), then `phi_ut`, `phi_uf`, `phi_amp` (F*T each).
pub type ChannelBuffers<'a> = [&'a [f32]; 5];

pub fn spectrogram_from_buffer(f_bins: usize, t_frames: usize, data: &[f32], what: &str) -> Result<Spectrogram> {
    if data.len() != f_bins * t_frames {
        return Err(Error::shape(
            what,
            format!("{} values for {f_bins}x{t_frames}", f_bins * t_frames),
            format!("{} values", data.len()),
        ));
    }
    Spectrogram::new(Grid::from_vec(f_bins, t_frames, data.to_vec())?)
}

/// Owned channel buffers of a generated field set, canonical order.
pub fn generate(f_bins: usize, t_frames: usize, mode: TransformMode, params: &BlobParams) -> Result<[Vec<f32>; 5]> {
    let fs = gen_fieldset(f_bins, t_frames, mode, params)?;
    Ok([
        fs.phi_time,
        fs.phi_freq,
        fs.phi_ut.into_vec(),
        fs.phi_uf.into_vec(),
        fs.phi_amp.into_vec(),
    ])
}

pub fn apply(
    f_bins: usize,
    t_frames: usize,
    spec: &[f32],
    fields: ChannelBuffers,
    eps: &EpsilonDict,
    n_steps: usize,
) -> Result<Vec<f32>> {
    let s = spectrogram_from_buffer(f_bins, t_frames, spec, "spectrogram")?;
    let fs = FieldSet::from_slices(f_bins, t_frames, fields)?;
    Ok(apply_flow(&s, &fs, eps, n_steps)?.into_grid().into_vec())
}

/// Inverted values and the number of gain-clamped cells.
pub fn invert_buffer(
    f_bins: usize,
    t_frames: usize,
    spec: &[f32],
    fields: ChannelBuffers,
    eps: &EpsilonDict,
    n_steps: usize,
) -> Result<(Vec<f32>, usize)> {
    let s = spectrogram_from_buffer(f_bins, t_frames, spec, "spectrogram")?;
    let fs = FieldSet::from_slices(f_bins, t_frames, fields)?;
    let inv = invert(&s, &fs, eps, n_steps)?;
    Ok((inv.spectrogram.into_grid().into_vec(), inv.clamped_cells))
}

#[allow(clippy::too_many_arguments)]
pub fn losses(
    f_bins: usize,
    t_frames: usize,
    spec_true: &[f32],
    pred: ChannelBuffers,
    truth: ChannelBuffers,
    eps: &EpsilonDict,
    weights: &LossWeights,
    opts: &LossOptions,
) -> Result<LossReport> {
    let s = spectrogram_from_buffer(f_bins, t_frames, spec_true, "true spectrogram")?;
    let p = FieldSet::from_slices(f_bins, t_frames, pred)?;
    let q = FieldSet::from_slices(f_bins, t_frames, truth)?;
    total_loss(&s, &p, &q, eps, weights, opts)
}
