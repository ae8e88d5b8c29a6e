//! Forward action of epsilon-scaled generator fields on a spectrogram.
//!
//! The first-order exponential map is realized as a gather: every output
//! cell `(f, t)` reads the input at `(f + df, t + dt)` with bilinear
//! weights, clamping coordinates to the grid (edge replication), and is then
//! multiplied by `1 + amp` indexed at the destination cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{EpsilonDict, FieldSet, Grid, Spectrogram};

/// Physical displacements (grid cells) and amplitude modulation per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Displacement {
    pub dt: Grid,
    pub df: Grid,
    pub amp: Grid,
}

impl Displacement {
    /// Largest absolute coordinate shift along either axis.
    pub fn max_shift(&self) -> f32 {
        self.dt.max_abs().max(self.df.max_abs())
    }
}

/// `dt = eps_t phi_time + eps_w phi_ut`, `df = eps_f phi_freq + eps_w phi_uf`,
/// `amp = eps_a phi_amp`, with the 1D fields broadcast across the other axis.
pub fn displacement(fields: &FieldSet, eps: &EpsilonDict) -> Result<Displacement> {
    fields.validate()?;
    let (f_bins, t_frames) = fields.shape();
    let mut dt = Grid::zeros(f_bins, t_frames);
    let mut df = Grid::zeros(f_bins, t_frames);
    let mut amp = Grid::zeros(f_bins, t_frames);
    for f in 0..f_bins {
        let gf = fields.phi_freq[f] as f64;
        for t in 0..t_frames {
            let gt = fields.phi_time[t] as f64;
            dt[(f, t)] = (eps.t_stretch * gt + eps.warp_2d * fields.phi_ut[(f, t)] as f64) as f32;
            df[(f, t)] = (eps.f_stretch * gf + eps.warp_2d * fields.phi_uf[(f, t)] as f64) as f32;
            amp[(f, t)] = (eps.amplitude * fields.phi_amp[(f, t)] as f64) as f32;
        }
    }
    Ok(Displacement { dt, df, amp })
}

/// Bilinear read of `g` at fractional `(f, t)`, coordinates clamped to the grid.
#[inline]
pub fn bilinear_sample(g: &Grid, f: f64, t: f64) -> f64 {
    let (rows, cols) = g.shape();
    let f = f.clamp(0.0, (rows - 1) as f64);
    let t = t.clamp(0.0, (cols - 1) as f64);
    let f0 = f.floor() as usize;
    let t0 = t.floor() as usize;
    let f1 = (f0 + 1).min(rows - 1);
    let t1 = (t0 + 1).min(cols - 1);
    let wf = f - f0 as f64;
    let wt = t - t0 as f64;
    let s00 = g[(f0, t0)] as f64;
    let s01 = g[(f0, t1)] as f64;
    let s10 = g[(f1, t0)] as f64;
    let s11 = g[(f1, t1)] as f64;
    (1.0 - wf) * ((1.0 - wt) * s00 + wt * s01) + wf * ((1.0 - wt) * s10 + wt * s11)
}

/// Gathers `src` at `(f + sign df, t + sign dt)`.
pub(crate) fn warp_gather(src: &Grid, disp: &Displacement, sign: f64) -> Grid {
    let (rows, cols) = src.shape();
    let mut out = Grid::zeros(rows, cols);
    for f in 0..rows {
        for t in 0..cols {
            let sf = f as f64 + sign * disp.df[(f, t)] as f64;
            let st = t as f64 + sign * disp.dt[(f, t)] as f64;
            out[(f, t)] = bilinear_sample(src, sf, st) as f32;
        }
    }
    out
}

fn check_shapes(s: &Spectrogram, fields: &FieldSet) -> Result<()> {
    fields.check_matches(s)
}

fn forward_step(src: &Grid, disp: &Displacement) -> Grid {
    let mut out = warp_gather(src, disp, 1.0);
    for (o, a) in out.as_mut_slice().iter_mut().zip(disp.amp.as_slice()) {
        let gain = (1.0 + *a as f64).max(0.0);
        *o = (*o as f64 * gain) as f32;
    }
    out
}

/// First-order exponential map `S(f, t) -> (1 + amp) S(f + df, t + dt)`.
///
/// A gain `1 + amp` below zero (only reachable when `eps.amplitude >= 1`) is
/// clamped to zero so the output stays a magnitude.
pub fn apply_first_order(s: &Spectrogram, fields: &FieldSet, eps: &EpsilonDict) -> Result<Spectrogram> {
    check_shapes(s, fields)?;
    eps.validate()?;
    let disp = displacement(fields, eps)?;
    Ok(Spectrogram::from_trusted(forward_step(s.grid(), &disp), s.meta().cloned()))
}

/// `n_steps` compositions of the first-order map, each with `eps / n_steps`.
pub fn apply_flow(s: &Spectrogram, fields: &FieldSet, eps: &EpsilonDict, n_steps: usize) -> Result<Spectrogram> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be >= 1"));
    }
    check_shapes(s, fields)?;
    eps.validate()?;
    let disp = displacement(fields, &eps.divided(n_steps))?;
    let mut cur = s.grid().clone();
    for _ in 0..n_steps {
        cur = forward_step(&cur, &disp);
    }
    Ok(Spectrogram::from_trusted(cur, s.meta().cloned()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Time,
    Freq,
}

/// A cell where the warped coordinate fails to advance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub axis: Axis,
    pub f: usize,
    pub t: usize,
    /// Forward difference of the warped coordinate, `<= 0` at a fold.
    pub step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicReport {
    pub folds: Vec<Fold>,
}

impl MonotonicReport {
    pub fn is_ok(&self) -> bool {
        self.folds.is_empty()
    }
}

/// Checks `t + dt` strictly increasing along every row and `f + df` along
/// every column. A fold at `(f, t)` on the time axis means frames `t` and
/// `t + 1` map out of order.
pub fn check_monotonic(fields: &FieldSet, eps: &EpsilonDict) -> Result<MonotonicReport> {
    let disp = displacement(fields, eps)?;
    Ok(monotonic_report(&disp))
}

pub fn monotonic_report(disp: &Displacement) -> MonotonicReport {
    let (rows, cols) = disp.dt.shape();
    let mut folds = Vec::new();
    for f in 0..rows {
        for t in 0..cols.saturating_sub(1) {
            let step = 1.0 + disp.dt[(f, t + 1)] as f64 - disp.dt[(f, t)] as f64;
            if step <= 0.0 {
                folds.push(Fold { axis: Axis::Time, f, t, step });
            }
        }
    }
    for t in 0..cols {
        for f in 0..rows.saturating_sub(1) {
            let step = 1.0 + disp.df[(f + 1, t)] as f64 - disp.df[(f, t)] as f64;
            if step <= 0.0 {
                folds.push(Fold { axis: Axis::Freq, f, t, step });
            }
        }
    }
    MonotonicReport { folds }
}

/// `sum(after^2) / sum(before^2)`; `+inf` when the input has no energy.
pub fn energy_ratio(before: &Spectrogram, after: &Spectrogram) -> Result<f64> {
    if before.shape() != after.shape() {
        let (a, b) = (before.shape(), after.shape());
        return Err(Error::shape("energy ratio", format!("{}x{}", a.0, a.1), format!("{}x{}", b.0, b.1)));
    }
    let e0 = before.grid().sum_sq();
    if e0 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(after.grid().sum_sq() / e0)
}
