//! Smooth, localized generator fields: Gaussian-masked sinusoidal blobs in
//! 1D and 2D, and a sparse control-grid parameterization with Catmull-Rom
//! interpolation back to full resolution.
//!
//! Sampling uses `ChaCha8Rng` seeded from [`BlobParams::seed`]. Per blob the
//! draws happen in a fixed order: center, frequency, phase, amplitude (the
//! mask width is deterministic, `mask_radius_frac` times the axis length).
//! In 2D the center is drawn `f` then `t`, the frequency `t` then `f`
//! followed by the sign of the `f` component.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldSet, Grid, TransformMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobParams {
    /// Blobs per field, `0..=4`; zero yields an all-zero field.
    pub n_blobs: u32,
    /// Blob amplitude range within `[0, 1]`.
    pub amp_range: [f64; 2],
    /// Sinusoid frequency range in cycles per axis length.
    pub freq_range: [f64; 2],
    /// Gaussian mask width as a fraction of the axis length, in `(0, 1]`.
    pub mask_radius_frac: f64,
    pub seed: u64,
}

impl Default for BlobParams {
    fn default() -> Self {
        BlobParams {
            n_blobs: 3,
            amp_range: [0.3, 1.0],
            freq_range: [0.5, 3.0],
            mask_radius_frac: 0.1,
            seed: 0,
        }
    }
}

impl BlobParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blobs > 4 {
            return Err(Error::invalid("blob params", format!("n_blobs = {} exceeds 4", self.n_blobs)));
        }
        let [alo, ahi] = self.amp_range;
        if !(0.0..=1.0).contains(&alo) || !(0.0..=1.0).contains(&ahi) || alo > ahi {
            return Err(Error::invalid("blob params", format!("amp_range {:?} must satisfy 0 <= lo <= hi <= 1", self.amp_range)));
        }
        let [flo, fhi] = self.freq_range;
        if !(flo.is_finite() && fhi.is_finite() && 0.0 <= flo && flo <= fhi) {
            return Err(Error::invalid("blob params", format!("freq_range {:?} must satisfy 0 <= lo <= hi", self.freq_range)));
        }
        if !(self.mask_radius_frac > 0.0 && self.mask_radius_frac <= 1.0) {
            return Err(Error::invalid(
                "blob params",
                format!("mask_radius_frac {} must lie in (0, 1]", self.mask_radius_frac),
            ));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Divides by `max(1, max|v|)` so fields already inside the unit range keep
/// their amplitude.
fn normalize(values: &[f64]) -> Vec<f32> {
    let peak = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    values.iter().map(|v| ((v / peak) as f32).clamp(-1.0, 1.0)).collect()
}

/// One 1D blob: `amp * sin(2 pi freq x / L + phase) * exp(-(x - c)^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob1d {
    pub center: f64,
    pub sigma: f64,
    pub freq: f64,
    pub phase: f64,
    pub amp: f64,
}

impl Blob1d {
    pub fn eval(&self, x: f64, len: f64) -> f64 {
        let d = x - self.center;
        self.amp * (2.0 * PI * self.freq * x / len + self.phase).sin() * (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// One 2D blob: a plane wave under an axis-aligned Gaussian mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Blob2d {
    pub center: (f64, f64),
    pub sigma: (f64, f64),
    /// Cycles per axis length along `(f, t)`.
    pub freq: (f64, f64),
    pub phase: f64,
    pub amp: f64,
}

impl Blob2d {
    pub fn eval(&self, f: f64, t: f64, f_len: f64, t_len: f64) -> f64 {
        let (df, dt) = (f - self.center.0, t - self.center.1);
        let mask = (-(df * df) / (2.0 * self.sigma.0 * self.sigma.0) - (dt * dt) / (2.0 * self.sigma.1 * self.sigma.1)).exp();
        let wave = (2.0 * PI * (self.freq.1 * t / t_len + self.freq.0 * f / f_len) + self.phase).sin();
        self.amp * wave * mask
    }
}

fn sample_blobs_1d(rng: &mut ChaCha8Rng, len: usize, p: &BlobParams) -> Vec<Blob1d> {
    let l = len as f64;
    (0..p.n_blobs)
        .map(|_| {
            let center = rng.gen::<f64>() * l;
            let sigma = p.mask_radius_frac * l;
            let freq = uniform(rng, p.freq_range);
            let phase = rng.gen::<f64>() * 2.0 * PI;
            let amp = uniform(rng, p.amp_range);
            Blob1d { center, sigma, freq, phase, amp }
        })
        .collect()
}

fn sample_blobs_2d(rng: &mut ChaCha8Rng, f_bins: usize, t_frames: usize, p: &BlobParams) -> Vec<Blob2d> {
    let (fl, tl) = (f_bins as f64, t_frames as f64);
    (0..p.n_blobs)
        .map(|_| {
            let cf = rng.gen::<f64>() * fl;
            let ct = rng.gen::<f64>() * tl;
            let sigma = (p.mask_radius_frac * fl, p.mask_radius_frac * tl);
            let ft = uniform(rng, p.freq_range);
            let mut ff = uniform(rng, p.freq_range);
            if rng.gen::<bool>() {
                ff = -ff;
            }
            let phase = rng.gen::<f64>() * 2.0 * PI;
            let amp = uniform(rng, p.amp_range);
            Blob2d {
                center: (cf, ct),
                sigma,
                freq: (ff, ft),
                phase,
                amp,
            }
        })
        .collect()
}

fn render_1d(blobs: &[Blob1d], len: usize) -> Vec<f32> {
    let raw: Vec<f64> = (0..len)
        .map(|x| blobs.iter().map(|b| b.eval(x as f64, len as f64)).sum())
        .collect();
    normalize(&raw)
}

fn render_2d(blobs: &[Blob2d], f_bins: usize, t_frames: usize) -> Grid {
    let mut raw = Vec::with_capacity(f_bins * t_frames);
    for f in 0..f_bins {
        for t in 0..t_frames {
            raw.push(blobs.iter().map(|b| b.eval(f as f64, t as f64, f_bins as f64, t_frames as f64)).sum::<f64>());
        }
    }
    Grid::from_vec(f_bins, t_frames, normalize(&raw)).expect("sized above")
}

/// The blobs [`gen_field_1d`] would draw, for inspection and testing.
pub fn blobs_1d(len: usize, params: &BlobParams) -> Result<Vec<Blob1d>> {
    check_len("length", len)?;
    params.validate()?;
    Ok(sample_blobs_1d(&mut ChaCha8Rng::seed_from_u64(params.seed), len, params))
}

fn check_len(name: &'static str, len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::invalid(name, format!("must be >= 2, got {len}")));
    }
    Ok(())
}

/// Sum of masked sinusoidal blobs along one axis, normalized into `[-1, 1]`.
pub fn gen_field_1d(len: usize, params: &BlobParams) -> Result<Vec<f32>> {
    Ok(render_1d(&blobs_1d(len, params)?, len))
}

/// Sum of masked plane waves over an `F x T` grid, normalized into `[-1, 1]`.
pub fn gen_field_2d(f_bins: usize, t_frames: usize, params: &BlobParams) -> Result<Grid> {
    check_len("f_bins", f_bins)?;
    check_len("t_frames", t_frames)?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    Ok(render_2d(&sample_blobs_2d(&mut rng, f_bins, t_frames, params), f_bins, t_frames))
}

/// Field set where only the channels driven by `mode` are nonzero.
/// `Warp2D` draws `phi_ut` then `phi_uf` from one generator stream.
pub fn gen_fieldset(f_bins: usize, t_frames: usize, mode: TransformMode, params: &BlobParams) -> Result<FieldSet> {
    check_len("f_bins", f_bins)?;
    check_len("t_frames", t_frames)?;
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut fs = FieldSet::zeros(f_bins, t_frames);
    match mode {
        TransformMode::Identity => {}
        TransformMode::TStretch => fs.phi_time = render_1d(&sample_blobs_1d(&mut rng, t_frames, params), t_frames),
        TransformMode::FStretch => fs.phi_freq = render_1d(&sample_blobs_1d(&mut rng, f_bins, params), f_bins),
        TransformMode::Warp2D => {
            fs.phi_ut = render_2d(&sample_blobs_2d(&mut rng, f_bins, t_frames, params), f_bins, t_frames);
            fs.phi_uf = render_2d(&sample_blobs_2d(&mut rng, f_bins, t_frames, params), f_bins, t_frames);
        }
        TransformMode::Amplitude => {
            fs.phi_amp = render_2d(&sample_blobs_2d(&mut rng, f_bins, t_frames, params), f_bins, t_frames)
        }
    }
    Ok(fs)
}

/// Control lattice size for reduction factor `r`: `(ceil(F/r), ceil(T/r), count)`.
pub fn control_points(f_bins: usize, t_frames: usize, r: usize) -> (usize, usize, usize) {
    let r = r.max(1);
    let rows = f_bins.div_ceil(r);
    let cols = t_frames.div_ceil(r);
    (rows, cols, rows * cols)
}

/// One field channel on a sparse lattice; knot `(i, j)` sits at dense cell `(i r, j r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    pub reduction: usize,
    pub values: Grid,
}

impl ControlGrid {
    pub fn new(reduction: usize, values: Grid) -> Result<Self> {
        if reduction == 0 {
            return Err(Error::invalid("control grid", "reduction must be >= 1"));
        }
        Ok(ControlGrid { reduction, values })
    }

    /// Samples a dense field at the knot locations.
    pub fn sample(dense: &Grid, reduction: usize) -> Result<Self> {
        if reduction == 0 {
            return Err(Error::invalid("control grid", "reduction must be >= 1"));
        }
        let (rows, cols, _) = control_points(dense.rows(), dense.cols(), reduction);
        let values = Grid::from_fn(rows, cols, |i, j| dense[(i * reduction, j * reduction)]);
        Ok(ControlGrid { reduction, values })
    }
}

/// Catmull-Rom weights for the four knots around a fractional position `u`.
fn catmull_rom_weights(u: f64) -> [f64; 4] {
    let u2 = u * u;
    let u3 = u2 * u;
    [
        0.5 * (-u3 + 2.0 * u2 - u),
        0.5 * (3.0 * u3 - 5.0 * u2 + 2.0),
        0.5 * (-3.0 * u3 + 4.0 * u2 + u),
        0.5 * (u3 - u2),
    ]
}

/// Per dense index: base knot and the four weights.
fn axis_stencil(dense_len: usize, r: usize) -> Vec<(isize, [f64; 4])> {
    (0..dense_len)
        .map(|x| {
            let base = x / r;
            let u = (x % r) as f64 / r as f64;
            (base as isize, catmull_rom_weights(u))
        })
        .collect()
}

fn pad_linear(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let (lo, hi) = if n == 1 { (0.0, 0.0) } else { (v[1] - v[0], v[n - 1] - v[n - 2]) };
    let mut out = Vec::with_capacity(n + 3);
    out.push(v[0] - lo);
    out.extend_from_slice(v);
    out.push(v[n - 1] + hi);
    out.push(v[n - 1] + 2.0 * hi);
    out
}

fn pad_linear_2d(g: &Grid) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..g.rows())
        .map(|i| pad_linear(&g.row(i).iter().map(|v| *v as f64).collect::<Vec<_>>()))
        .collect();
    let width = rows[0].len();
    let cols: Vec<Vec<f64>> = (0..width)
        .map(|j| pad_linear(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    (0..cols[0].len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
}

/// Bicubic Catmull-Rom expansion of a control grid to `F x T`. Exact at the
/// knots; knots beyond the lattice edge continue the border slope; the
/// result is clamped to `[-1, 1]`.
pub fn interpolate_control_grid(grid: &ControlGrid, f_bins: usize, t_frames: usize) -> Result<Grid> {
    let r = grid.reduction;
    let (rows, cols, _) = control_points(f_bins, t_frames, r);
    if grid.values.shape() != (rows, cols) {
        return Err(Error::shape(
            "control grid",
            format!("{rows}x{cols} knots for {f_bins}x{t_frames} at r={r}"),
            format!("{}x{}", grid.values.rows(), grid.values.cols()),
        ));
    }
    let fs = axis_stencil(f_bins, r);
    let ts = axis_stencil(t_frames, r);
    // one ghost knot before and two after each axis, linearly extrapolated
    let padded = pad_linear_2d(&grid.values);
    let knot = |i: isize, j: isize| -> f64 { padded[(i + 1) as usize][(j + 1) as usize] };
    let mut out = Grid::zeros(f_bins, t_frames);
    for (f, (bi, wi)) in fs.iter().enumerate() {
        for (t, (bj, wj)) in ts.iter().enumerate() {
            let mut acc = 0.0;
            for (a, wa) in wi.iter().enumerate() {
                if *wa == 0.0 {
                    continue;
                }
                let mut row = 0.0;
                for (b, wb) in wj.iter().enumerate() {
                    if *wb != 0.0 {
                        row += wb * knot(bi + a as isize - 1, bj + b as isize - 1);
                    }
                }
                acc += wa * row;
            }
            out[(f, t)] = (acc as f32).clamp(-1.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> BlobParams {
        BlobParams::default().with_seed(seed)
    }

    #[test]
    fn zero_amplitude_gives_zero_field() {
        let p = BlobParams { amp_range: [0.0, 0.0], ..params(3) };
        assert!(gen_field_1d(64, &p).unwrap().iter().all(|&v| v == 0.0));
        assert!(gen_field_2d(8, 16, &p).unwrap().is_all_zero());
    }

    #[test]
    fn zero_blobs_gives_zero_field() {
        let p = BlobParams { n_blobs: 0, ..params(3) };
        assert!(gen_field_2d(8, 16, &p).unwrap().is_all_zero());
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = gen_field_1d(512, &params(42)).unwrap();
        let b = gen_field_1d(512, &params(42)).unwrap();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(gen_field_2d(80, 64, &params(7)).unwrap(), gen_field_2d(80, 64, &params(7)).unwrap());
        assert_ne!(gen_field_2d(80, 64, &params(7)).unwrap(), gen_field_2d(80, 64, &params(8)).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        assert!(gen_field_1d(1, &params(0)).is_err());
        assert!(gen_field_1d(0, &params(0)).is_err());
        assert!(gen_field_1d(10, &BlobParams { amp_range: [0.8, 0.2], ..params(0) }).is_err());
        assert!(gen_field_1d(10, &BlobParams { mask_radius_frac: 0.0, ..params(0) }).is_err());
        assert!(gen_field_1d(10, &BlobParams { n_blobs: 5, ..params(0) }).is_err());
        assert!(gen_field_2d(1, 10, &params(0)).is_err());
    }

    #[test]
    fn gaussian_tail_beyond_four_sigma() {
        // Oracle: outside 4 sigma the mask is below exp(-8), so the single
        // blob contributes at most amp * exp(-8).
        let bound = (-8.0f64).exp();
        assert!(bound < 3.36e-4);
        for seed in 0..50 {
            let p = BlobParams { n_blobs: 1, mask_radius_frac: 0.1, ..params(seed) };
            let field = gen_field_1d(512, &p).unwrap();
            let blob = blobs_1d(512, &p).unwrap()[0];
            for (x, v) in field.iter().enumerate() {
                if (x as f64 - blob.center).abs() > 4.0 * blob.sigma {
                    assert!((*v as f64).abs() <= blob.amp * bound + 1e-9, "seed {seed} x {x} v {v}");
                }
            }
        }
    }

    #[test]
    fn fields_stay_in_unit_range() {
        let strong = BlobParams { n_blobs: 4, amp_range: [1.0, 1.0], mask_radius_frac: 0.5, ..params(0) };
        for seed in 0..20 {
            let p = strong.clone().with_seed(seed);
            assert!(gen_field_1d(300, &p).unwrap().iter().all(|v| v.abs() <= 1.0 + 1e-6));
            assert!(gen_field_2d(40, 60, &p).unwrap().max_abs() <= 1.0 + 1e-6);
        }
    }

    #[test]
    fn fieldset_mode_isolation() {
        let p = params(5);
        assert!(gen_fieldset(16, 32, TransformMode::Identity, &p).unwrap().is_zero());
        let amp = gen_fieldset(16, 32, TransformMode::Amplitude, &p).unwrap();
        assert!(amp.phi_time.iter().all(|&v| v == 0.0));
        assert!(amp.phi_freq.iter().all(|&v| v == 0.0));
        assert!(amp.phi_ut.is_all_zero() && amp.phi_uf.is_all_zero());
        assert!(!amp.phi_amp.is_all_zero());
        assert_eq!(gen_fieldset(16, 32, TransformMode::Warp2D, &p).unwrap().nonzero_channels(), 2);
        let ts = gen_fieldset(16, 32, TransformMode::TStretch, &p).unwrap();
        assert_eq!(ts.nonzero_channels(), 1);
        assert!(ts.phi_time.iter().any(|&v| v != 0.0));
        let fs = gen_fieldset(16, 32, TransformMode::FStretch, &p).unwrap();
        assert_eq!(fs.nonzero_channels(), 1);
        assert!(fs.phi_freq.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn control_point_counts() {
        assert_eq!(control_points(80, 512, 2), (40, 256, 10240));
        assert_eq!(control_points(80, 512, 1), (80, 512, 40960));
        assert_eq!(control_points(5, 7, 3), (2, 3, 6));
    }

    #[test]
    fn catmull_rom_partition_of_unity() {
        for k in 0..=10 {
            let w = catmull_rom_weights(k as f64 / 10.0);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(catmull_rom_weights(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_grid_interpolates_to_constant() {
        let g = ControlGrid::new(3, Grid::filled(4, 6, 0.4)).unwrap();
        let dense = interpolate_control_grid(&g, 10, 17).unwrap();
        assert!(dense.as_slice().iter().all(|&v| (v - 0.4).abs() < 1e-6));
    }

    #[test]
    fn reduction_one_is_identity() {
        let field = gen_field_2d(12, 20, &params(11)).unwrap();
        let g = ControlGrid::sample(&field, 1).unwrap();
        assert_eq!(interpolate_control_grid(&g, 12, 20).unwrap(), field);
    }

    #[test]
    fn exact_at_knots() {
        let field = gen_field_2d(21, 33, &params(2)).unwrap();
        let g = ControlGrid::sample(&field, 4).unwrap();
        let dense = interpolate_control_grid(&g, 21, 33).unwrap();
        for i in 0..g.values.rows() {
            for j in 0..g.values.cols() {
                assert_eq!(dense[(i * 4, j * 4)], field[(i * 4, j * 4)]);
            }
        }
    }

    #[test]
    fn interpolation_dim_mismatch() {
        let g = ControlGrid::new(2, Grid::zeros(3, 3)).unwrap();
        assert!(interpolate_control_grid(&g, 8, 8).is_err());
        assert!(ControlGrid::new(0, Grid::zeros(1, 1)).is_err());
    }

    #[test]
    fn sparse_reconstruction_of_wide_blobs() {
        // oracle: the dense field the knots were sampled from
        let mut worst = 0.0f32;
        for seed in 0..20 {
            let p = BlobParams { mask_radius_frac: 0.25, ..params(seed) };
            let dense = gen_field_2d(80, 512, &p).unwrap();
            let g = ControlGrid::sample(&dense, 2).unwrap();
            let back = interpolate_control_grid(&g, 80, 512).unwrap();
            let dev = dense
                .as_slice()
                .iter()
                .zip(back.as_slice())
                .fold(0.0f32, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(dev);
        }
        assert!(worst < 0.05, "max deviation {worst}");
    }

    fn kinetic(g: &Grid) -> f64 {
        let (f, t) = g.shape();
        let mut acc = 0.0;
        for i in 0..f {
            for j in 0..t {
                if j + 1 < t {
                    acc += ((g[(i, j + 1)] - g[(i, j)]) as f64).powi(2);
                }
                if i + 1 < f {
                    acc += ((g[(i + 1, j)] - g[(i, j)]) as f64).powi(2);
                }
            }
        }
        acc / (f * t) as f64
    }

    #[test]
    fn smoother_than_white_noise() {
        let (f, t) = (80, 512);
        let (mut smooth, mut noise) = (0.0, 0.0);
        for seed in 0..20 {
            smooth += kinetic(&gen_field_2d(f, t, &params(seed)).unwrap());
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let white = Grid::from_fn(f, t, |_, _| rng.gen::<f32>() * 2.0 - 1.0);
            noise += kinetic(&white);
        }
        assert!(smooth * 10.0 < noise, "smooth {smooth} noise {noise}");
    }

    #[test]
    fn localized_at_narrow_masks() {
        // one blob's 5% footprint is about 18.8 sigma_f sigma_t, so at the
        // default three blobs the claim holds at 0.1 but not at 0.15
        for seed in 0..50 {
            let p = BlobParams { mask_radius_frac: 0.1, ..params(seed) };
            let field = gen_field_2d(80, 512, &p).unwrap();
            let peak = field.max_abs();
            let quiet = field.as_slice().iter().filter(|v| v.abs() < 0.05 * peak).count();
            assert!(quiet * 2 >= field.as_slice().len(), "seed {seed}: {quiet} quiet cells");
        }
    }
}
