//! Approximate inverse of the forward warp.
//!
//! Each of the `n_steps` sub-steps undoes one forward sub-step in reverse
//! order: divide by the gain `max(1 + amp, MIN_GAIN)`, then gather with the
//! negated displacement read at the destination cell. For amplitude-only
//! transforms this is exact. For warps the geometric residual is second
//! order in the displacement, but each bilinear gather also smooths: a
//! constant fractional shift `a` out and back leaves `a(1-a)` times the
//! discrete Laplacian of the input, which is first order in `a`. Content
//! that is not locally bilinear therefore shows a partly linear residual.

use crate::error::{Error, Result};
use crate::grid::{EpsilonDict, FieldSet, Grid, Spectrogram};
use crate::transform::{apply_flow, displacement, warp_gather};

/// Floor on the amplitude gain in the safe division.
pub const MIN_GAIN: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct Inversion {
    pub spectrogram: Spectrogram,
    /// Cells whose gain hit [`MIN_GAIN`].
    pub clamped_cells: usize,
}

pub fn invert(s: &Spectrogram, fields: &FieldSet, eps: &EpsilonDict, n_steps: usize) -> Result<Inversion> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be >= 1"));
    }
    fields.check_matches(s)?;
    eps.validate()?;
    let disp = displacement(fields, &eps.divided(n_steps))?;
    let gains: Vec<f64> = disp.amp.as_slice().iter().map(|&a| (1.0 + a as f64).max(MIN_GAIN)).collect();
    let clamped_cells = disp
        .amp
        .as_slice()
        .iter()
        .filter(|&&a| 1.0 + a as f64 <= MIN_GAIN)
        .count();

    let mut cur = s.grid().clone();
    for _ in 0..n_steps {
        for (v, g) in cur.as_mut_slice().iter_mut().zip(&gains) {
            *v = (*v as f64 / g) as f32;
        }
        cur = warp_gather(&cur, &disp, -1.0);
    }
    Ok(Inversion {
        spectrogram: Spectrogram::from_trusted(cur, s.meta().cloned()),
        clamped_cells,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoundTripError {
    pub rel_l2: f64,
    pub interior_rel_l2: f64,
}

/// Width of the border excluded from interior error measurements.
pub fn interior_margin(max_shift: f32) -> usize {
    (max_shift as f64).ceil() as usize + 1
}

fn rel_l2_region(a: &Grid, b: &Grid, margin: usize, what: &'static str) -> Result<f64> {
    let (rows, cols) = a.shape();
    if 2 * margin >= rows || 2 * margin >= cols {
        return Err(Error::invalid(
            "interior region",
            format!("margin {margin} leaves no cells in a {rows}x{cols} grid"),
        ));
    }
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for f in margin..rows - margin {
        for t in margin..cols - margin {
            let (x, y) = (a[(f, t)] as f64, b[(f, t)] as f64);
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm(what));
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of one-step `invert(distorted)` against `clean` over
/// the interior, or over the whole grid when the margin leaves no interior.
pub fn consistency_error(clean: &Spectrogram, distorted: &Spectrogram, fields: &FieldSet, eps: &EpsilonDict) -> Result<f64> {
    let back = invert(distorted, fields, eps, 1)?.spectrogram;
    let margin = interior_margin(displacement(fields, eps)?.max_shift());
    let (rows, cols) = clean.shape();
    let margin = if 2 * margin >= rows || 2 * margin >= cols { 0 } else { margin };
    rel_l2_region(back.grid(), clean.grid(), margin, "clean spectrogram")
}

/// Relative L2 error of `invert(apply_flow(S))` against `S`, over the full
/// grid and over the interior away from the clamped border.
pub fn roundtrip_error(s: &Spectrogram, fields: &FieldSet, eps: &EpsilonDict, n_steps: usize) -> Result<RoundTripError> {
    let forward = apply_flow(s, fields, eps, n_steps)?;
    let back = invert(&forward, fields, eps, n_steps)?.spectrogram;
    let margin = interior_margin(displacement(fields, eps)?.max_shift());
    Ok(RoundTripError {
        rel_l2: rel_l2_region(back.grid(), s.grid(), 0, "spectrogram")?,
        interior_rel_l2: rel_l2_region(back.grid(), s.grid(), margin, "spectrogram interior")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{gen_fieldset, BlobParams};
    use crate::grid::TransformMode;
    use crate::transform::apply_first_order;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(f: usize, t: usize, seed: u64) -> Spectrogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Spectrogram::new(Grid::from_fn(f, t, |_, _| 0.1 + rng.gen::<f32>())).unwrap()
    }

    // bilinear in (f, t), so the gathers reproduce it exactly and only the
    // geometric residual remains
    fn bilinear_spec(f: usize, t: usize) -> Spectrogram {
        Spectrogram::new(Grid::from_fn(f, t, |i, j| {
            let (x, y) = (i as f32 / f as f32, j as f32 / t as f32);
            0.5 + x + 0.5 * y + 2.0 * x * y
        }))
        .unwrap()
    }

    #[test]
    fn zero_fields_invert_to_input() {
        let s = random_spec(10, 30, 1);
        let inv = invert(&s, &FieldSet::zeros(10, 30), &EpsilonDict::uniform(0.9), 3).unwrap();
        assert_eq!(inv.spectrogram, s);
        assert_eq!(inv.clamped_cells, 0);
        let e = roundtrip_error(&s, &FieldSet::zeros(10, 30), &EpsilonDict::uniform(0.9), 1).unwrap();
        assert_eq!(e.rel_l2, 0.0);
        assert_eq!(e.interior_rel_l2, 0.0);
    }

    #[test]
    fn amplitude_only_is_exact() {
        for seed in 0..10 {
            let s = random_spec(20, 40, seed);
            let fs = gen_fieldset(20, 40, TransformMode::Amplitude, &BlobParams::default().with_seed(seed)).unwrap();
            let eps = EpsilonDict { amplitude: 0.5, ..EpsilonDict::ZERO };
            for steps in [1, 3] {
                let fwd = apply_flow(&s, &fs, &eps, steps).unwrap();
                let back = invert(&fwd, &fs, &eps, steps).unwrap();
                assert_eq!(back.clamped_cells, 0);
                let max = s.grid().max_abs();
                for (a, b) in back.spectrogram.grid().as_slice().iter().zip(s.grid().as_slice()) {
                    assert!((a - b).abs() < 1e-6 * max);
                }
                let e = roundtrip_error(&s, &fs, &eps, steps).unwrap();
                assert!(e.rel_l2 < 1e-6);
            }
        }
    }

    #[test]
    fn safe_division_clamps_and_counts() {
        let s = random_spec(4, 5, 2);
        let mut fs = FieldSet::zeros(4, 5);
        fs.phi_amp[(1, 1)] = -1.0;
        fs.phi_amp[(2, 3)] = -0.95;
        let eps = EpsilonDict { amplitude: 0.95, ..EpsilonDict::ZERO };
        let inv = invert(&s, &fs, &eps, 1).unwrap();
        assert_eq!(inv.clamped_cells, 2);
        assert!((inv.spectrogram.grid()[(1, 1)] as f64 - s.grid()[(1, 1)] as f64 / MIN_GAIN).abs() < 1e-5);
        assert!(inv.spectrogram.grid().as_slice().iter().all(|v| *v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn residual_is_second_order() {
        let s = bilinear_spec(80, 256);
        for seed in 0..5 {
            let p = BlobParams { mask_radius_frac: 0.2, ..BlobParams::default().with_seed(seed) };
            let fs = gen_fieldset(80, 256, TransformMode::Warp2D, &p).unwrap();
            let peak = fs.phi_ut.max_abs().max(fs.phi_uf.max_abs()) as f64;
            let e = |w: f64| {
                roundtrip_error(&s, &fs, &EpsilonDict { warp_2d: w / peak, ..EpsilonDict::ZERO }, 1)
                    .unwrap()
                    .interior_rel_l2
            };
            let (big, small) = (e(0.5), e(0.25));
            assert!(small <= 0.35 * big, "seed {seed}: e(0.25)={small} e(0.5)={big}");
        }
    }

    #[test]
    fn constant_shift_leaves_laplacian_term() {
        // out and back by a along t: S + a(1-a) (S[t+1] - 2S[t] + S[t-1])
        let s = random_spec(6, 40, 9);
        let mut fs = FieldSet::zeros(6, 40);
        fs.phi_time.iter_mut().for_each(|v| *v = 1.0);
        let a = 0.3;
        let eps = EpsilonDict { t_stretch: a, ..EpsilonDict::ZERO };
        let fwd = apply_first_order(&s, &fs, &eps).unwrap();
        let back = invert(&fwd, &fs, &eps, 1).unwrap().spectrogram;
        let g = s.grid();
        for f in 0..6 {
            for t in 2..38 {
                let lap = g[(f, t + 1)] as f64 - 2.0 * g[(f, t)] as f64 + g[(f, t - 1)] as f64;
                let want = g[(f, t)] as f64 + a * (1.0 - a) * lap;
                assert!((back.grid()[(f, t)] as f64 - want).abs() < 1e-5, "({f},{t})");
            }
        }
    }

    #[test]
    fn consistency_matches_roundtrip() {
        let s = random_spec(20, 40, 4);
        let fs = gen_fieldset(20, 40, TransformMode::Warp2D, &BlobParams::default().with_seed(4)).unwrap();
        let eps = EpsilonDict::default();
        let fwd = apply_first_order(&s, &fs, &eps).unwrap();
        let c = consistency_error(&s, &fwd, &fs, &eps).unwrap();
        assert_eq!(c, roundtrip_error(&s, &fs, &eps, 1).unwrap().interior_rel_l2);
        let tiny = Spectrogram::new(Grid::filled(2, 2, 1.0)).unwrap();
        assert_eq!(consistency_error(&tiny, &tiny, &FieldSet::zeros(2, 2), &EpsilonDict::ZERO).unwrap(), 0.0);
    }

    #[test]
    fn invert_is_never_negative() {
        let s = random_spec(16, 32, 3);
        let fs = gen_fieldset(16, 32, TransformMode::Warp2D, &BlobParams::default().with_seed(3)).unwrap();
        let fwd = apply_first_order(&s, &fs, &EpsilonDict::uniform(2.0)).unwrap();
        let back = invert(&fwd, &fs, &EpsilonDict::uniform(2.0), 2).unwrap();
        assert!(back.spectrogram.grid().as_slice().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn errors() {
        let s = random_spec(4, 5, 0);
        assert!(invert(&s, &FieldSet::zeros(5, 4), &EpsilonDict::ZERO, 1).is_err());
        assert!(invert(&s, &FieldSet::zeros(4, 5), &EpsilonDict::ZERO, 0).is_err());
        let z = Spectrogram::new(Grid::zeros(8, 8)).unwrap();
        assert!(matches!(
            roundtrip_error(&z, &FieldSet::zeros(8, 8), &EpsilonDict::ZERO, 1),
            Err(Error::ZeroNorm(_))
        ));
        // margin 1 swallows a 2x2 grid
        let tiny = Spectrogram::new(Grid::filled(2, 2, 1.0)).unwrap();
        assert!(roundtrip_error(&tiny, &FieldSet::zeros(2, 2), &EpsilonDict::ZERO, 1).is_err());
    }
}
