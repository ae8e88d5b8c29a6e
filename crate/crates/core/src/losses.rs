//! Loss terms for field prediction: spectrogram displacement, symmetry
//! breaking "hat" potential, cosine alignment, kinetic smoothness and L1
//! sparsity, combined with per-term weights.
//!
//! Every term is a mean over cells of the `F x T` grid rather than a raw sum,
//! so weights carry over between grid sizes. Per-cell vectors are the five
//! channels with `phi_time` broadcast along frequency and `phi_freq` along
//! time. Sums accumulate in f64 in a fixed row-major order.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{EpsilonDict, FieldSet, Spectrogram};
use crate::transform::apply_first_order;

/// Stabilizer added to norms in the cosine term.
pub const COSINE_SIGMA: f64 = 1e-8;

/// Default support threshold relative to the largest true per-cell norm.
pub const THETA_REL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_spec: f64,
    pub lambda_cosine: f64,
    pub lambda_kinetic: f64,
    pub lambda_ssb: f64,
    pub lambda_sparse: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_spec: 1.0,
            lambda_cosine: 1.0,
            lambda_kinetic: 1.0,
            lambda_ssb: 1.0,
            lambda_sparse: 1.0,
        }
    }
}

impl LossWeights {
    pub const ZERO: LossWeights = LossWeights {
        lambda_spec: 0.0,
        lambda_cosine: 0.0,
        lambda_kinetic: 0.0,
        lambda_ssb: 0.0,
        lambda_sparse: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_spec, self.lambda_cosine, self.lambda_kinetic, self.lambda_ssb, self.lambda_sparse];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(crate::Error::Invalid {
                name: "loss weights",
                reason: format!("every lambda must be finite and >= 0, got {all:?}"),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub spec: f64,
    pub ssb: f64,
    pub cosine: f64,
    pub kinetic: f64,
    pub sparse: f64,
    pub total: f64,
    pub theta_cell_count: usize,
}

impl LossReport {
    /// Weighted sum of the five components.
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.lambda_spec * self.spec
            + w.lambda_cosine * self.cosine
            + w.lambda_kinetic * self.kinetic
            + w.lambda_ssb * self.ssb
            + w.lambda_sparse * self.sparse
    }
}

/// Denominator convention for the cosine term.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineForm {
    /// `dot / ((|p| + s)(|q| + s))`, scale invariant.
    #[default]
    Standard,
    /// `dot / ((|p|^2 + s)(|q|^2 + s))`, the squared-norm variant.
    SquaredNorms,
}

/// Cells over which the cosine term is averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosineMask {
    #[default]
    Support,
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossOptions {
    /// Absolute support threshold; `None` uses `THETA_REL_TOL * max |phi_true|`.
    pub theta_tol: Option<f64>,
    pub cosine_form: CosineForm,
    pub cosine_mask: CosineMask,
}

fn norm(v: &[f64; 5]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Support mask of the true fields: cells where any channel exceeds `theta_tol`
/// in magnitude.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskRegion {
    pub f_bins: usize,
    pub t_frames: usize,
    pub mask: Vec<bool>,
}

impl MaskRegion {
    pub fn from_fields(fields_true: &FieldSet, theta_tol: f64) -> Self {
        let (f_bins, t_frames) = fields_true.shape();
        let mut mask = Vec::with_capacity(f_bins * t_frames);
        for f in 0..f_bins {
            for t in 0..t_frames {
                let c = fields_true.cell(f, t);
                mask.push(c.iter().any(|x| x.abs() > theta_tol));
            }
        }
        MaskRegion { f_bins, t_frames, mask }
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    #[inline]
    pub fn contains(&self, f: usize, t: usize) -> bool {
        self.mask[f * self.t_frames + t]
    }
}

/// `THETA_REL_TOL` times the largest per-cell norm of the true fields.
pub fn default_theta_tol(fields_true: &FieldSet) -> f64 {
    let (f_bins, t_frames) = fields_true.shape();
    let mut peak = 0.0f64;
    for f in 0..f_bins {
        for t in 0..t_frames {
            peak = peak.max(norm(&fields_true.cell(f, t)));
        }
    }
    THETA_REL_TOL * peak
}

fn check_pair(pred: &FieldSet, truth: &FieldSet) -> Result<()> {
    pred.validate()?;
    truth.validate()?;
    if pred.shape() != truth.shape() {
        let (a, b) = (truth.shape(), pred.shape());
        return Err(crate::Error::Shape {
            what: "predicted vs true fields".into(),
            expected: format!("{}x{}", a.0, a.1),
            got: format!("{}x{}", b.0, b.1),
        });
    }
    Ok(())
}

/// Mean squared change the predicted transform makes to the clean spectrogram.
pub fn loss_spec(s_true: &Spectrogram, fields_pred: &FieldSet, eps: &EpsilonDict) -> Result<f64> {
    let moved = apply_first_order(s_true, fields_pred, eps)?;
    let n = s_true.grid().as_slice().len() as f64;
    let sum: f64 = moved
        .grid()
        .as_slice()
        .iter()
        .zip(s_true.grid().as_slice())
        .map(|(a, b)| {
            let d = *a as f64 - *b as f64;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// Mean over Theta of the true per-cell norms; zero when Theta is empty.
pub fn characteristic_norm(fields_true: &FieldSet, mask: &MaskRegion) -> f64 {
    let (f_bins, t_frames) = fields_true.shape();
    let (mut acc, mut n) = (0.0f64, 0usize);
    for f in 0..f_bins {
        for t in 0..t_frames {
            if mask.contains(f, t) {
                acc += norm(&fields_true.cell(f, t));
                n += 1;
            }
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Hat potential: on Theta pull the predicted norm toward the mean true norm,
/// elsewhere toward zero.
pub fn loss_ssb(fields_pred: &FieldSet, fields_true: &FieldSet, theta_tol: f64) -> Result<f64> {
    check_pair(fields_pred, fields_true)?;
    let mask = MaskRegion::from_fields(fields_true, theta_tol);
    Ok(ssb_with_mask(fields_pred, fields_true, &mask))
}

fn ssb_with_mask(pred: &FieldSet, truth: &FieldSet, mask: &MaskRegion) -> f64 {
    let hat = characteristic_norm(truth, mask);
    let (f_bins, t_frames) = pred.shape();
    let mut acc = 0.0f64;
    for f in 0..f_bins {
        for t in 0..t_frames {
            let p = norm(&pred.cell(f, t));
            acc += if mask.contains(f, t) { (p - hat) * (p - hat) } else { p * p };
        }
    }
    acc / (f_bins * t_frames) as f64
}

/// Negated cosine alignment of predicted and true five-channel vectors.
pub fn loss_cosine(fields_pred: &FieldSet, fields_true: &FieldSet, theta_tol: f64) -> Result<f64> {
    loss_cosine_with(fields_pred, fields_true, theta_tol, CosineForm::Standard, CosineMask::Support)
}

pub fn loss_cosine_with(
    fields_pred: &FieldSet,
    fields_true: &FieldSet,
    theta_tol: f64,
    form: CosineForm,
    masking: CosineMask,
) -> Result<f64> {
    check_pair(fields_pred, fields_true)?;
    let mask = MaskRegion::from_fields(fields_true, theta_tol);
    Ok(cosine_with_mask(fields_pred, fields_true, &mask, form, masking))
}

fn cosine_with_mask(pred: &FieldSet, truth: &FieldSet, mask: &MaskRegion, form: CosineForm, masking: CosineMask) -> f64 {
    let (f_bins, t_frames) = pred.shape();
    let (mut acc, mut n) = (0.0f64, 0usize);
    for f in 0..f_bins {
        for t in 0..t_frames {
            if masking == CosineMask::Support && !mask.contains(f, t) {
                continue;
            }
            let (p, q) = (pred.cell(f, t), truth.cell(f, t));
            let dot: f64 = p.iter().zip(&q).map(|(a, b)| a * b).sum();
            let (np, nq) = (norm(&p), norm(&q));
            let denom = match form {
                CosineForm::Standard => (np + COSINE_SIGMA) * (nq + COSINE_SIGMA),
                CosineForm::SquaredNorms => (np * np + COSINE_SIGMA) * (nq * nq + COSINE_SIGMA),
            };
            acc -= dot / denom;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        acc / n as f64
    }
}

/// Mean over cells of the squared forward differences of all five
/// (broadcast) channels along both axes.
pub fn loss_kinetic(fields_pred: &FieldSet) -> Result<f64> {
    fields_pred.validate()?;
    let (f_bins, t_frames) = fields_pred.shape();
    let mut acc = 0.0f64;
    for f in 0..f_bins {
        for t in 0..t_frames {
            let here = fields_pred.cell(f, t);
            if t + 1 < t_frames {
                let next = fields_pred.cell(f, t + 1);
                acc += here.iter().zip(&next).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            }
            if f + 1 < f_bins {
                let next = fields_pred.cell(f + 1, t);
                acc += here.iter().zip(&next).map(|(a, b)| (b - a) * (b - a)).sum::<f64>();
            }
        }
    }
    Ok(acc / (f_bins * t_frames) as f64)
}

/// Mean absolute value over the broadcast `phi_time`, `phi_ut` and `phi_uf`
/// channels; frequency and amplitude fields are not penalized.
pub fn loss_sparse(fields_pred: &FieldSet) -> Result<f64> {
    fields_pred.validate()?;
    let (f_bins, t_frames) = fields_pred.shape();
    let mut acc = 0.0f64;
    for f in 0..f_bins {
        for t in 0..t_frames {
            let c = fields_pred.cell(f, t);
            acc += c[0].abs() + c[2].abs() + c[3].abs();
        }
    }
    Ok(acc / (3 * f_bins * t_frames) as f64)
}

pub fn total_loss(
    s_true: &Spectrogram,
    fields_pred: &FieldSet,
    fields_true: &FieldSet,
    eps: &EpsilonDict,
    weights: &LossWeights,
    opts: &LossOptions,
) -> Result<LossReport> {
    weights.validate()?;
    check_pair(fields_pred, fields_true)?;
    fields_true.check_matches(s_true)?;
    let theta_tol = opts.theta_tol.unwrap_or_else(|| default_theta_tol(fields_true));
    let mask = MaskRegion::from_fields(fields_true, theta_tol);
    let mut report = LossReport {
        spec: loss_spec(s_true, fields_pred, eps)?,
        ssb: ssb_with_mask(fields_pred, fields_true, &mask),
        cosine: cosine_with_mask(fields_pred, fields_true, &mask, opts.cosine_form, opts.cosine_mask),
        kinetic: loss_kinetic(fields_pred)?,
        sparse: loss_sparse(fields_pred)?,
        total: 0.0,
        theta_cell_count: mask.count(),
    };
    report.total = report.weighted_total(weights);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldgen::{gen_fieldset, BlobParams};
    use crate::grid::{Grid, TransformMode};

    fn mixed_fields(f: usize, t: usize, seed: u64) -> FieldSet {
        let p = BlobParams::default().with_seed(seed);
        let mut fs = gen_fieldset(f, t, TransformMode::Warp2D, &p).unwrap();
        fs.phi_amp = gen_fieldset(f, t, TransformMode::Amplitude, &p.clone().with_seed(seed + 100)).unwrap().phi_amp;
        fs.phi_time = gen_fieldset(f, t, TransformMode::TStretch, &p).unwrap().phi_time;
        fs
    }

    #[test]
    fn zero_prediction_spec_loss() {
        let s = Spectrogram::new(Grid::filled(4, 6, 1.0)).unwrap();
        assert_eq!(loss_spec(&s, &FieldSet::zeros(4, 6), &EpsilonDict::uniform(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn amplitude_spec_loss_closed_form() {
        let c = 2.0f32;
        let s = Spectrogram::new(Grid::filled(4, 6, c)).unwrap();
        let mut fs = FieldSet::zeros(4, 6);
        fs.phi_amp = Grid::filled(4, 6, 1.0);
        let eps = EpsilonDict { amplitude: 0.25, ..EpsilonDict::ZERO };
        let l = loss_spec(&s, &fs, &eps).unwrap();
        assert!((l - (0.25f64 * 2.0).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn collapse_penalty() {
        let truth = mixed_fields(8, 13, 1);
        let tol = default_theta_tol(&truth);
        let mask = MaskRegion::from_fields(&truth, tol);
        assert!(mask.count() > 0);
        let hat = characteristic_norm(&truth, &mask);
        let l = loss_ssb(&FieldSet::zeros(8, 13), &truth, tol).unwrap();
        let expected = mask.count() as f64 * hat * hat / (8.0 * 13.0);
        assert!((l - expected).abs() <= 1e-12 * expected);
        assert!(l > 0.0);
    }

    #[test]
    fn ssb_global_minimum() {
        // truth: one channel at 0.5 on a block; prediction matches the norm there
        let mut truth = FieldSet::zeros(6, 9);
        let mut pred = FieldSet::zeros(6, 9);
        for f in 1..4 {
            for t in 2..7 {
                truth.phi_amp[(f, t)] = 0.5;
                pred.phi_ut[(f, t)] = 0.3;
                pred.phi_uf[(f, t)] = 0.4;
            }
        }
        assert!(loss_ssb(&pred, &truth, 1e-9).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ssb_with_empty_support() {
        let truth = FieldSet::zeros(4, 5);
        let mut pred = FieldSet::zeros(4, 5);
        pred.phi_amp = Grid::filled(4, 5, 0.5);
        assert!((loss_ssb(&pred, &truth, default_theta_tol(&truth)).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cosine_alignment_extremes() {
        let truth = mixed_fields(8, 13, 2);
        let tol = default_theta_tol(&truth);
        let same = loss_cosine(&truth, &truth, tol).unwrap();
        assert!((same + 1.0).abs() < 1e-6, "{same}");
        let neg = truth.scaled(-1.0);
        let opposite = loss_cosine(&neg, &truth, tol).unwrap();
        assert!((opposite - 1.0).abs() < 1e-6, "{opposite}");
        let half = truth.scaled(0.5);
        let scaled = loss_cosine(&half, &truth, tol).unwrap();
        assert!((scaled - same).abs() < 1e-5);
        assert_eq!(loss_cosine(&truth, &FieldSet::zeros(8, 13), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn squared_norm_cosine_is_not_scale_invariant() {
        let truth = mixed_fields(8, 13, 3);
        let tol = default_theta_tol(&truth);
        let f = |p: &FieldSet| loss_cosine_with(p, &truth, tol, CosineForm::SquaredNorms, CosineMask::Support).unwrap();
        assert!((f(&truth) - f(&truth.scaled(0.5))).abs() > 1e-3);
        let full = loss_cosine_with(&truth, &truth, tol, CosineForm::Standard, CosineMask::Full).unwrap();
        assert!(full >= -1.0 - 1e-9 && full <= 0.0);
    }

    #[test]
    fn kinetic_constant_and_ramp() {
        let mut fs = FieldSet::zeros(5, 9);
        fs.phi_amp = Grid::filled(5, 9, 0.4);
        fs.phi_time = vec![-0.2; 9];
        assert_eq!(loss_kinetic(&fs).unwrap(), 0.0);

        let (f, t) = (5usize, 9usize);
        let mut ramp = FieldSet::zeros(f, t);
        ramp.phi_amp = Grid::from_fn(f, t, |_, j| j as f32 / (t - 1) as f32);
        let step = 1.0 / (t - 1) as f64;
        let expected = (f * (t - 1)) as f64 * step * step / (f * t) as f64;
        assert!((loss_kinetic(&ramp).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn sparse_channel_selection() {
        assert_eq!(loss_sparse(&FieldSet::zeros(3, 4)).unwrap(), 0.0);
        let mut amp = FieldSet::zeros(3, 4);
        amp.phi_amp = Grid::filled(3, 4, 1.0);
        amp.phi_freq = vec![1.0; 3];
        assert_eq!(loss_sparse(&amp).unwrap(), 0.0);
        let mut ut = FieldSet::zeros(3, 4);
        ut.phi_ut = Grid::filled(3, 4, 0.5);
        assert!((loss_sparse(&ut).unwrap() - 0.5 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn total_report() {
        let s = Spectrogram::new(Grid::filled(8, 13, 1.0)).unwrap();
        let zero = FieldSet::zeros(8, 13);
        let r = total_loss(&s, &zero, &zero, &EpsilonDict::default(), &LossWeights::default(), &LossOptions::default()).unwrap();
        assert_eq!((r.spec, r.ssb, r.cosine, r.kinetic, r.sparse, r.total), (0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.theta_cell_count, 0);

        let pred = mixed_fields(8, 13, 4);
        let truth = mixed_fields(8, 13, 5);
        let r = total_loss(&s, &pred, &truth, &EpsilonDict::default(), &LossWeights::ZERO, &LossOptions::default()).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(r.spec > 0.0 && r.kinetic > 0.0);

        let w = LossWeights { lambda_spec: 2.0, lambda_cosine: 0.5, lambda_kinetic: 3.0, lambda_ssb: 1.5, lambda_sparse: 0.1 };
        let r = total_loss(&s, &pred, &truth, &EpsilonDict::default(), &w, &LossOptions::default()).unwrap();
        let again = 2.0 * r.spec + 0.5 * r.cosine + 3.0 * r.kinetic + 1.5 * r.ssb + 0.1 * r.sparse;
        assert!((r.total - again).abs() <= 1e-12 * again.abs().max(1.0));
        let bad = LossWeights { lambda_ssb: f64::NAN, ..w };
        assert!(total_loss(&s, &pred, &truth, &EpsilonDict::default(), &bad, &LossOptions::default()).is_err());
        assert!(total_loss(&s, &pred, &FieldSet::zeros(8, 12), &EpsilonDict::default(), &w, &LossOptions::default()).is_err());
    }
}
