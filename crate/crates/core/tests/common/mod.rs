//! Brute-force reference implementations shared by the integration tests
//! and the acceptance suite. Written from the definitions, not from the
//! library code: nested loops over plain `Vec<Vec<f64>>`.
#![allow(dead_code)]

use liewarp::{EpsilonDict, FieldSet, Grid, Spectrogram};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(g: &Grid) -> Mat {
    (0..g.rows()).map(|r| g.row(r).iter().map(|v| *v as f64).collect()).collect()
}

/// The five channel values at cell (f, t), 1D fields broadcast.
pub fn cell(fs: &FieldSet, f: usize, t: usize) -> [f64; 5] {
    [
        fs.phi_time[t] as f64,
        fs.phi_freq[f] as f64,
        fs.phi_ut[(f, t)] as f64,
        fs.phi_uf[(f, t)] as f64,
        fs.phi_amp[(f, t)] as f64,
    ]
}

fn bilinear(s: &Mat, y: f64, x: f64) -> f64 {
    let (rows, cols) = (s.len(), s[0].len());
    let y = y.max(0.0).min((rows - 1) as f64);
    let x = x.max(0.0).min((cols - 1) as f64);
    let (y0, x0) = (y.floor() as usize, x.floor() as usize);
    let (y1, x1) = ((y0 + 1).min(rows - 1), (x0 + 1).min(cols - 1));
    let (a, b) = (y - y0 as f64, x - x0 as f64);
    s[y0][x0] * (1.0 - a) * (1.0 - b) + s[y0][x1] * (1.0 - a) * b + s[y1][x0] * a * (1.0 - b) + s[y1][x1] * a * b
}

/// One first-order step: gather at (f + df, t + dt), then scale by
/// max(0, 1 + amp). Displacements and outputs are rounded to f32 because
/// that is the storage type.
pub fn forward(s: &Mat, fs: &FieldSet, eps: &EpsilonDict) -> Mat {
    let (rows, cols) = (s.len(), s[0].len());
    let mut out = vec![vec![0.0; cols]; rows];
    for f in 0..rows {
        for t in 0..cols {
            let c = cell(fs, f, t);
            let dt = (eps.t_stretch * c[0] + eps.warp_2d * c[2]) as f32 as f64;
            let df = (eps.f_stretch * c[1] + eps.warp_2d * c[3]) as f32 as f64;
            let amp = (eps.amplitude * c[4]) as f32 as f64;
            let v = bilinear(s, f as f64 + df, t as f64 + dt) as f32 as f64;
            out[f][t] = (v * (1.0 + amp).max(0.0)) as f32 as f64;
        }
    }
    out
}

/// The five loss terms [spec, ssb, cosine, kinetic, sparse], each a mean
/// over the grid (cosine: over the support of the true fields).
pub fn losses(s_true: &Spectrogram, pred: &FieldSet, truth: &FieldSet, eps: &EpsilonDict) -> [f64; 5] {
    let (rows, cols) = s_true.shape();
    let n = (rows * cols) as f64;
    let s = to_mat(s_true.grid());
    let moved = forward(&s, pred, eps);
    let norm = |v: &[f64; 5]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut spec = 0.0;
    for f in 0..rows {
        for t in 0..cols {
            spec += (moved[f][t] - s[f][t]).powi(2);
        }
    }
    spec /= n;

    let mut peak = 0.0f64;
    for f in 0..rows {
        for t in 0..cols {
            peak = peak.max(norm(&cell(truth, f, t)));
        }
    }
    let tol = 1e-6 * peak;
    let in_theta = |f: usize, t: usize| cell(truth, f, t).iter().any(|x| x.abs() > tol);

    let (mut hat, mut count) = (0.0, 0usize);
    for f in 0..rows {
        for t in 0..cols {
            if in_theta(f, t) {
                hat += norm(&cell(truth, f, t));
                count += 1;
            }
        }
    }
    if count > 0 {
        hat /= count as f64;
    }

    let (mut ssb, mut cosine) = (0.0, 0.0);
    for f in 0..rows {
        for t in 0..cols {
            let p = cell(pred, f, t);
            let np = norm(&p);
            if in_theta(f, t) {
                ssb += (np - hat).powi(2);
                let q = cell(truth, f, t);
                let dot: f64 = (0..5).map(|k| p[k] * q[k]).sum();
                cosine -= dot / ((np + 1e-8) * (norm(&q) + 1e-8));
            } else {
                ssb += np * np;
            }
        }
    }
    ssb /= n;
    if count > 0 {
        cosine /= count as f64;
    }

    let mut kinetic = 0.0;
    for f in 0..rows {
        for t in 0..cols {
            let c = cell(pred, f, t);
            for k in 0..5 {
                if t + 1 < cols {
                    kinetic += (cell(pred, f, t + 1)[k] - c[k]).powi(2);
                }
                if f + 1 < rows {
                    kinetic += (cell(pred, f + 1, t)[k] - c[k]).powi(2);
                }
            }
        }
    }
    kinetic /= n;

    let mut sparse = 0.0;
    for f in 0..rows {
        for t in 0..cols {
            let c = cell(pred, f, t);
            sparse += c[0].abs() + c[2].abs() + c[3].abs();
        }
    }
    sparse /= 3.0 * n;

    [spec, ssb, cosine, kinetic, sparse]
}

/// Random loss instance: positive spectrogram, uniform fields, strengths in
/// [0, 1]. Odd seeds zero the 1D true channels and part of the 2D ones so
/// the support is a proper subset of the grid.
pub fn random_instance(rows: usize, cols: usize, seed: u64) -> (Spectrogram, FieldSet, FieldSet, EpsilonDict) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f32, hi: f32| lo + (hi - lo) * rng.gen::<f32>();
    let s = Spectrogram::new(Grid::from_fn(rows, cols, |_, _| u(0.0, 2.0))).unwrap();
    let mut fields = || {
        FieldSet::new(
            (0..cols).map(|_| u(-1.0, 1.0)).collect(),
            (0..rows).map(|_| u(-1.0, 1.0)).collect(),
            Grid::from_fn(rows, cols, |_, _| u(-1.0, 1.0)),
            Grid::from_fn(rows, cols, |_, _| u(-1.0, 1.0)),
            Grid::from_fn(rows, cols, |_, _| u(-1.0, 1.0)),
        )
        .unwrap()
    };
    let pred = fields();
    let mut truth = fields();
    let eps = EpsilonDict {
        t_stretch: u(0.0, 1.0) as f64,
        f_stretch: u(0.0, 1.0) as f64,
        warp_2d: u(0.0, 1.0) as f64,
        amplitude: u(0.0, 1.0) as f64,
        reference: 1.0,
    };
    if seed % 2 == 1 {
        truth.phi_time.iter_mut().for_each(|v| *v = 0.0);
        truth.phi_freq.iter_mut().for_each(|v| *v = 0.0);
        let (f0, t0) = (rows / 3, cols / 3);
        for f in 0..rows {
            for t in 0..cols {
                if f < f0 || t < t0 {
                    truth.phi_ut[(f, t)] = 0.0;
                    truth.phi_uf[(f, t)] = 0.0;
                    truth.phi_amp[(f, t)] = 0.0;
                }
            }
        }
    }
    (s, pred, truth, eps)
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-30)
}
