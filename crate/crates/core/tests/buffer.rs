use liewarp::buffer::{apply, generate, invert_buffer, losses, spectrogram_from_buffer};
use liewarp::{apply_flow, gen_fieldset, total_loss, BlobParams, EpsilonDict, FieldSet, Grid, LossOptions, LossWeights, Spectrogram, TransformMode};

fn spec(f: usize, t: usize) -> Vec<f32> {
    (0..f * t).map(|i| 0.1 + (i % 7) as f32 * 0.3).collect()
}

#[test]
fn zero_fields_pass_through_bit_exactly() {
    let (f, t) = (6, 9);
    let s = spec(f, t);
    let z = FieldSet::zeros(f, t);
    let out = apply(f, t, &s, [&z.phi_time, &z.phi_freq, z.phi_ut.as_slice(), z.phi_uf.as_slice(), z.phi_amp.as_slice()], &EpsilonDict::uniform(0.8), 3).unwrap();
    assert_eq!(out, s);
}

#[test]
fn buffers_match_typed_api() {
    let (f, t) = (12, 20);
    let params = BlobParams::default().with_seed(42);
    let ch = generate(f, t, TransformMode::Warp2D, &params).unwrap();
    let fs = gen_fieldset(f, t, TransformMode::Warp2D, &params).unwrap();
    assert_eq!(ch[2], fs.phi_ut.as_slice());
    let s = spec(f, t);
    let eps = EpsilonDict::default();
    let views = [ch[0].as_slice(), &ch[1], &ch[2], &ch[3], &ch[4]];
    let out = apply(f, t, &s, views, &eps, 2).unwrap();
    let typed = apply_flow(&Spectrogram::new(Grid::from_vec(f, t, s.clone()).unwrap()).unwrap(), &fs, &eps, 2).unwrap();
    assert_eq!(out, typed.grid().as_slice());
    let (back, clamped) = invert_buffer(f, t, &out, views, &eps, 2).unwrap();
    assert_eq!(back.len(), f * t);
    assert_eq!(clamped, 0);
    let report = losses(f, t, &s, views, views, &eps, &LossWeights::default(), &LossOptions::default()).unwrap();
    let sp = Spectrogram::new(Grid::from_vec(f, t, s).unwrap()).unwrap();
    assert_eq!(report, total_loss(&sp, &fs, &fs, &eps, &LossWeights::default(), &LossOptions::default()).unwrap());
}

#[test]
fn shape_errors_name_the_channel() {
    let (f, t) = (4, 5);
    let good = FieldSet::zeros(f, t);
    let short = vec![0.0f32; f * t - 1];
    let s = spec(f, t);
    for (k, name) in liewarp::grid::CHANNEL_NAMES.iter().enumerate() {
        let mut views: [&[f32]; 5] = [&good.phi_time, &good.phi_freq, good.phi_ut.as_slice(), good.phi_uf.as_slice(), good.phi_amp.as_slice()];
        views[k] = &short;
        let err = apply(f, t, &s, views, &EpsilonDict::ZERO, 1).unwrap_err().to_string();
        assert!(err.contains(name), "{err}");
    }
    let mut bad = good.phi_ut.as_slice().to_vec();
    bad[3] = 1.5;
    let err = FieldSet::from_slices(f, t, [&good.phi_time, &good.phi_freq, &bad, good.phi_uf.as_slice(), good.phi_amp.as_slice()])
        .unwrap_err()
        .to_string();
    assert!(err.contains("phi_ut"), "{err}");
    let err = spectrogram_from_buffer(f, t, &s[1..], "spectrogram").unwrap_err().to_string();
    assert!(err.contains("spectrogram") && err.contains("20 values"), "{err}");
}
