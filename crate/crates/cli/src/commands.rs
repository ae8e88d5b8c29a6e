use std::fs;
use std::path::Path;

use liewarp::audio::{audio_to_mel, read_wav, MelConfig};
use liewarp::synth::{calibrate_modes, read_input_manifest, load_clean};
use liewarp::tensor_io::{read_fieldset, read_spectrogram, write_fieldset, write_spectrogram};
use liewarp::{
    apply_flow, check_monotonic, displacement, energy_ratio, gen_fieldset, roundtrip_error, synthesize_corpus,
    total_loss, BlobParams, EpsilonDict, LossOptions, LossWeights, Schedule, SynthConfig, TransformMode,
};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

pub const THREADS_ENV: &str = "LIEWARP_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] liewarp::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
fn json_arg(arg: &str, what: &str) -> Result<Value> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|source| CliError::Io { path: arg.to_string(), source })?
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("{what}: {e}")))
}

/// Overlays the keys of a JSON object onto `T::default()`, rejecting
/// unknown keys.
fn merged<T: Default + Serialize + DeserializeOwned>(arg: Option<&str>, base: T, what: &str) -> Result<T> {
    let Some(arg) = arg else { return Ok(base) };
    let mut doc = serde_json::to_value(&base).expect("defaults serialize");
    let Value::Object(patch) = json_arg(arg, what)? else {
        return Err(usage(format!("{what} must be a JSON object")));
    };
    let target = doc.as_object_mut().expect("struct serializes as object");
    for (k, v) in patch {
        if !target.contains_key(&k) {
            let known: Vec<&String> = target.keys().collect();
            return Err(usage(format!("{what}: unknown key {k:?}, expected one of {known:?}")));
        }
        target.insert(k, v);
    }
    serde_json::from_value(doc).map_err(|e| usage(format!("{what}: {e}")))
}

fn eps_dict(arg: Option<&str>) -> Result<EpsilonDict> {
    let eps: EpsilonDict = merged(arg, EpsilonDict::default(), "eps-json")?;
    eps.validate()?;
    Ok(eps)
}

fn blob_params(arg: Option<&str>) -> Result<BlobParams> {
    let p: BlobParams = merged(arg, BlobParams::default(), "params")?;
    p.validate()?;
    Ok(p)
}

fn parse_shape(s: &str) -> Result<(usize, usize)> {
    let bad = || usage(format!("shape {s:?} must look like FxT, e.g. 80x512"));
    let (f, t) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let f: usize = f.trim().parse().map_err(|_| bad())?;
    let t: usize = t.trim().parse().map_err(|_| bad())?;
    if f < 2 || t < 2 {
        return Err(usage(format!("shape {s:?} needs F >= 2 and T >= 2")));
    }
    Ok((f, t))
}

fn write_json_file(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

pub fn gen_fields(shape: &str, mode: TransformMode, seed: u64, params: Option<&str>, out: &Path) -> Result<Value> {
    let (f, t) = parse_shape(shape)?;
    let params = blob_params(params)?.with_seed(seed);
    let fields = gen_fieldset(f, t, mode, &params)?;
    write_fieldset(out, &fields)?;
    let meta = json!({ "mode": mode, "f_bins": f, "t_frames": t, "params": params });
    write_json_file(&out.join("params.json"), &meta)?;
    Ok(json!({
        "out": out,
        "mode": mode,
        "f_bins": f,
        "t_frames": t,
        "seed": seed,
        "nonzero_channels": fields.nonzero_channels(),
        "max_abs": fields.max_abs(),
    }))
}

pub fn apply(spec: &Path, fields: &Path, eps: Option<&str>, steps: usize, out: &Path) -> Result<Value> {
    let s = read_spectrogram(spec)?;
    let fs = read_fieldset(fields)?;
    let eps = eps_dict(eps)?;
    let moved = apply_flow(&s, &fs, &eps, steps)?;
    write_spectrogram(out, &moved)?;
    let ratio = energy_ratio(&s, &moved)?;
    Ok(json!({
        "out": out,
        "steps": steps,
        "max_shift": displacement(&fs, &eps)?.max_shift(),
        "monotonic_ok": check_monotonic(&fs, &eps)?.is_ok(),
        "energy_ratio": ratio.is_finite().then_some(ratio),
    }))
}

pub fn invert(spec: &Path, fields: &Path, eps: Option<&str>, steps: usize, out: &Path) -> Result<Value> {
    let s = read_spectrogram(spec)?;
    let fs = read_fieldset(fields)?;
    let eps = eps_dict(eps)?;
    let inv = liewarp::invert(&s, &fs, &eps, steps)?;
    write_spectrogram(out, &inv.spectrogram)?;
    Ok(json!({ "out": out, "steps": steps, "clamped_cells": inv.clamped_cells }))
}

pub fn roundtrip(spec: &Path, mode: TransformMode, eps: Option<&str>, seed: u64, steps: usize, params: Option<&str>) -> Result<Value> {
    let s = read_spectrogram(spec)?;
    let eps = eps_dict(eps)?;
    let (f, t) = s.shape();
    let fs = gen_fieldset(f, t, mode, &blob_params(params)?.with_seed(seed))?;
    let err = roundtrip_error(&s, &fs, &eps, steps)?;
    let ratio = energy_ratio(&s, &apply_flow(&s, &fs, &eps, steps)?)?;
    Ok(json!({
        "rel_l2": err.rel_l2,
        "interior_rel_l2": err.interior_rel_l2,
        "energy_ratio": ratio.is_finite().then_some(ratio),
        "monotonic_ok": check_monotonic(&fs, &eps)?.is_ok(),
    }))
}

pub fn loss(
    true_spec: &Path,
    pred_fields: &Path,
    true_fields: &Path,
    eps: Option<&str>,
    weights: Option<&str>,
    opts: LossOptions,
) -> Result<Value> {
    let s = read_spectrogram(true_spec)?;
    let pred = read_fieldset(pred_fields)?;
    let truth = read_fieldset(true_fields)?;
    let eps = eps_dict(eps)?;
    let weights: LossWeights = merged(weights, LossWeights::default(), "weights")?;
    let report = total_loss(&s, &pred, &truth, &eps, &weights, &opts)?;
    Ok(serde_json::to_value(report).expect("report serializes"))
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|n| n.max(1))
            .map_err(|_| usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

pub fn synth(manifest: &Path, config: Option<&Path>, out: &Path, threads: Option<usize>) -> Result<Value> {
    let config_arg = config.map(|p| p.display().to_string());
    let mut cfg: SynthConfig = merged(config_arg.as_deref(), SynthConfig::default(), "config")?;
    if cfg.modes.is_empty() {
        cfg.modes = TransformMode::ACTIVE.to_vec();
    }
    let threads = thread_count(threads)?;
    let summary = synthesize_corpus(manifest, &cfg, out, threads)?;
    Ok(json!({
        "manifest": summary.manifest_path,
        "manifest_hash": summary.manifest_hash,
        "emitted": summary.emitted,
        "skipped": summary.skipped,
        "failed": summary.failed,
        "threads": threads,
    }))
}

pub fn schedule(v1: bool, steps: u64, at: u64) -> Result<Value> {
    let s = if v1 { Schedule::v1(steps) } else { Schedule::v2(steps) };
    Ok(json!(s.eps_at(at)?))
}

pub fn calibrate(manifest: &Path, eps: Option<&str>, seeds: u64, params: Option<&str>) -> Result<Value> {
    let base = match eps {
        Some(_) => eps_dict(eps)?,
        None => EpsilonDict::uniform(1.0),
    };
    let entries = read_input_manifest(manifest)?;
    let mel = MelConfig::default();
    let clean = entries
        .iter()
        .map(|e| load_clean(&e.path, &mel))
        .collect::<liewarp::Result<Vec<_>>>()?;
    let per_mode = calibrate_modes(&clean, &base, &blob_params(params)?, seeds)?;
    Ok(json!({ "eps_dict": base, "inputs": clean.len(), "seeds": seeds, "loss_spec": per_mode }))
}

pub fn mel(wav: &Path, out: &Path, mel_json: Option<&str>) -> Result<Value> {
    let cfg: MelConfig = merged(mel_json, MelConfig::default(), "mel-json")?;
    let (samples, sr) = read_wav(wav)?;
    let s = audio_to_mel(&samples, sr, &cfg)?;
    write_spectrogram(out, &s)?;
    Ok(json!({ "out": out, "f_bins": s.f_bins(), "t_frames": s.t_frames(), "sample_rate_hz": sr }))
}
