//! Supervised triple synthesis: (clean, distorted, ground-truth fields).
//!
//! Per-sample seeds are derived from `(corpus_seed, sample_id)`, never from
//! manifest position, so serial, parallel, shuffled and resumed runs all
//! emit identical files and an identical manifest (records sorted by id).

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{audio_to_mel, read_wav, MelConfig};
use crate::error::{Error, Result};
use crate::fieldgen::{gen_fieldset, BlobParams};
use crate::grid::{EpsilonDict, FieldSet, Spectrogram, TransformMode};
use crate::inverse::consistency_error;
use crate::losses::loss_spec;
use crate::schedule::scale_eps_dict;
use crate::tensor_io::{read_spectrogram, write_fieldset, write_spectrogram};
use crate::transform::{apply_first_order, check_monotonic, energy_ratio};

/// First eight bytes (little-endian) of `sha256(base_le || label)`.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Uniform draw from `modes` driven by `seed`.
pub fn sample_mode(seed: u64, modes: &[TransformMode]) -> Result<TransformMode> {
    if modes.is_empty() {
        return Err(Error::invalid("modes", "at least one mode is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "mode"));
    Ok(modes[rng.gen_range(0..modes.len())])
}

/// Provenance of one synthesized sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub mode: TransformMode,
    /// Seed the emitted fields were drawn with, after any retries.
    pub seed: u64,
    pub eps_dict: EpsilonDict,
    pub params: BlobParams,
    pub monotonic_ok: bool,
    /// `None` when the clean input has zero energy.
    pub energy_ratio: Option<f64>,
    /// Interior error of inverting the emitted triple; `None` when the
    /// check is disabled or the clean input has zero energy.
    pub roundtrip_error: Option<f64>,
    pub retries: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub distorted: Spectrogram,
    pub fields: FieldSet,
    pub info: SampleInfo,
}

pub const DEFAULT_MAX_RETRIES: u32 = 8;
pub const DEFAULT_MAX_ROUNDTRIP_ERROR: f64 = 0.1;

/// Acceptance checks applied to every candidate draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleLimits {
    pub max_retries: u32,
    /// Reject draws whose triple inverts worse than this; `None` skips the
    /// check. Strong curricula need a looser bound or none.
    pub max_roundtrip_error: Option<f64>,
}

impl Default for SampleLimits {
    fn default() -> Self {
        SampleLimits {
            max_retries: DEFAULT_MAX_RETRIES,
            max_roundtrip_error: Some(DEFAULT_MAX_ROUNDTRIP_ERROR),
        }
    }
}

/// Draws fields for `mode`, redrawing with derived seeds while the warp
/// folds or the triple fails the round-trip bound, and applies the
/// first-order transform.
pub fn synthesize_sample(
    clean: &Spectrogram,
    mode: TransformMode,
    blob_params: &BlobParams,
    eps_dict: &EpsilonDict,
    seed: u64,
    limits: &SampleLimits,
) -> Result<Sample> {
    eps_dict.validate()?;
    if let Some(tol) = limits.max_roundtrip_error {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::invalid("max_roundtrip_error", format!("{tol} must be finite and > 0")));
        }
    }
    let (f_bins, t_frames) = clean.shape();
    let silent = clean.grid().is_all_zero();
    let (mut folded, mut inconsistent) = (0u32, 0u32);
    for retry in 0..=limits.max_retries {
        let attempt_seed = if retry == 0 { seed } else { derive_seed(seed, &format!("retry{retry}")) };
        let params = blob_params.clone().with_seed(attempt_seed);
        let fields = gen_fieldset(f_bins, t_frames, mode, &params)?;
        if !check_monotonic(&fields, eps_dict)?.is_ok() {
            folded += 1;
            continue;
        }
        let distorted = apply_first_order(clean, &fields, eps_dict)?;
        let roundtrip_error = match limits.max_roundtrip_error {
            Some(tol) if !silent => {
                let e = consistency_error(clean, &distorted, &fields, eps_dict)?;
                if e >= tol {
                    inconsistent += 1;
                    continue;
                }
                Some(e)
            }
            _ => None,
        };
        let ratio = energy_ratio(clean, &distorted)?;
        return Ok(Sample {
            distorted,
            fields,
            info: SampleInfo {
                mode,
                seed: attempt_seed,
                eps_dict: *eps_dict,
                params,
                monotonic_ok: true,
                energy_ratio: ratio.is_finite().then_some(ratio),
                roundtrip_error,
                retries: retry,
            },
        });
    }
    Err(Error::invalid(
        "sample",
        format!(
            "no acceptable {mode} draw after {} retries ({folded} folded, {inconsistent} over the round-trip bound)",
            limits.max_retries
        ),
    ))
}

fn default_modes() -> Vec<TransformMode> {
    TransformMode::ACTIVE.to_vec()
}

fn default_max_retries() -> u32 {
    DEFAULT_MAX_RETRIES
}

fn default_max_roundtrip_error() -> Option<f64> {
    Some(DEFAULT_MAX_ROUNDTRIP_ERROR)
}

/// Corpus-level synthesis settings (`synth --config`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub corpus_seed: u64,
    #[serde(default)]
    pub eps_dict: EpsilonDict,
    /// Optional curriculum level; rescales `eps_dict` from its reference.
    #[serde(default)]
    pub eps_level: Option<f64>,
    #[serde(default)]
    pub blob_params: BlobParams,
    #[serde(default = "default_modes")]
    pub modes: Vec<TransformMode>,
    #[serde(default)]
    pub mel: MelConfig,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// `null` disables the round-trip check.
    #[serde(default = "default_max_roundtrip_error")]
    pub max_roundtrip_error: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            corpus_seed: 0,
            eps_dict: EpsilonDict::default(),
            eps_level: None,
            blob_params: BlobParams::default(),
            modes: default_modes(),
            mel: MelConfig::default(),
            max_retries: DEFAULT_MAX_RETRIES,
            max_roundtrip_error: default_max_roundtrip_error(),
        }
    }
}

impl SynthConfig {
    pub fn limits(&self) -> SampleLimits {
        SampleLimits {
            max_retries: self.max_retries,
            max_roundtrip_error: self.max_roundtrip_error,
        }
    }

    pub fn effective_eps(&self) -> Result<EpsilonDict> {
        match self.eps_level {
            Some(level) => scale_eps_dict(&self.eps_dict, level),
            None => {
                self.eps_dict.validate()?;
                Ok(self.eps_dict)
            }
        }
    }
}

/// One line of the input manifest. `id` defaults to the file stem; relative
/// paths resolve against the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputEntry {
    #[serde(default)]
    pub id: Option<String>,
    pub path: PathBuf,
}

impl InputEntry {
    pub fn resolved_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePaths {
    pub clean: String,
    pub distorted: String,
    pub fields: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Failed,
}

/// One line of the output manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub status: RecordStatus,
    pub mode: Option<TransformMode>,
    pub seed: Option<u64>,
    pub eps_dict: Option<EpsilonDict>,
    pub params: Option<BlobParams>,
    pub paths: Option<SamplePaths>,
    pub energy_ratio: Option<f64>,
    pub monotonic_ok: Option<bool>,
    pub roundtrip_error: Option<f64>,
    pub retries: Option<u32>,
    /// sha256 over config, id and input bytes; drives resumption.
    pub input_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    fn failed(id: String, input_hash: Option<String>, error: String) -> Self {
        SampleRecord {
            id,
            status: RecordStatus::Failed,
            mode: None,
            seed: None,
            eps_dict: None,
            params: None,
            paths: None,
            energy_ratio: None,
            monotonic_ok: None,
            roundtrip_error: None,
            retries: None,
            input_hash,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSummary {
    pub manifest_path: PathBuf,
    /// Hex sha256 of the manifest bytes.
    pub manifest_hash: String,
    pub records: Vec<SampleRecord>,
    pub emitted: usize,
    pub skipped: usize,
    pub failed: usize,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";
const RECORD_NAME: &str = "record.json";

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub fn read_input_manifest(path: impl AsRef<Path>) -> Result<Vec<InputEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut e: InputEntry = serde_json::from_str(l).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
            if e.path.is_relative() {
                e.path = base.join(&e.path);
            }
            Ok(e)
        })
        .collect()
}

/// Reads an input as a clean spectrogram: `.wav` through the mel front
/// end, anything else as an LWF1 tensor.
pub fn load_clean(path: &Path, mel: &MelConfig) -> Result<Spectrogram> {
    let is_wav = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("wav"))
        .unwrap_or(false);
    if is_wav {
        let (samples, sr) = read_wav(path)?;
        audio_to_mel(&samples, sr, mel)
    } else {
        read_spectrogram(path)
    }
}

fn input_hash(config_json: &str, id: &str, bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update((config_json.len() as u64).to_le_bytes());
    h.update(config_json.as_bytes());
    h.update((id.len() as u64).to_le_bytes());
    h.update(id.as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

enum Outcome {
    Emitted(SampleRecord),
    Skipped(SampleRecord),
    Failed(SampleRecord),
}

fn previous_record(out_dir: &Path, id: &str, hash: &str) -> Option<SampleRecord> {
    let dir = out_dir.join("samples").join(id);
    let text = fs::read_to_string(dir.join(RECORD_NAME)).ok()?;
    let rec: SampleRecord = serde_json::from_str(&text).ok()?;
    let paths = rec.paths.as_ref()?;
    let complete = [&paths.clean, &paths.distorted, &paths.fields]
        .iter()
        .all(|p| out_dir.join(p).exists());
    (rec.status == RecordStatus::Ok && rec.input_hash.as_deref() == Some(hash) && complete).then_some(rec)
}

fn process_entry(entry: &InputEntry, config: &SynthConfig, config_json: &str, eps: &EpsilonDict, out_dir: &Path) -> Outcome {
    let id = entry.resolved_id();
    if !valid_id(&id) {
        return Outcome::Failed(SampleRecord::failed(id.clone(), None, format!("invalid sample id {id:?}")));
    }
    let bytes = match fs::read(&entry.path) {
        Ok(b) => b,
        Err(e) => return Outcome::Failed(SampleRecord::failed(id, None, Error::io(&entry.path, e).to_string())),
    };
    let hash = input_hash(config_json, &id, &bytes);
    if let Some(rec) = previous_record(out_dir, &id, &hash) {
        return Outcome::Skipped(rec);
    }
    match emit_sample(&id, &entry.path, config, eps, out_dir, &hash) {
        Ok(rec) => Outcome::Emitted(rec),
        Err(e) => Outcome::Failed(SampleRecord::failed(id, Some(hash), e.to_string())),
    }
}

fn emit_sample(id: &str, input: &Path, config: &SynthConfig, eps: &EpsilonDict, out_dir: &Path, hash: &str) -> Result<SampleRecord> {
    let clean = load_clean(input, &config.mel)?;
    let sample_seed = derive_seed(config.corpus_seed, id);
    let mode = sample_mode(sample_seed, &config.modes)?;
    let field_seed = derive_seed(sample_seed, "fields");
    let sample = synthesize_sample(&clean, mode, &config.blob_params, eps, field_seed, &config.limits())?;

    let rel = format!("samples/{id}");
    let dir = out_dir.join(&rel);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let paths = SamplePaths {
        clean: format!("{rel}/clean.lwf1"),
        distorted: format!("{rel}/distorted.lwf1"),
        fields: format!("{rel}/fields"),
    };
    write_spectrogram(out_dir.join(&paths.clean), &clean)?;
    write_spectrogram(out_dir.join(&paths.distorted), &sample.distorted)?;
    write_fieldset(out_dir.join(&paths.fields), &sample.fields)?;

    let info = sample.info;
    let record = SampleRecord {
        id: id.to_string(),
        status: RecordStatus::Ok,
        mode: Some(info.mode),
        seed: Some(info.seed),
        eps_dict: Some(info.eps_dict),
        params: Some(info.params),
        paths: Some(paths),
        energy_ratio: info.energy_ratio,
        monotonic_ok: Some(info.monotonic_ok),
        roundtrip_error: info.roundtrip_error,
        retries: Some(info.retries),
        input_hash: Some(hash.to_string()),
        error: None,
    };
    let rec_path = dir.join(RECORD_NAME);
    let json = serde_json::to_string_pretty(&record).map_err(|source| Error::Json {
        path: rec_path.clone(),
        source,
    })?;
    fs::write(&rec_path, json + "\n").map_err(|e| Error::io(&rec_path, e))?;
    Ok(record)
}

/// Synthesizes every entry into `out_dir` using up to `threads` workers
/// and writes `manifest.jsonl`. Unreadable or invalid inputs become failed
/// records; the run itself only errors on configuration or output I/O.
pub fn synthesize_entries(entries: &[InputEntry], config: &SynthConfig, out_dir: &Path, threads: usize) -> Result<CorpusSummary> {
    let eps = config.effective_eps()?;
    config.blob_params.validate()?;
    if config.modes.is_empty() {
        return Err(Error::invalid("synth config", "modes must not be empty"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let config_json = serde_json::to_string(config).expect("config serializes");

    let mut id_counts: HashMap<String, usize> = HashMap::new();
    for e in entries {
        *id_counts.entry(e.resolved_id()).or_default() += 1;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid("threads", e.to_string()))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let id = entry.resolved_id();
                if id_counts[&id] > 1 {
                    Outcome::Failed(SampleRecord::failed(id, None, "duplicate sample id".into()))
                } else {
                    process_entry(entry, config, &config_json, &eps, out_dir)
                }
            })
            .collect()
    });

    let (mut emitted, mut skipped, mut failed) = (0, 0, 0);
    let mut by_id: BTreeMap<String, SampleRecord> = BTreeMap::new();
    let mut dup_failures = Vec::new();
    for o in outcomes {
        let rec = match o {
            Outcome::Emitted(r) => {
                emitted += 1;
                r
            }
            Outcome::Skipped(r) => {
                skipped += 1;
                r
            }
            Outcome::Failed(r) => {
                failed += 1;
                r
            }
        };
        if by_id.contains_key(&rec.id) {
            dup_failures.push(rec);
        } else {
            by_id.insert(rec.id.clone(), rec);
        }
    }
    let mut records: Vec<SampleRecord> = by_id.into_values().collect();
    records.extend(dup_failures);
    records.sort_by(|a, b| a.id.cmp(&b.id));

    let mut manifest = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r).expect("record serializes"));
        manifest.push('\n');
    }
    let manifest_path = out_dir.join(MANIFEST_NAME);
    fs::write(&manifest_path, &manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(CorpusSummary {
        manifest_path,
        manifest_hash: hex::encode(Sha256::digest(manifest.as_bytes())),
        records,
        emitted,
        skipped,
        failed,
    })
}

pub fn synthesize_corpus(input_manifest: &Path, config: &SynthConfig, out_dir: &Path, threads: usize) -> Result<CorpusSummary> {
    let entries = read_input_manifest(input_manifest)?;
    synthesize_entries(&entries, config, out_dir, threads)
}

/// Mean first-order spectrogram loss per active mode at the base strengths,
/// averaged over `seeds` field draws per clean input. Used to rebalance the
/// per-mode ratios of an epsilon dict.
pub fn calibrate_modes(
    clean: &[Spectrogram],
    base: &EpsilonDict,
    params: &BlobParams,
    seeds: u64,
) -> Result<BTreeMap<TransformMode, f64>> {
    if clean.is_empty() || seeds == 0 {
        return Err(Error::invalid("calibration", "need at least one input and one seed"));
    }
    let mut out = BTreeMap::new();
    for mode in TransformMode::ACTIVE {
        let mut acc = 0.0;
        for (i, s) in clean.iter().enumerate() {
            let (f, t) = s.shape();
            for k in 0..seeds {
                let seed = derive_seed(k, &format!("calibrate/{i}/{mode}"));
                let fields = gen_fieldset(f, t, mode, &params.clone().with_seed(seed))?;
                acc += loss_spec(s, &fields, base)?;
            }
        }
        out.insert(mode, acc / (clean.len() as u64 * seeds) as f64);
    }
    Ok(out)
}
