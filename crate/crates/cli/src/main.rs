//! `liewarp` command-line tool. Structured output goes to stdout as JSON;
//! failures print `{"error": kind, "message": text}` on stderr and exit
//! nonzero.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use liewarp::losses::{CosineForm, CosineMask};
use liewarp::TransformMode;

use crate::commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "liewarp", version, about = "Local Lie-group warps of magnitude spectrograms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct EpsArg {
    /// Strengths as inline JSON (`{"warp_2d":0.5,...}`) or a path to a JSON file.
    /// Missing keys default to 0.5; `reference` defaults to 1.
    #[arg(long = "eps-json", value_name = "JSON|PATH")]
    eps_json: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a ground-truth field set for one mode.
    GenFields {
        /// Grid shape as FxT, e.g. 80x512.
        #[arg(long, value_name = "FxT")]
        shape: String,
        #[arg(long, value_parser = parse_mode)]
        mode: TransformMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Blob parameters as inline JSON or a path; the seed flag wins.
        #[arg(long, value_name = "JSON|PATH")]
        params: Option<String>,
        /// Output directory for the five LWF1 channels, fields.json and params.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the forward transform as a flow of K first-order steps.
    Apply {
        #[arg(long)]
        spec: PathBuf,
        /// Field set directory.
        #[arg(long)]
        fields: PathBuf,
        #[command(flatten)]
        eps: EpsArg,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Approximately invert a K-step forward transform.
    Invert {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        fields: PathBuf,
        #[command(flatten)]
        eps: EpsArg,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw fields, apply and invert, and report the reconstruction error.
    Roundtrip {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_parser = parse_mode)]
        mode: TransformMode,
        #[command(flatten)]
        eps: EpsArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        steps: usize,
        #[arg(long, value_name = "JSON|PATH")]
        params: Option<String>,
    },
    /// Evaluate the five loss terms for a predicted field set.
    Loss {
        #[arg(long)]
        true_spec: PathBuf,
        #[arg(long)]
        pred_fields: PathBuf,
        #[arg(long)]
        true_fields: PathBuf,
        #[command(flatten)]
        eps: EpsArg,
        /// Loss weights as inline JSON or a path; missing lambdas default to 1.
        #[arg(long, value_name = "JSON|PATH")]
        weights: Option<String>,
        /// Absolute support threshold; default is 1e-6 times the largest true cell norm.
        #[arg(long)]
        theta_tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = CosineFormArg::Standard)]
        cosine_form: CosineFormArg,
        #[arg(long, value_enum, default_value_t = CosineMaskArg::Support)]
        cosine_mask: CosineMaskArg,
    },
    /// Synthesize a corpus of (clean, distorted, fields) triples.
    Synth {
        /// JSON-lines input manifest of {"path": ..., "id": ...} entries.
        #[arg(long)]
        manifest: PathBuf,
        /// Synthesis config JSON; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Worker count; defaults to LIEWARP_THREADS or the available cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the curriculum strength at a step.
    Schedule {
        #[arg(long, value_enum)]
        kind: ScheduleArg,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        at: u64,
    },
    /// Render a 1D or 2D tensor as an 8-bit PGM heatmap, low rows at the bottom.
    Render {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report mean per-mode spectrogram loss so strengths can be rebalanced.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        /// Strengths to calibrate at; defaults to 1 for every mode.
        #[command(flatten)]
        eps: EpsArg,
        /// Field draws per input.
        #[arg(long, default_value_t = 4)]
        seeds: u64,
        #[arg(long, value_name = "JSON|PATH")]
        params: Option<String>,
    },
    /// Convert a 16-bit mono WAV file to an LWF1 mel spectrogram.
    Mel {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Mel settings as inline JSON or a path.
        #[arg(long, value_name = "JSON|PATH")]
        mel_json: Option<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScheduleArg {
    V1,
    V2,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CosineFormArg {
    Standard,
    SquaredNorms,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CosineMaskArg {
    Support,
    Full,
}

impl From<CosineFormArg> for CosineForm {
    fn from(v: CosineFormArg) -> Self {
        match v {
            CosineFormArg::Standard => CosineForm::Standard,
            CosineFormArg::SquaredNorms => CosineForm::SquaredNorms,
        }
    }
}

impl From<CosineMaskArg> for CosineMask {
    fn from(v: CosineMaskArg) -> Self {
        match v {
            CosineMaskArg::Support => CosineMask::Support,
            CosineMaskArg::Full => CosineMask::Full,
        }
    }
}

fn parse_mode(s: &str) -> Result<TransformMode, String> {
    s.parse::<TransformMode>().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    use commands as c;
    match cli.command {
        Command::GenFields { shape, mode, seed, params, out } => c::gen_fields(&shape, mode, seed, params.as_deref(), &out),
        Command::Apply { spec, fields, eps, steps, out } => c::apply(&spec, &fields, eps.eps_json.as_deref(), steps, &out),
        Command::Invert { spec, fields, eps, steps, out } => c::invert(&spec, &fields, eps.eps_json.as_deref(), steps, &out),
        Command::Roundtrip { spec, mode, eps, seed, steps, params } => {
            c::roundtrip(&spec, mode, eps.eps_json.as_deref(), seed, steps, params.as_deref())
        }
        Command::Loss { true_spec, pred_fields, true_fields, eps, weights, theta_tol, cosine_form, cosine_mask } => c::loss(
            &true_spec,
            &pred_fields,
            &true_fields,
            eps.eps_json.as_deref(),
            weights.as_deref(),
            liewarp::LossOptions { theta_tol, cosine_form: cosine_form.into(), cosine_mask: cosine_mask.into() },
        ),
        Command::Synth { manifest, config, out, threads } => c::synth(&manifest, config.as_deref(), &out, threads),
        Command::Schedule { kind, steps, at } => c::schedule(matches!(kind, ScheduleArg::V1), steps, at),
        Command::Render { tensor, out } => render::render(&tensor, &out),
        Command::Calibrate { manifest, eps, seeds, params } => {
            c::calibrate(&manifest, eps.eps_json.as_deref(), seeds, params.as_deref())
        }
        Command::Mel { wav, out, mel_json } => c::mel(&wav, &out, mel_json.as_deref()),
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(cli) {
        Ok(value) => {
            println!("{value}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
