//! Command-line driver.
//!
//! Every artifact-producing command writes into a fresh run directory under
//! the output root (`--out`, else `$VALVETIME_OUTPUT_ROOT`, else `runs`):
//!
//! ```text
//! config.json          resolved configuration
//! manifest.ref.json    path and digest of the input manifest, if any
//! foldplan.json        patient groups and fold roles (train, crossval)
//! checkpoints/         fold-NN.json + fold-NN.weights
//! history/             fold-NN.csv (epoch, train_loss, val_loss)
//! labels/              <id>.json
//! predictions/         <id>.json, annotation schema with diagnostics
//! reports/             report.csv, report.json, intervals.csv, report.md, *.svg
//! ```
//!
//! `synth` writes its dataset (manifest.json, recordings/, annotations/)
//! at the run directory root.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::{Preset, RunConfig};

use crate::error::Error;
use crate::synth::DatasetMode;

/// Environment variable naming the output root.
pub const OUTPUT_ROOT_ENV: &str = "VALVETIME_OUTPUT_ROOT";

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    /// Failure not covered below (for example an invalid annotation).
    pub const FAILURE: i32 = 1;
    /// Unknown flag, bad flag value or invalid argument.
    pub const USAGE: i32 = 2;
    /// Configuration failed validation.
    pub const CONFIG: i32 = 3;
    /// Missing path or other I/O failure.
    pub const IO: i32 = 4;
    /// Malformed input file.
    pub const FORMAT: i32 = 5;
    /// Training diverged.
    pub const NON_FINITE_LOSS: i32 = 6;
}

#[derive(Debug, Parser)]
#[command(name = "valvetime", version, about = "Cardiac valve event timing from image sequences")]
pub struct Cli {
    /// JSON config merged over the preset defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dotted override such as `train.max_epochs=5`; repeatable, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Default network and phantom sizes.
    #[arg(long, value_enum, default_value_t = Preset::Full, global = true)]
    pub preset: Preset,
    /// Root seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root for run directories.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exact run directory; must not already hold a run.
    #[arg(long, global = true)]
    pub run_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Write per-frame training targets for every manifest entry.
    Labels(ManifestArg),
    /// Train one cross-validation fold.
    Train(TrainArgs),
    /// Run the full k-fold protocol and evaluate the pooled test predictions.
    Crossval(CrossvalArgs),
    /// Predict event annotations with a checkpoint or a fold ensemble.
    Infer(InferArgs),
    /// Compare predicted annotations with the manifest's references.
    Eval(EvalArgs),
    /// Cardiac interval tables from annotations.
    Intervals(IntervalsArgs),
    /// Render an evaluation report as a Markdown table and SVG histograms.
    Report(ReportArgs),
    /// Print parameters, FLOPs and receptive field of a network config.
    Complexity(ComplexityArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Dataset layout; overrides `synth.mode`.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Number of phantom patients; overrides `synth.n_patients`.
    #[arg(long)]
    pub n_patients: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Triplane,
    External,
}

impl From<ModeArg> for DatasetMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Triplane => DatasetMode::Triplane,
            ModeArg::External => DatasetMode::External,
        }
    }
}

#[derive(Debug, Args)]
pub struct ManifestArg {
    /// Dataset `manifest.json`.
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset `manifest.json`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fold index in `0..k`.
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    /// Number of folds; overrides `crossval.k`.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CrossvalArgs {
    /// Dataset `manifest.json`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Number of folds; overrides `crossval.k`.
    #[arg(long)]
    pub k: Option<usize>,
    /// Folds trained concurrently, each writing only its own files.
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "weights")]
pub struct WeightSource {
    /// A single checkpoint header (`.json`).
    #[arg(long, group = "weights")]
    pub checkpoint: Option<PathBuf>,
    /// A crossval run directory; every checkpoint in it is averaged.
    #[arg(long, group = "weights")]
    pub ensemble: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Dataset `manifest.json`.
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub weights: WeightSource,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest holding the reference annotations.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of predicted annotation files named `<id>.json`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Dataset label in the report; defaults to the manifest mode.
    #[arg(long)]
    pub dataset: Option<String>,
}

#[derive(Debug, Args)]
pub struct IntervalsArgs {
    /// Dataset `manifest.json`.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Read `<id>.json` annotations from here instead of the references.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `eval` or `crossval`.
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    /// Which network to describe.
    #[arg(long, value_enum, default_value_t = ModelArg::Classification)]
    pub model: ModelArg,
    /// Sequence length for the total FLOP figure.
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Classification,
    Regression,
}

/// Exit code and one-line kind for an error.
pub fn classify(err: &Error) -> (i32, &'static str) {
    match err {
        Error::InvalidArgument(_) => (exit::USAGE, "invalid_argument"),
        Error::Config(_) => (exit::CONFIG, "config"),
        Error::Io { .. } => (exit::IO, "io"),
        Error::Format { .. } | Error::Json(_) => (exit::FORMAT, "format"),
        Error::NonFiniteLoss { .. } => (exit::NON_FINITE_LOSS, "non_finite_loss"),
        Error::Annotation(_) => (exit::FAILURE, "annotation"),
    }
}

fn error_line(code: i32, kind: &str, msg: &str) -> String {
    let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error[code={code} kind={kind}]: {msg}")
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code. Failures print a single `error[code=N kind=K]: message` line
/// on stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return exit::OK;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line(exit::USAGE, "usage", first));
            return exit::USAGE;
        }
    };
    match commands::execute(&cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", error_line(code, kind, &e.to_string()));
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_lines_are_single_line() {
        let line = error_line(4, "io", "I/O error at x:\n  No such file");
        assert_eq!(line, "error[code=4 kind=io]: I/O error at x: No such file");
    }

    #[test]
    fn exit_codes_are_distinct() {
        let errors = [
            Error::InvalidArgument("a".into()),
            Error::Config("b".into()),
            Error::io("p", std::io::Error::from(std::io::ErrorKind::NotFound)),
            Error::format("p", "f", "m"),
            Error::NonFiniteLoss { epoch: 1, batch: 0 },
        ];
        let mut codes: Vec<i32> = errors.iter().map(|e| classify(e).0).collect();
        codes.push(exit::FAILURE);
        codes.push(exit::OK);
        let n = codes.len();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), n);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["valvetime", "complexity", "--bogus"]), exit::USAGE);
        assert_eq!(run(["valvetime", "frobnicate"]), exit::USAGE);
        assert_eq!(run(["valvetime", "infer", "--manifest", "m.json"]), exit::USAGE);
    }
}
