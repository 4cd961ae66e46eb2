//! Command-line front end: argument definitions, ingestion and output.
//!
//! Every subcommand is also callable as a library function ([`cmd_fit`],
//! [`cmd_tune`], [`cmd_simulate`], [`cmd_sif`], [`cmd_sample`]), which is
//! how the integration tests drive them.

mod commands;
pub mod ingest;
pub mod output;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::asymptotics::TuningKind;
use crate::error::{Error, Result};
use crate::losses::LossSpec;

pub use commands::{cmd_fit, cmd_sample, cmd_sif, cmd_simulate, cmd_tune, SimFile};
pub use ingest::{ingest, InputFormat};
pub use output::RunManifest;

/// Efficiency retained by `dpd:auto` and `gamma:auto`.
pub const AUTO_ARE_TARGET: f64 = 0.95;

/// A `--loss` value: a fixed loss or a family whose tuning is picked by ARE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LossRequest {
    Fixed(LossSpec),
    Auto(TuningKind),
}

impl FromStr for LossRequest {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.split_once(':') {
            Some((family, "auto")) => Ok(LossRequest::Auto(family.parse()?)),
            _ => Ok(LossRequest::Fixed(t.parse()?)),
        }
    }
}

impl std::fmt::Display for LossRequest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossRequest::Fixed(spec) => write!(f, "{spec}"),
            LossRequest::Auto(TuningKind::Dpd) => f.write_str("dpd:auto"),
            LossRequest::Auto(TuningKind::Gamma) => f.write_str("gamma:auto"),
        }
    }
}

impl From<LossRequest> for String {
    fn from(r: LossRequest) -> String {
        r.to_string()
    }
}

impl TryFrom<String> for LossRequest {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Parser)]
#[command(name = "robvmf", version, about = "Robust generalized-Bayesian inference for von Mises-Fisher data")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "ROBVMF_THREADS")]
    pub threads: Option<usize>,
    /// Leave wall time out of manifests so re-runs give identical bytes.
    #[arg(long, global = true)]
    pub no_timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample posteriors by weighted Bayesian bootstrap and summarize them.
    Fit(FitArgs),
    /// Choose a tuning parameter from a target asymptotic relative efficiency.
    Tune(TuneArgs),
    /// Run a contamination study and write the MSE table.
    Simulate(SimulateArgs),
    /// Influence-function field over probe points.
    Sif(SifArgs),
    /// Draw a von Mises-Fisher sample.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV, one observation per row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "unit_vectors")]
    pub format: InputFormat,
    /// The first row of the input is a header.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Loss: kl, dpd:<alpha>, gamma:<gamma>, dpd:auto or gamma:auto. Repeatable.
    #[arg(long = "loss", default_value = "kl")]
    pub losses: Vec<LossRequest>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub prior: PriorKind,
    /// Weight λ of the Gaussian prior penalty.
    #[arg(long, default_value_t = 1.0)]
    pub prior_lambda: f64,
    /// Mean of the Gaussian prior on ξ (comma separated; zeros by default).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub prior_mean: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub prior_scale: f64,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Credible level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Summary JSON (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of all draws with a convergence flag.
    #[arg(long)]
    pub draws_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuneArgs {
    /// Data for the pilot fit.
    #[command(flatten)]
    pub input: DataArgs,
    /// Pilot ξ given directly instead of fitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pilot_xi: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: TuningKind,
    #[arg(long, default_value_t = AUTO_ARE_TARGET)]
    pub target: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON study description; desk-scale defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SifArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Draws CSV written by `fit --draws-out`, used instead of refitting.
    #[arg(long, conflicts_with_all = ["data", "sample_n"])]
    pub from_draws: Option<PathBuf>,
    /// Sample size behind `--from-draws`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Simulate this many observations from vMF(η) instead of reading data.
    #[arg(long, conflicts_with = "data")]
    pub sample_n: Option<usize>,
    #[arg(long = "loss", default_value = "kl")]
    pub loss: LossRequest,
    /// Parameter of the data-generating law; the KL fit of the data when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eta: Option<Vec<f64>>,
    /// Equally spaced probes on the circle.
    #[arg(long, default_value_t = 36)]
    pub probes: usize,
    /// Probe locations as unit vectors, one per row (any dimension).
    #[arg(long)]
    pub probe_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub draws: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SampleArgs {
    /// Natural parameter ξ = κμ, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub xi: Vec<f64>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// unit_vectors or angles_radians.
    #[arg(long, value_enum, default_value = "unit_vectors")]
    pub format: InputFormat,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_kind(s: &str) -> std::result::Result<TuningKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn configure_threads(threads: Option<usize>) {
    if let Some(t) = threads.filter(|&t| t > 0) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads);
    let timing = !cli.no_timing;
    match cli.command {
        Command::Fit(a) => cmd_fit(&a, timing).map(|_| ()),
        Command::Tune(a) => cmd_tune(&a, timing).map(|_| ()),
        Command::Simulate(a) => cmd_simulate(&a, timing).map(|_| ()),
        Command::Sif(a) => cmd_sif(&a, timing).map(|_| ()),
        Command::Sample(a) => cmd_sample(&a, timing),
    }
}

/// Entry point for the binary: parses `args`, runs, and maps errors to exit codes.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_grammar() {
        assert_eq!("kl".parse::<LossRequest>().unwrap(), LossRequest::Fixed(LossSpec::Kl));
        assert_eq!("DPD:auto".parse::<LossRequest>().unwrap(), LossRequest::Auto(TuningKind::Dpd));
        assert_eq!("gamma:0.2".parse::<LossRequest>().unwrap(), LossRequest::Fixed(LossSpec::Gamma { gamma: 0.2 }));
        assert!("kl:auto".parse::<LossRequest>().is_err());
        assert!("dpd:-1".parse::<LossRequest>().is_err());
        for s in ["kl", "dpd:auto", "gamma:0.5"] {
            assert_eq!(s.parse::<LossRequest>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn bad_flags_exit_with_input_status() {
        assert_eq!(main_with(["robvmf", "sample", "--n", "3"]), 2);
        assert_eq!(main_with(["robvmf", "fit", "--loss", "huber"]), 2);
    }
}
