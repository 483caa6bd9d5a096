//! `bench`: training runs, timing summaries and splitting sweeps.
//!
//! Exit status: 0 on success, 2 when training diverges, 3 on I/O or dataset
//! failures, 1 for anything else.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use splitopt::experiment::{
    emit_metrics, parse_settings, read_metrics, reference_pair, run_experiment, splitting_study, timing_stats,
    write_metrics, write_study, ExperimentConfig, ExperimentError, StudyScheme,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "bench", version, about = "Sequential-splitting optimizer benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an MLP and write per-epoch metrics as CSV.
    Run(Box<RunArgs>),
    /// Summarise the epoch_time_s column of a metrics CSV.
    Timing {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output table (CSV); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-step splitting defects for halving step sizes.
    SplittingStudy {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        h0: f64,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        /// Use Strang instead of Lie splitting.
        #[arg(long)]
        strang: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    /// Use k·exp(−k/n) instead of a constant exponent.
    #[arg(long)]
    k_decay: bool,
    /// Constant β in [0, 1] or a schedule: `n/(n+3)`, `(n-1)/(n+2)`.
    #[arg(long)]
    momentum: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `synth[:n_per_class=..,classes=..,dim=..,separation=..]` or `idx:img,lbl,test-img,test-lbl`.
    #[arg(long)]
    dataset: Option<String>,
    /// `nll` or `xent`.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    /// `derived` or `pseudocode`.
    #[arg(long)]
    ssa1_form: Option<String>,
    /// Metrics CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn settings(&self) -> Result<BTreeMap<String, String>, Failure> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(Failure::io)?;
                parse_settings(&text).map_err(|e| Failure::other(e.into()))?
            }
            None => BTreeMap::new(),
        };
        let mut set = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                settings.insert(key.to_string(), v);
            }
        };
        set("optimizer", self.optimizer.clone());
        set("lr", self.lr.map(|v| v.to_string()));
        set("k", self.k.map(|v| v.to_string()));
        set("k-decay", self.k_decay.then(|| "true".to_string()));
        set("momentum", self.momentum.clone());
        set("epochs", self.epochs.map(|v| v.to_string()));
        set("batch-size", self.batch_size.map(|v| v.to_string()));
        set("seed", self.seed.map(|v| v.to_string()));
        set("dataset", self.dataset.clone());
        set("loss", self.loss.clone());
        set("hidden", self.hidden.map(|v| v.to_string()));
        set("rho", self.rho.map(|v| v.to_string()));
        set("eps", self.eps.map(|v| v.to_string()));
        set("beta1", self.beta1.map(|v| v.to_string()));
        set("beta2", self.beta2.map(|v| v.to_string()));
        set("ssa1-form", self.ssa1_form.clone());
        set("out", self.out.as_ref().map(|p| p.display().to_string()));
        Ok(settings)
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn io(error: anyhow::Error) -> Self {
        Failure { code: EXIT_IO, error }
    }

    fn other(error: anyhow::Error) -> Self {
        Failure {
            code: EXIT_FAILURE,
            error,
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let code = match e {
            ExperimentError::Diverged { .. } => EXIT_DIVERGED,
            ExperimentError::Io { .. } | ExperimentError::Dataset(_) => EXIT_IO,
            ExperimentError::Config(_) | ExperimentError::Numeric(_) => EXIT_FAILURE,
        };
        Failure { code, error: e.into() }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(Failure::io)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn csv_failure(path: Option<&Path>, e: impl std::error::Error + Send + Sync + 'static) -> Failure {
    let target = path.map_or_else(|| "stdout".to_string(), |p| p.display().to_string());
    Failure::io(anyhow::Error::new(e).context(format!("writing {target}")))
}

fn write_records(records: &[splitopt::experiment::MetricsRecord], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => emit_metrics(records, path).map_err(Failure::from),
        None => write_metrics(records, io::stdout().lock()).map_err(|e| csv_failure(None, e)),
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let config = ExperimentConfig::from_settings(&args.settings()?)?;
    let out = config.out.clone();
    match run_experiment(&config) {
        Ok(records) => write_records(&records, out.as_deref()),
        Err(ExperimentError::Diverged { epoch, records }) => {
            write_records(&records, out.as_deref())?;
            Err(ExperimentError::Diverged { epoch, records }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn timing(input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let records = read_metrics(input)?;
    let samples: Vec<f64> = records.iter().map(|r| r.epoch_time_s).collect();
    let stats = timing_stats(&samples)
        .map_err(|e| Failure::other(anyhow::Error::new(e).context(input.display().to_string())))?;
    stats.write_table(output(out)?).map_err(|e| csv_failure(out, e))
}

fn study(out: Option<&Path>, h0: f64, levels: usize, strang: bool) -> Result<(), Failure> {
    if !(h0 > 0.0) || levels == 0 {
        return Err(Failure::other(anyhow::anyhow!("need h0 > 0 and levels >= 1")));
    }
    let scheme = if strang { StudyScheme::Strang } else { StudyScheme::Lie };
    let rows = splitting_study(&reference_pair(), h0, levels, scheme)?;
    write_study(&rows, output(out)?).map_err(|e| csv_failure(out, e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the generic status so that 2 always means divergence.
            return if e.use_stderr() {
                ExitCode::from(EXIT_FAILURE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Timing { input, out } => timing(input, out.as_deref()),
        Command::SplittingStudy {
            out,
            h0,
            levels,
            strang,
        } => study(out.as_deref(), *h0, *levels, *strang),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("bench: {error:#}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> RunArgs {
        let cli = Cli::try_parse_from(
            std::iter::once("bench")
                .chain(std::iter::once("run"))
                .chain(args.iter().copied()),
        )
        .unwrap();
        match cli.command {
            Command::Run(args) => *args,
            _ => unreachable!(),
        }
    }

    #[test]
    fn flags_become_settings() {
        let s = run_args(&["--optimizer", "ssa1", "--k", "3", "--k-decay", "--batch-size", "8"])
            .settings()
            .ok()
            .unwrap();
        assert_eq!(s["optimizer"], "ssa1");
        assert_eq!(s["k"], "3");
        assert_eq!(s["k-decay"], "true");
        assert_eq!(s["batch-size"], "8");
        assert!(!s.contains_key("lr"));
    }

    #[test]
    fn config_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.cfg");
        std::fs::write(&cfg, "optimizer = sgd\nlr = 0.5\nseed = 4\n").unwrap();
        let s = run_args(&["--config", cfg.to_str().unwrap(), "--lr", "0.2"])
            .settings()
            .ok()
            .unwrap();
        assert_eq!(
            (s["optimizer"].as_str(), s["lr"].as_str(), s["seed"].as_str()),
            ("sgd", "0.2", "4")
        );
    }

    #[test]
    fn missing_config_is_an_io_failure() {
        let err = run_args(&["--config", "/nonexistent/c.cfg"]).settings().err().unwrap();
        assert_eq!(err.code, EXIT_IO);
    }
}
