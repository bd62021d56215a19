use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "qbsd", version, about = "Rolling seasonal forecasts with quartile operating bounds")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score QBSD and baselines on a dataset with a moving training window.
    Evaluate(Common),
    /// Stream per-timestamp forecasts and bounds for a CSV series.
    Forecast(Common),
    /// Like `forecast`, plus an anomaly flag and a count of flagged rows.
    Anomaly(Common),
    /// Measure per-forecast latency.
    Bench(BenchArgs),
    /// Write a synthetic cell-KPI-like series.
    Synth(SynthArgs),
}

impl Command {
    pub const NAMES: [&'static str; 5] = ["evaluate", "forecast", "anomaly", "bench", "synth"];

    pub fn common(&self) -> &Common {
        match self {
            Command::Evaluate(c) | Command::Forecast(c) | Command::Anomaly(c) => c,
            Command::Bench(b) => &b.common,
            Command::Synth(s) => &s.common,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// File of `key = value` lines using the long flag names; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV; several may be given, comma separated.
    #[arg(long)]
    pub input: Option<String>,
    /// Output file, or a directory when there are several inputs.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Built-in dataset descriptor (births2015, eon1-cell-f, synthetic, ...).
    #[arg(long)]
    pub dataset: Option<String>,
    /// Comma list of qbsd, seasonal-naive[:slots], persistence, moving-average[:slots].
    #[arg(long)]
    pub method: Option<String>,
    /// Context period: slots, or a duration such as `1h` or `2d`.
    #[arg(long)]
    pub k: Option<String>,
    /// weekly4, weekly6, weekly_plus_yearly or custom:7d/sym,14d/fwd,...
    #[arg(long)]
    pub scheme: Option<String>,
    /// Contingency constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// Floor for the contingency constant derived from training data.
    #[arg(long)]
    pub c_floor: Option<f64>,
    /// none, sg:WINDOW:POLYORDER or ma:WINDOW.
    #[arg(long)]
    pub smoother: Option<String>,
    /// Anomaly threshold on |normalized residual|.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads across inputs.
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Grid interval for inputs without a dataset, e.g. `900`, `15m`, `1h`.
    #[arg(long)]
    pub interval: Option<String>,
    #[arg(long)]
    pub timestamp_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,
    /// Trailing history visible to each forecast: slots or a duration.
    #[arg(long)]
    pub train_window: Option<String>,
    #[arg(long)]
    pub test_start: Option<String>,
    #[arg(long)]
    pub test_end: Option<String>,
    /// Write the metrics summary as JSON to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: Common,
    /// Timed forecasts per row.
    #[arg(long, default_value_t = 10_000)]
    pub forecasts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 56)]
    pub days: u32,
    /// Gaussian noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Injections as `INDEX:MAGNITUDE`, comma separated, e.g. `3000:+500`.
    #[arg(long)]
    pub anomalies: Option<String>,
    /// Omitted slot-index ranges as `FROM-TO` (end exclusive), comma separated.
    #[arg(long)]
    pub gaps: Option<String>,
    /// First timestamp.
    #[arg(long)]
    pub start: Option<String>,
}

/// Turn `key = value` lines into `--key value` arguments.
pub fn config_file_args(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("line {}: invalid key `{}`", i + 1, key));
        }
        out.push(format!("--{key}"));
        out.push(value.trim().trim_matches('"').to_owned());
    }
    Ok(out)
}
