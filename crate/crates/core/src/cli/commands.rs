use std::fs::File;
use std::hint::black_box;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::args::{BenchArgs, Command, Common, Format, SynthArgs};
use super::{CliError, CliResult};
use crate::baselines::{baseline_forecast, parse_baseline, BaselineSpec};
use crate::datasets::{
    builtin_descriptor, builtin_descriptors, generate_synthetic, load_csv, parse_duration_secs, parse_slots,
    parse_timestamp, rolling_evaluate, training_values, write_frame_csv, CsvSeries, DatasetDescriptor, Evaluation,
    Method, RecordWriter, RecordWriterOptions, SchemeRecipe, SeriesFrame, StepOutput, SynthSpec,
};
use crate::decomposition::{contingency_constant, default_contingency_floor, QbsdConfig};
use crate::engine::{min_capacity, RollingForecaster};
use crate::error::QbsdError;
use crate::metrics::{wilcoxon_signed_rank, Alternative};
use crate::smoothing::SmootherSpec;
use crate::timegrid::{align, Granularity, SlotCoord};

const DEFAULT_THRESHOLD: f64 = 3.0;
const DEFAULT_METHODS: &str = "qbsd,seasonal-naive";
const DEFAULT_TRAIN_WINDOW: &str = "28d";
/// Contingency constant for streaming runs, which see no training data.
const STREAM_DEFAULT_C: f64 = 1.0;

pub fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Evaluate(c) => cmd_evaluate(&c),
        Command::Forecast(c) => cmd_stream(&c, None),
        Command::Anomaly(c) => {
            let t = c.threshold.unwrap_or(DEFAULT_THRESHOLD);
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config(format!("--threshold must be positive, got {t}")));
            }
            cmd_stream(&c, Some(t))
        }
        Command::Bench(b) => cmd_bench(&b),
        Command::Synth(s) => cmd_synth(&s),
    }
}

fn inputs(c: &Common) -> Vec<PathBuf> {
    c.input
        .as_deref()
        .map(|s| s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(PathBuf::from).collect())
        .unwrap_or_default()
}

fn base_descriptor(c: &Common) -> CliResult<Option<DatasetDescriptor>> {
    let Some(name) = c.dataset.as_deref() else { return Ok(None) };
    builtin_descriptor(name).map(Some).ok_or_else(|| {
        let known: Vec<String> = builtin_descriptors().into_iter().map(|d| d.name).collect();
        CliError::config(format!("--dataset: unknown dataset `{name}` (known: {})", known.join(", ")))
    })
}

fn granularity(c: &Common, base: Option<&DatasetDescriptor>) -> CliResult<Granularity> {
    match (&c.interval, base) {
        (Some(raw), _) => {
            let secs = parse_duration_secs(raw).map_err(|e| CliError::config(format!("--interval: {e}")))?;
            let secs = u32::try_from(secs).map_err(|_| CliError::config(format!("--interval: `{raw}` is too long")))?;
            Granularity::new(secs).map_err(|e| CliError::config(format!("--interval: {e}")))
        }
        (None, Some(d)) => Ok(d.granularity),
        (None, None) => Ok(Granularity::QUARTER_HOURLY),
    }
}

fn columns(c: &Common, base: Option<&DatasetDescriptor>) -> (String, String) {
    let ts = c
        .timestamp_column
        .clone()
        .or_else(|| base.map(|d| d.timestamp_column.clone()))
        .unwrap_or_else(|| "timestamp".into());
    let val = c
        .value_column
        .clone()
        .or_else(|| base.map(|d| d.target_column.clone()))
        .unwrap_or_else(|| "value".into());
    (ts, val)
}

fn default_k(g: Granularity) -> u32 {
    // one hour of context where the grid allows it
    3600 / g.interval_seconds()
}

fn ts_flag(name: &str, raw: &str) -> CliResult<i64> {
    parse_timestamp(raw).ok_or_else(|| CliError::config(format!("--{name}: unparseable timestamp `{raw}`")))
}

fn flag(name: &'static str) -> impl Fn(QbsdError) -> CliError {
    move |e| CliError::config(format!("--{name}: {e}"))
}

/// Dataset descriptor after flag overrides. `frame` supplies default test
/// bounds when there is no built-in dataset.
fn resolve_descriptor(c: &Common, frame: Option<&SeriesFrame>) -> CliResult<DatasetDescriptor> {
    let base = base_descriptor(c)?;
    let g = granularity(c, base.as_ref())?;
    let (ts_col, val_col) = columns(c, base.as_ref());

    let k = match &c.k {
        Some(raw) => {
            let k = parse_slots(raw, g).map_err(flag("k"))?;
            u32::try_from(k).map_err(|_| CliError::config(format!("--k: `{raw}` is too large")))?
        }
        None => base.as_ref().filter(|d| d.granularity == g).map_or(default_k(g), |d| d.k_slots),
    };
    let recipe: SchemeRecipe = match &c.scheme {
        Some(raw) => raw.parse().map_err(flag("scheme"))?,
        None => base.as_ref().map_or(SchemeRecipe::Weekly(4), |d| d.recipe.clone()),
    };
    let train_window_slots = match &c.train_window {
        Some(raw) => parse_slots(raw, g).map_err(flag("train-window"))?,
        None => match base.as_ref().filter(|d| d.granularity == g) {
            Some(d) => d.train_window_slots,
            None => parse_slots(DEFAULT_TRAIN_WINDOW, g).map_err(flag("train-window"))?,
        },
    };
    let scheme = recipe.build(k, g).map_err(flag("scheme"))?;

    let test_start = match (&c.test_start, &base, frame) {
        (Some(raw), _, _) => ts_flag("test-start", raw)?,
        (None, Some(d), _) => d.test_start,
        (None, None, Some(f)) => {
            let first = f.first_slot().ok_or_else(|| CliError::data("input series is empty"))?;
            SlotCoord::new(first.global_slot() + train_window_slots).epoch_seconds(g)
        }
        (None, None, None) => 0,
    };
    let test_end = match (&c.test_end, &base, frame) {
        (Some(raw), _, _) => ts_flag("test-end", raw)?,
        (None, Some(d), _) => d.test_end,
        (None, None, Some(f)) => f.last_slot().map_or(test_start, |s| s.epoch_seconds(g)),
        (None, None, None) => test_start,
    };
    let desc = DatasetDescriptor {
        name: base.as_ref().map_or_else(|| "custom".to_owned(), |d| d.name.clone()),
        granularity: g,
        timestamp_column: ts_col,
        target_column: val_col,
        train_window_slots,
        k_slots: k,
        recipe,
        scheme,
        test_start,
        test_end,
    };
    desc.validate()?;
    Ok(desc)
}

fn smoother(c: &Common) -> CliResult<SmootherSpec> {
    match &c.smoother {
        Some(raw) => raw.parse().map_err(|e: QbsdError| CliError::config(format!("--smoother: {e}"))),
        None => Ok(SmootherSpec::None),
    }
}

fn parse_methods(c: &Common, g: Granularity) -> CliResult<Vec<String>> {
    let raw = c.method.as_deref().unwrap_or(DEFAULT_METHODS);
    let names: Vec<String> = raw.split(',').map(|m| m.trim().to_owned()).filter(|m| !m.is_empty()).collect();
    if names.is_empty() {
        return Err(CliError::config("--method: no methods given"));
    }
    for m in &names {
        if m != "qbsd" {
            parse_baseline(m, g).map_err(|e| CliError::config(format!("--method: {e}")))?;
        }
    }
    Ok(names)
}

fn contingency(c: &Common, train: &[f64]) -> CliResult<f64> {
    if let Some(v) = c.c {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::config(format!("--c must be positive, got {v}")));
        }
        return Ok(v);
    }
    let floor = c.c_floor.unwrap_or_else(|| default_contingency_floor(train));
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(CliError::config(format!("--c-floor must be positive, got {floor}")));
    }
    if train.is_empty() {
        return Err(CliError::data("no training data before the test range to derive the contingency constant"));
    }
    Ok(contingency_constant(train, floor)?)
}

fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// Output path for one of several inputs: `<dir>/<stem>.csv`.
fn per_input_output(dir: Option<&Path>, input: &Path, several: bool) -> CliResult<Option<PathBuf>> {
    if !several {
        return Ok(dir.map(Path::to_path_buf));
    }
    let Some(dir) = dir else { return Ok(None) };
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let stem = input.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned());
    Ok(Some(dir.join(format!("{stem}.csv"))))
}

fn thread_pool(c: &Common) -> CliResult<rayon::ThreadPool> {
    let n = c.parallel.unwrap_or(1);
    if n == 0 {
        return Err(CliError::config("--parallel must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::config(format!("--parallel: {e}")))
}

#[derive(Debug, Clone, Serialize)]
struct SummaryRow {
    series: String,
    method: String,
    n: usize,
    skipped: usize,
    mae: f64,
    rmse: f64,
    mape: f64,
    mape_excluded: usize,
    r2: Option<f64>,
    /// One-sided Wilcoxon p-value that QBSD errors are smaller.
    p_value: Option<f64>,
}

fn load_series(c: &Common, path: Option<&Path>) -> CliResult<SeriesFrame> {
    let base = base_descriptor(c)?;
    let g = granularity(c, base.as_ref())?;
    match path {
        Some(p) => {
            let (ts, val) = columns(c, base.as_ref());
            load_csv(p, &ts, &val, g).map_err(|e| match e {
                QbsdError::Io { .. } => CliError::data(e.to_string()),
                other => CliError::data(format!("{}: {other}", p.display())),
            })
        }
        None if c.dataset.as_deref() == Some("synthetic") => {
            let spec = SynthSpec { seed: c.seed.unwrap_or(0), ..SynthSpec::default() };
            Ok(generate_synthetic(&spec)?)
        }
        None => Err(CliError::config("--input is required (only --dataset synthetic can run without one)")),
    }
}

fn evaluate_one(c: &Common, path: Option<&Path>, out: Option<PathBuf>) -> CliResult<Vec<SummaryRow>> {
    let frame = load_series(c, path)?;
    let desc = resolve_descriptor(c, Some(&frame))?;
    let g = desc.granularity;
    let train = training_values(&frame, &desc)?;
    let cval = contingency(c, &train)?;
    let series = path.map_or_else(|| desc.name.clone(), |p| p.display().to_string());

    let mut evals: Vec<Evaluation> = Vec::new();
    for name in parse_methods(c, g)? {
        let method = if name == "qbsd" {
            Method::Qbsd(QbsdConfig::with_default_min_samples(desc.scheme.clone(), cval)?)
        } else {
            Method::Baseline(parse_baseline(&name, g)?)
        };
        let ev = rolling_evaluate(&frame, &method, &desc).map_err(|e| CliError::data(format!("{series}: {}: {e}", method.name())))?;
        evals.push(ev);
    }

    if let Some(path) = &out {
        let ev = evals.iter().find(|e| e.method == "qbsd").unwrap_or(&evals[0]);
        let opts = RecordWriterOptions { smoother: smoother(c)?, anomaly_threshold: c.threshold };
        let mut w = RecordWriter::new(open_output(Some(path))?, opts)?;
        for r in &ev.records {
            let (fo, res) = match r.output {
                Some(StepOutput::Qbsd(o)) => (Some(o.forecast), Some(o.residuals)),
                Some(StepOutput::Baseline { forecast }) => {
                    // baselines carry no bounds; reuse the record layout with forecast only
                    let fo = crate::decomposition::ForecastOutput {
                        forecast,
                        q1: f64::NAN,
                        q3: f64::NAN,
                        iqr: f64::NAN,
                        sample_count: 0,
                        fallback_used: false,
                    };
                    (Some(fo), None)
                }
                None => (None, None),
            };
            w.write(r.timestamp, Some(r.actual), fo, res)?;
        }
        w.finish()?
            .flush()
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }

    let qbsd_errors = evals.iter().find(|e| e.method == "qbsd").map(Evaluation::abs_errors);
    Ok(evals
        .iter()
        .map(|ev| {
            let p_value = match (&qbsd_errors, ev.method.as_str()) {
                (Some(q), m) if m != "qbsd" => paired_p(q, &ev.abs_errors()),
                _ => None,
            };
            SummaryRow {
                series: series.clone(),
                method: ev.method.clone(),
                n: ev.report.n,
                skipped: ev.skipped,
                mae: ev.report.mae,
                rmse: ev.report.rmse,
                mape: ev.report.mape,
                mape_excluded: ev.report.mape_excluded_count,
                r2: ev.report.r2,
                p_value,
            }
        })
        .collect())
}

/// Wilcoxon p-value over slots scored by both methods.
fn paired_p(qbsd: &[(SlotCoord, f64)], other: &[(SlotCoord, f64)]) -> Option<f64> {
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut j = 0;
    for &(slot, e) in qbsd {
        while j < other.len() && other[j].0 < slot {
            j += 1;
        }
        if j < other.len() && other[j].0 == slot {
            a.push(e);
            b.push(other[j].1);
        }
    }
    wilcoxon_signed_rank(&a, &b, Alternative::Less).ok()
}

fn cmd_evaluate(c: &Common) -> CliResult {
    let paths = inputs(c);
    let several = paths.len() > 1;
    let rows: Vec<SummaryRow> = if paths.is_empty() {
        evaluate_one(c, None, c.output.clone())?
    } else {
        let jobs = paths
            .iter()
            .map(|p| Ok((p, per_input_output(c.output.as_deref(), p, several)?)))
            .collect::<CliResult<Vec<_>>>()?;
        let results: Vec<CliResult<Vec<SummaryRow>>> =
            thread_pool(c)?.install(|| jobs.into_par_iter().map(|(p, out)| evaluate_one(c, Some(p), out)).collect());
        let mut rows = Vec::new();
        for r in results {
            rows.extend(r?);
        }
        rows
    };
    if let Some(path) = &c.report {
        let json = serde_json::to_string_pretty(&rows).expect("summary rows serialize");
        std::fs::write(path, json + "\n").map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    print_summary(&rows, c.format.unwrap_or_default())
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.prec$}"))
}

fn print_summary(rows: &[SummaryRow], format: Format) -> CliResult {
    let mut out = io::stdout().lock();
    let io_err = |e: io::Error| CliError::data(format!("<stdout>: {e}"));
    match format {
        Format::Json => {
            let json = serde_json::to_string_pretty(rows).expect("summary rows serialize");
            writeln!(out, "{json}").map_err(io_err)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["series", "method", "n", "skipped", "mae", "rmse", "mape", "mape_excluded", "r2", "p_value"])
                .map_err(|e| CliError::data(e.to_string()))?;
            for r in rows {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                w.write_record([
                    r.series.clone(),
                    r.method.clone(),
                    r.n.to_string(),
                    r.skipped.to_string(),
                    r.mae.to_string(),
                    r.rmse.to_string(),
                    r.mape.to_string(),
                    r.mape_excluded.to_string(),
                    opt(r.r2),
                    opt(r.p_value),
                ])
                .map_err(|e| CliError::data(e.to_string()))?;
            }
            w.flush().map_err(io_err)
        }
        Format::Table => {
            let header = ["series", "method", "n", "skipped", "mae", "rmse", "mape", "r2", "p_value"];
            let body: Vec<[String; 9]> = rows
                .iter()
                .map(|r| {
                    [
                        r.series.clone(),
                        r.method.clone(),
                        r.n.to_string(),
                        r.skipped.to_string(),
                        format!("{:.4}", r.mae),
                        format!("{:.4}", r.rmse),
                        format!("{:.2}", r.mape),
                        fmt_opt(r.r2, 4),
                        if r.method == "qbsd" { "-".to_owned() } else { fmt_opt(r.p_value, 4) },
                    ]
                })
                .collect();
            let mut widths = header.map(str::len);
            for row in &body {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let line = |cells: &[String]| {
                cells
                    .iter()
                    .zip(widths)
                    .enumerate()
                    .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(out, "{}", line(&header.map(String::from))).map_err(io_err)?;
            for row in &body {
                writeln!(out, "{}", line(row)).map_err(io_err)?;
            }
            Ok(())
        }
    }
}

/// `forecast` and `anomaly`: one pass over each input, holding only the
/// retained history and the smoother window.
fn cmd_stream(c: &Common, threshold: Option<f64>) -> CliResult {
    let paths = inputs(c);
    if paths.is_empty() {
        return Err(CliError::config("--input is required"));
    }
    let opts = RecordWriterOptions { smoother: smoother(c)?, anomaly_threshold: threshold };
    let several = paths.len() > 1;
    if several && c.output.is_none() {
        return Err(CliError::config("--output must name a directory when several inputs are given"));
    }
    let jobs = paths
        .iter()
        .map(|p| Ok((p, per_input_output(c.output.as_deref(), p, several)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let results: Vec<CliResult<(usize, usize, usize)>> =
        thread_pool(c)?.install(|| jobs.into_par_iter().map(|(p, out)| stream_one(c, p, out.as_deref(), opts)).collect());
    for (p, r) in paths.iter().zip(results) {
        let (rows, scored, flagged) = r?;
        if threshold.is_some() {
            let msg = format!("{}: {flagged} anomalies in {scored} scored rows ({rows} rows)", p.display());
            if c.output.is_some() {
                println!("{msg}");
            } else {
                eprintln!("{msg}");
            }
        }
    }
    Ok(())
}

fn stream_one(c: &Common, path: &Path, out: Option<&Path>, opts: RecordWriterOptions) -> CliResult<(usize, usize, usize)> {
    let desc = resolve_descriptor(c, None)?;
    let g = desc.granularity;
    let cval = match (c.c, c.c_floor) {
        (Some(v), _) | (None, Some(v)) => v,
        (None, None) => STREAM_DEFAULT_C,
    };
    let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), cval)?;
    let capacity = desc.train_window_slots.max(min_capacity(&cfg));
    let mut forecaster = RollingForecaster::with_capacity(cfg, g, capacity)?;

    let rows = CsvSeries::open(path, &desc.timestamp_column, &desc.target_column, g)?;
    let mut writer = RecordWriter::new(open_output(out)?, opts)?;
    let span = desc.scheme.span();
    let mut first: Option<u64> = None;
    let mut last: Option<SlotCoord> = None;
    let mut scored = 0;
    for row in rows {
        let row = row.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if let Some(prev) = last {
            if row.slot <= prev {
                let what = if row.slot == prev { "duplicate" } else { "out-of-order" };
                return Err(CliError::data(format!(
                    "{}: row {}: {what} timestamp {} (input must be sorted)",
                    path.display(),
                    row.line,
                    row.timestamp
                )));
            }
        }
        last = Some(row.slot);
        let ts = row.slot.epoch_seconds(g);
        // no forecasts until the history covers one full scheme span
        let start = *first.get_or_insert(row.slot.global_slot());
        if row.slot.global_slot() < start + span {
            if let Some(v) = row.value {
                forecaster.insert(row.slot, v)?;
            }
            writer.write(ts, row.value, None, None)?;
            continue;
        }
        let not_ready = |e: &QbsdError| matches!(e, QbsdError::InsufficientHistory { .. } | QbsdError::InsufficientSpan { .. });
        match row.value {
            Some(v) => match forecaster.observe(row.slot, v) {
                Ok(obs) => {
                    scored += 1;
                    writer.write(ts, Some(v), Some(obs.forecast), Some(obs.residuals))?;
                }
                Err(e) if not_ready(&e) => writer.write(ts, Some(v), None, None)?,
                Err(e) => return Err(CliError::data(format!("{}: row {}: {e}", path.display(), row.line))),
            },
            None => match forecaster.forecast_at(row.slot) {
                Ok(fo) => writer.write(ts, None, Some(fo), None)?,
                Err(e) if not_ready(&e) => writer.write(ts, None, None, None)?,
                Err(e) => return Err(CliError::data(format!("{}: row {}: {e}", path.display(), row.line))),
            },
        }
    }
    let rows = writer.rows() + writer.pending();
    // the last rows are only flagged once the smoother drains
    let (mut sink, flagged) = writer.finish_counted()?;
    sink.flush()
        .map_err(|e| CliError::data(format!("{}: {e}", out.map_or("<stdout>".into(), |p| p.display().to_string()))))?;
    Ok((rows, scored, flagged))
}

#[derive(Debug, Clone, Serialize)]
struct BenchRow {
    method: String,
    buffer_weeks: u32,
    forecasts: usize,
    median_us: f64,
    p95_us: f64,
}

fn percentile_us(sorted_ns: &[u128], p: f64) -> f64 {
    let idx = ((sorted_ns.len() - 1) as f64 * p).round() as usize;
    sorted_ns[idx] as f64 / 1000.0
}

fn summarize(method: String, buffer_weeks: u32, mut ns: Vec<u128>) -> BenchRow {
    ns.sort_unstable();
    BenchRow {
        method,
        buffer_weeks,
        forecasts: ns.len(),
        median_us: percentile_us(&ns, 0.5),
        p95_us: percentile_us(&ns, 0.95),
    }
}

/// Published per-prediction timings of a reference implementation,
/// training included.
const REFERENCE_MS: [(&str, f64); 6] = [
    ("Births2015", 14.3),
    ("Electricity Demand", 13.2),
    ("Bitcoin", 13.6),
    ("Electricity", 16.4),
    ("Weather", 21.5),
    ("EON1-Cell-F", 8.72),
];

/// Time `observe` for `n` consecutive slots after a warm history of
/// `warm_days` days, with `buffer_weeks` of retained history.
pub(crate) fn time_qbsd(cfg: &QbsdConfig, series: &SeriesFrame, warm: usize, n: usize, buffer_weeks: u32) -> crate::Result<Vec<u128>> {
    let g = series.granularity();
    let mut f = RollingForecaster::with_capacity(cfg.clone(), g, u64::from(buffer_weeks) * g.slots_per_week())?;
    f.ingest_history(&series.points()[..warm])?;
    let mut out = Vec::with_capacity(n);
    for &(slot, v) in &series.points()[warm..warm + n] {
        let t0 = Instant::now();
        let obs = f.observe(slot, v);
        out.push(t0.elapsed().as_nanos());
        black_box(obs)?;
    }
    Ok(out)
}

fn cmd_bench(b: &BenchArgs) -> CliResult {
    let c = &b.common;
    let n = b.forecasts;
    if n == 0 {
        return Err(CliError::config("--forecasts must be at least 1"));
    }
    let base = base_descriptor(c)?;
    let g = granularity(c, base.as_ref())?;
    let desc = resolve_descriptor(c, None)?;
    let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), c.c.unwrap_or(STREAM_DEFAULT_C))?;
    let methods = c.method.clone().unwrap_or_else(|| "qbsd,seasonal-naive,persistence,moving-average".into());
    let methods = parse_methods(&Common { method: Some(methods), ..Common::default() }, g)?;

    let warm_weeks = 16u64.max(cfg.scheme().span().div_ceil(g.slots_per_week()) + 1);
    let warm = (warm_weeks * g.slots_per_week()) as usize;
    let days = (warm + n).div_ceil(g.slots_per_day() as usize) as u32;
    let spec = SynthSpec {
        granularity: g,
        days,
        noise_std: 20.0,
        seed: c.seed.unwrap_or(0),
        ..SynthSpec::default()
    };
    let series = generate_synthetic(&spec)?;

    let mut rows = Vec::new();
    let mut qbsd_medians = Vec::new();
    for name in &methods {
        if name == "qbsd" {
            for weeks in [4u32, 16] {
                let weeks = weeks.max(cfg.scheme().span().div_ceil(g.slots_per_week()) as u32 + 1);
                let row = summarize("qbsd".into(), weeks, time_qbsd(&cfg, &series, warm, n, weeks)?);
                qbsd_medians.push(row.median_us);
                rows.push(row);
            }
        } else {
            let spec: BaselineSpec = parse_baseline(name, g)?;
            let weeks = 16u32;
            let capacity = (u64::from(weeks) * g.slots_per_week()).max(spec.lookback() + 1);
            let mut f = RollingForecaster::with_capacity(cfg.clone(), g, capacity)?;
            f.ingest_history(&series.points()[..warm])?;
            let mut ns = Vec::with_capacity(n);
            for &(slot, v) in &series.points()[warm..warm + n] {
                let t0 = Instant::now();
                let fc = baseline_forecast(&f, slot, &spec);
                f.insert(slot, v)?;
                ns.push(t0.elapsed().as_nanos());
                black_box(fc)?;
            }
            rows.push(summarize(spec.name(), weeks, ns));
        }
    }
    let ratio = match qbsd_medians.as_slice() {
        [a, b] if *a > 0.0 => Some(b / a),
        _ => None,
    };

    let mut out = io::stdout().lock();
    let io_err = |e: io::Error| CliError::data(format!("<stdout>: {e}"));
    match c.format.unwrap_or_default() {
        Format::Json => {
            let refs: Vec<_> = REFERENCE_MS
                .iter()
                .map(|(d, ms)| serde_json::json!({"dataset": d, "ms": ms}))
                .collect();
            let doc = serde_json::json!({
                "rows": rows,
                "qbsd_16w_over_4w_median_ratio": ratio,
                "reference_ms_per_prediction": refs,
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("bench rows serialize")).map_err(io_err)?;
        }
        Format::Csv => {
            writeln!(out, "method,buffer_weeks,forecasts,median_us,p95_us").map_err(io_err)?;
            for r in &rows {
                writeln!(out, "{},{},{},{},{}", r.method, r.buffer_weeks, r.forecasts, r.median_us, r.p95_us)
                    .map_err(io_err)?;
            }
        }
        Format::Table => {
            writeln!(out, "{:<22} {:>7} {:>9} {:>11} {:>11}", "method", "buffer", "forecasts", "median_us", "p95_us")
                .map_err(io_err)?;
            for r in &rows {
                writeln!(
                    out,
                    "{:<22} {:>6}w {:>9} {:>11.3} {:>11.3}",
                    r.method, r.buffer_weeks, r.forecasts, r.median_us, r.p95_us
                )
                .map_err(io_err)?;
            }
            if let Some(r) = ratio {
                writeln!(out, "qbsd median ratio 16w/4w: {r:.3}").map_err(io_err)?;
            }
            writeln!(out, "reference per-prediction timings (interpreted implementation, training included):").map_err(io_err)?;
            for (d, ms) in REFERENCE_MS {
                writeln!(out, "  {d:<20} {ms} ms").map_err(io_err)?;
            }
        }
    }
    Ok(())
}

fn parse_anomalies(raw: &str) -> CliResult<Vec<(u64, f64)>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = || CliError::config(format!("--anomalies: `{item}` must look like INDEX:MAGNITUDE"));
            let (i, m) = item.split_once(':').ok_or_else(bad)?;
            Ok((i.trim().parse().map_err(|_| bad())?, m.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn parse_gaps(raw: &str) -> CliResult<Vec<(u64, u64)>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let bad = || CliError::config(format!("--gaps: `{item}` must look like FROM-TO"));
            let (a, b) = item.split_once('-').ok_or_else(bad)?;
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a >= b {
                return Err(bad());
            }
            Ok((a, b))
        })
        .collect()
}

fn cmd_synth(s: &SynthArgs) -> CliResult {
    let c = &s.common;
    let g = granularity(c, None)?;
    let seed = c.seed.unwrap_or(0);
    let defaults = SynthSpec::default();
    let start_epoch = match &s.start {
        Some(raw) => ts_flag("start", raw)?,
        None => defaults.start_epoch,
    };
    align(start_epoch, g).map_err(|e| CliError::config(format!("--start: {e}")))?;
    if !(s.noise >= 0.0 && s.noise.is_finite()) {
        return Err(CliError::config(format!("--noise must be >= 0, got {}", s.noise)));
    }
    let spec = SynthSpec {
        start_epoch,
        days: s.days,
        granularity: g,
        noise_std: s.noise,
        anomalies: s.anomalies.as_deref().map(parse_anomalies).transpose()?.unwrap_or_default(),
        gaps: s.gaps.as_deref().map(parse_gaps).transpose()?.unwrap_or_default(),
        seed,
        ..defaults
    };
    let frame = generate_synthetic(&spec)?;
    let mut out = open_output(c.output.as_deref())?;
    write_frame_csv(&frame, &mut out)?;
    out.flush().map_err(|e| CliError::data(format!("{}: {e}", c.output.as_deref().map_or("<stdout>".into(), |p| p.display().to_string()))))?;
    eprintln!("seed {seed}: {} rows, {} injected anomalies", frame.len(), spec.anomalies.len());
    Ok(())
}
