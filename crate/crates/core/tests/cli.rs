use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qbsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbsd")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).display().to_string();
    let mut args = vec!["synth", "--output", &path];
    args.extend_from_slice(extra);
    let o = qbsd(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn csv_rows(path: &str) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn header(path: &str) -> Vec<String> {
    csv::Reader::from_path(path).unwrap().headers().unwrap().iter().map(String::from).collect()
}

#[test]
fn evaluate_builtin_synthetic() {
    let o = qbsd(&["evaluate", "--dataset", "synthetic", "--method", "qbsd,seasonal-naive"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].contains("p_value"));
    let qbsd_row = lines.iter().find(|l| l.contains(" qbsd ")).unwrap();
    assert!(qbsd_row.contains(" 0.00 "), "{qbsd_row}");
    assert!(lines.iter().any(|l| l.contains("seasonal-naive:672")));
}

#[test]
fn evaluate_json_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "s.csv", &["--noise", "15", "--seed", "2"]);
    let report = dir.path().join("r.json").display().to_string();
    let records = dir.path().join("rec.csv").display().to_string();
    let o = qbsd(&[
        "evaluate", "--input", &input, "--k", "1h", "--method", "qbsd,seasonal-naive,persistence",
        "--format", "json", "--report", &report, "--output", &records,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["method"], "qbsd");
    assert!(rows[0]["p_value"].is_null());
    let p = rows[2]["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(fs::read_to_string(&report).unwrap().trim(), stdout(&o).trim());
    // 8 weeks minus the 4-week window
    assert_eq!(csv_rows(&records).len(), 28 * 96);
}

#[test]
fn missing_input_is_a_data_error() {
    let o = qbsd(&["evaluate", "--input", "/no/such/dir/series.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/dir/series.csv"));
}

#[test]
fn bad_flags_are_config_errors() {
    for args in [
        &["evaluate", "--dataset", "nope"][..],
        &["evaluate", "--dataset", "synthetic", "--scheme", "monthly"],
        &["evaluate", "--dataset", "synthetic", "--method", "prophet"],
        &["forecast", "--input", "x.csv", "--smoother", "sg:4:2"],
        &["evaluate", "--frobnicate"],
    ] {
        let o = qbsd(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn malformed_row_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "timestamp,value\n2023-04-01T00:00:00,1\n2023-04-01T00:15:00,abc\n").unwrap();
    let o = qbsd(&["forecast", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("row 3") && err.contains("value"), "{err}");

    fs::write(&path, "timestamp,value\n2023-04-01T00:07:00,1\n").unwrap();
    let o = qbsd(&["forecast", "--input", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn forecast_warmup_rows_are_empty() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "s.csv", &[]);
    let out = dir.path().join("f.csv").display().to_string();
    let o = qbsd(&["forecast", "--input", &input, "--output", &out, "--k", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 56 * 96);
    // three weeks of warm-up before the first full subset
    assert!(rows[..21 * 96].iter().all(|r| r[2].is_empty()));
    assert!(rows[21 * 96..].iter().all(|r| !r[2].is_empty()));
}

#[test]
fn forecast_with_smoother_adds_columns() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth(dir.path(), "s.csv", &["--noise", "5"]);
    let out = dir.path().join("f.csv").display().to_string();
    let o = qbsd(&["forecast", "--input", &input, "--output", &out, "--smoother", "sg:11:3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h = header(&out);
    assert_eq!(&h[10..], ["q1_smooth", "q3_smooth"]);
    assert_eq!(csv_rows(&out).len(), 56 * 96);
}

#[test]
fn constant_input_has_zero_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let mut text = String::from("ts,v\n");
    for i in 0..(30 * 24) {
        text.push_str(&format!("{},42\n", 1_700_000_000 / 3600 * 3600 + i * 3600));
    }
    fs::write(&path, text).unwrap();
    let out = dir.path().join("f.csv").display().to_string();
    let o = qbsd(&[
        "forecast", "--input", path.to_str().unwrap(), "--output", &out, "--interval", "1h",
        "--timestamp-column", "ts", "--value-column", "v",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scored: Vec<_> = csv_rows(&out).into_iter().filter(|r| !r[7].is_empty()).collect();
    assert!(!scored.is_empty());
    assert!(scored.iter().all(|r| &r[7] == "0"));
}

#[test]
fn anomaly_flags_single_injection() {
    let dir = tempfile::tempdir().unwrap();
    let clean = synth(dir.path(), "clean.csv", &[]);
    let out = dir.path().join("a.csv").display().to_string();
    let o = qbsd(&["anomaly", "--input", &clean, "--output", &out, "--k", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(": 0 anomalies"), "{}", stdout(&o));

    // index 3000 is Thursday of week 5 at 06:00, well past warm-up
    let spiked = synth(dir.path(), "spiked.csv", &["--anomalies", "3000:+5000"]);
    let o = qbsd(&["anomaly", "--input", &spiked, "--output", &out, "--k", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains(": 1 anomalies"), "{}", stdout(&o));
    let rows = csv_rows(&out);
    let flagged: Vec<usize> = rows.iter().enumerate().filter(|(_, r)| &r[10] == "1").map(|(i, _)| i).collect();
    assert_eq!(flagged, [3000]);
}

#[test]
fn anomaly_rejects_zero_threshold() {
    let o = qbsd(&["anomaly", "--input", "whatever.csv", "--threshold", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--seed", "7", "--noise", "10"]);
    let b = synth(dir.path(), "b.csv", &["--seed", "7", "--noise", "10"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 56 * 96);

    let o = qbsd(&["synth", "--seed", "7", "--output", "/no/such/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_reports_seed_and_injection() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv").display().to_string();
    let o = qbsd(&["synth", "--output", &path, "--seed", "11", "--anomalies", "3000:+500"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("seed 11"));
    let clean = synth(dir.path(), "c.csv", &["--seed", "11"]);
    let (a, b) = (csv_rows(&clean), csv_rows(&path));
    let diffs: Vec<usize> = (0..a.len()).filter(|&i| a[i][1] != b[i][1]).collect();
    assert_eq!(diffs, [3000]);
    let d: f64 = b[3000][1].parse::<f64>().unwrap() - a[3000][1].parse::<f64>().unwrap();
    assert!((d - 500.0).abs() < 1e-9);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# evaluation defaults\ndataset = synthetic\nmethod = qbsd\nformat = csv\n").unwrap();
    let o = qbsd(&["evaluate", "--config", conf.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("series,method,"));
    assert_eq!(out.lines().count(), 2);

    let o = qbsd(&["evaluate", "--config", conf.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).trim_start().starts_with('['));

    fs::write(&conf, "no-such-flag = 1\n").unwrap();
    assert_eq!(qbsd(&["evaluate", "--config", conf.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn parallel_inputs_write_per_series_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "a.csv", &["--seed", "1", "--noise", "5"]);
    let b = synth(dir.path(), "b.csv", &["--seed", "2", "--noise", "5"]);
    let outdir = dir.path().join("out");
    let inputs = format!("{a},{b}");
    let o = qbsd(&["forecast", "--input", &inputs, "--output", outdir.to_str().unwrap(), "--parallel", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["a.csv", "b.csv"] {
        assert_eq!(csv_rows(outdir.join(name).to_str().unwrap()).len(), 56 * 96);
    }

    let o = qbsd(&["evaluate", "--input", &inputs, "--parallel", "2", "--format", "csv", "--method", "qbsd"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
}

#[test]
fn bench_reports_rows_and_ratio() {
    let o = qbsd(&["bench", "--forecasts", "2000", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    let qbsd: Vec<_> = rows.iter().filter(|r| r["method"] == "qbsd").collect();
    assert_eq!(qbsd.len(), 2);
    assert!(qbsd[0]["median_us"].as_f64().unwrap() > 0.0);
    assert!(doc["qbsd_16w_over_4w_median_ratio"].as_f64().is_some());
    let refs = doc["reference_ms_per_prediction"].as_array().unwrap();
    assert!(refs.iter().any(|r| r["ms"] == 8.72));
}
