//! Series ingestion, dataset descriptors, synthetic KPI generation and the
//! moving-training-window evaluation protocol.

mod descriptors;
mod evaluation;
mod records;
mod synth;

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};

use crate::engine::History;
use crate::error::{QbsdError, Result};
use crate::timegrid::{align, Granularity, SlotCoord};

pub use descriptors::{
    builtin_descriptor, builtin_descriptors, parse_duration_secs, parse_slots, CustomWindow, DatasetDescriptor, SchemeRecipe,
};
pub use evaluation::{rolling_evaluate, training_values, Evaluation, Method, StepOutput, StepRecord};
pub use records::{RecordWriter, RecordWriterOptions};
pub use synth::{generate_synthetic, DailyProfile, SynthSpec};

/// Ordered observations on one grid; gaps are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    granularity: Granularity,
    points: Vec<(SlotCoord, f64)>,
}

impl SeriesFrame {
    /// `points` must be strictly increasing by slot.
    pub fn new(granularity: Granularity, points: Vec<(SlotCoord, f64)>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[0].0 >= w[1].0) {
            return Err(if w[0].0 == w[1].0 {
                QbsdError::DuplicateTimestamp {
                    timestamp: w[1].0.epoch_seconds(granularity),
                    row: 0,
                }
            } else {
                QbsdError::Config("series points are not in increasing slot order".into())
            });
        }
        if let Some((_, v)) = points.iter().find(|(_, v)| !v.is_finite()) {
            return Err(QbsdError::NonFiniteValue(*v));
        }
        Ok(SeriesFrame { granularity, points })
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn points(&self) -> &[(SlotCoord, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_slot(&self) -> Option<SlotCoord> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_slot(&self) -> Option<SlotCoord> {
        self.points.last().map(|p| p.0)
    }

    pub fn get(&self, slot: SlotCoord) -> Option<f64> {
        self.points
            .binary_search_by_key(&slot, |p| p.0)
            .ok()
            .map(|i| self.points[i].1)
    }

    /// Points with `lo <= slot <= hi`.
    pub fn range(&self, lo: SlotCoord, hi: SlotCoord) -> &[(SlotCoord, f64)] {
        let start = self.points.partition_point(|p| p.0 < lo);
        let end = self.points.partition_point(|p| p.0 <= hi);
        &self.points[start..end.max(start)]
    }

    /// View exposing only slots in `lo..=hi`.
    pub fn window(&self, lo: SlotCoord, hi: SlotCoord) -> FrameWindow<'_> {
        FrameWindow { frame: self, lo, hi }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrameWindow<'a> {
    frame: &'a SeriesFrame,
    lo: SlotCoord,
    hi: SlotCoord,
}

impl History for FrameWindow<'_> {
    fn value_at(&self, slot: SlotCoord) -> Option<f64> {
        if slot < self.lo || slot > self.hi {
            return None;
        }
        self.frame.get(slot)
    }
}

/// Parse epoch seconds, RFC 3339, `YYYY-MM-DD[ T]HH:MM[:SS[.f]]` or a bare
/// date. Offsets are dropped: the wall-clock time is kept as naive local time.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local().and_utc().timestamp());
    }
    const FORMATS: [&str; 4] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"];
    for fmt in FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_timestamp(epoch_seconds: i64) -> String {
    DateTime::from_timestamp(epoch_seconds, 0)
        .map(|dt| dt.naive_utc().format("%Y-%m-%dT%H:%M:%S").to_string())
        .unwrap_or_else(|| epoch_seconds.to_string())
}

/// Row-by-row CSV reader yielding aligned `(slot, value)` pairs in file
/// order. Rows with an empty value cell are gaps and are skipped.
pub struct CsvSeries<R: Read> {
    records: csv::StringRecordsIntoIter<R>,
    ts_idx: usize,
    val_idx: usize,
    ts_col: String,
    val_col: String,
    granularity: Granularity,
}

impl CsvSeries<File> {
    pub fn open(
        path: impl AsRef<Path>,
        timestamp_column: &str,
        value_column: &str,
        granularity: Granularity,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| QbsdError::io(path, e))?;
        CsvSeries::from_reader(file, timestamp_column, value_column, granularity)
            .map_err(|e| match e {
                QbsdError::Io { message, .. } => QbsdError::io(path, message),
                other => other,
            })
    }
}

impl<R: Read> CsvSeries<R> {
    pub fn from_reader(reader: R, timestamp_column: &str, value_column: &str, granularity: Granularity) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| QbsdError::io("<csv header>", e))?.clone();
        let find = |name: &str| {
            headers.iter().position(|h| h == name).ok_or_else(|| QbsdError::Parse {
                row: 1,
                column: name.to_owned(),
                message: format!("column not found in header ({})", headers.iter().collect::<Vec<_>>().join(", ")),
            })
        };
        Ok(CsvSeries {
            ts_idx: find(timestamp_column)?,
            val_idx: find(value_column)?,
            ts_col: timestamp_column.to_owned(),
            val_col: value_column.to_owned(),
            records: rdr.into_records(),
            granularity,
        })
    }
}

/// Parsed row; `value` is `None` for an empty cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsvRow {
    pub line: usize,
    pub timestamp: i64,
    pub slot: SlotCoord,
    pub value: Option<f64>,
}

impl<R: Read> Iterator for CsvSeries<R> {
    type Item = Result<CsvRow>;

    fn next(&mut self) -> Option<Self::Item> {
        let record = match self.records.next()? {
            Ok(r) => r,
            Err(e) => {
                let row = e.position().map_or(0, |p| p.line() as usize);
                return Some(Err(QbsdError::Parse {
                    row,
                    column: String::new(),
                    message: e.to_string(),
                }));
            }
        };
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |column: &str, message: String| QbsdError::Parse {
            row: line,
            column: column.to_owned(),
            message,
        };
        Some((|| {
            let raw_ts = record.get(self.ts_idx).unwrap_or("");
            let timestamp = parse_timestamp(raw_ts)
                .ok_or_else(|| parse_err(&self.ts_col, format!("unparseable timestamp `{raw_ts}`")))?;
            let slot = align(timestamp, self.granularity)?;
            let raw_v = record.get(self.val_idx).unwrap_or("");
            let value = if raw_v.is_empty() || raw_v.eq_ignore_ascii_case("nan") || raw_v.eq_ignore_ascii_case("na") {
                None
            } else {
                let v: f64 = raw_v
                    .parse()
                    .map_err(|_| parse_err(&self.val_col, format!("unparseable number `{raw_v}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(&self.val_col, format!("non-finite value `{raw_v}`")));
                }
                Some(v)
            };
            Ok(CsvRow { line, timestamp, slot, value })
        })())
    }
}

/// Load a whole series, sorting by time. Duplicate timestamps are rejected.
pub fn load_csv(
    path: impl AsRef<Path>,
    timestamp_column: &str,
    value_column: &str,
    granularity: Granularity,
) -> Result<SeriesFrame> {
    let rows = CsvSeries::open(path, timestamp_column, value_column, granularity)?;
    collect_rows(rows, granularity)
}

pub fn read_csv<R: Read>(
    reader: R,
    timestamp_column: &str,
    value_column: &str,
    granularity: Granularity,
) -> Result<SeriesFrame> {
    collect_rows(
        CsvSeries::from_reader(reader, timestamp_column, value_column, granularity)?,
        granularity,
    )
}

fn collect_rows(rows: impl Iterator<Item = Result<CsvRow>>, g: Granularity) -> Result<SeriesFrame> {
    let mut parsed: Vec<CsvRow> = rows.collect::<Result<_>>()?;
    parsed.sort_by_key(|r| (r.slot, r.line));
    if let Some(w) = parsed.windows(2).find(|w| w[0].slot == w[1].slot) {
        return Err(QbsdError::DuplicateTimestamp {
            timestamp: w[1].timestamp,
            row: w[1].line,
        });
    }
    let points = parsed.into_iter().filter_map(|r| r.value.map(|v| (r.slot, v))).collect();
    SeriesFrame::new(g, points)
}

/// Write `timestamp,value` rows.
pub fn write_frame_csv(frame: &SeriesFrame, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| QbsdError::io("<output>", e);
    w.write_record(["timestamp", "value"]).map_err(io)?;
    for (slot, v) in frame.points() {
        w.write_record([format_timestamp(slot.epoch_seconds(frame.granularity())), v.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| QbsdError::io("<output>", e))
}
