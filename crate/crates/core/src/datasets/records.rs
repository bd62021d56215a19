use std::collections::VecDeque;
use std::io::Write;

use super::format_timestamp;
use crate::decomposition::{ForecastOutput, Residuals};
use crate::error::{QbsdError, Result};
use crate::smoothing::{SmootherSpec, StreamingSmoother};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordWriterOptions {
    /// Adds `q1_smooth` and `q3_smooth` when set to anything but `None`.
    pub smoother: SmootherSpec,
    /// Adds `anomaly_flag` (`|norm_residual| > threshold`).
    pub anomaly_threshold: Option<f64>,
}

impl Default for RecordWriterOptions {
    fn default() -> Self {
        RecordWriterOptions {
            smoother: SmootherSpec::None,
            anomaly_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Row {
    timestamp: i64,
    actual: Option<f64>,
    forecast: Option<ForecastOutput>,
    residuals: Option<Residuals>,
}

/// Streams per-timestamp forecast records as CSV. With a smoother, rows are
/// held back until their smoothed bounds are known, which is at most one
/// window later.
pub struct RecordWriter<W: Write> {
    out: csv::Writer<W>,
    options: RecordWriterOptions,
    smoothers: Option<(StreamingSmoother, StreamingSmoother)>,
    pending: VecDeque<Row>,
    rows: usize,
    anomalies: usize,
}

/// Missing and NaN values both become empty fields.
fn field(v: Option<f64>) -> String {
    v.filter(|x| !x.is_nan()).map(|x| x.to_string()).unwrap_or_default()
}

impl<W: Write> RecordWriter<W> {
    pub fn new(out: W, options: RecordWriterOptions) -> Result<Self> {
        if let Some(t) = options.anomaly_threshold {
            if !(t > 0.0 && t.is_finite()) {
                return Err(QbsdError::Config(format!("anomaly threshold must be positive, got {t}")));
            }
        }
        let smoothers = match options.smoother {
            SmootherSpec::None => None,
            spec => Some((StreamingSmoother::new(spec)?, StreamingSmoother::new(spec)?)),
        };
        let mut out = csv::Writer::from_writer(out);
        let mut header = vec![
            "timestamp",
            "actual",
            "forecast",
            "q1",
            "q3",
            "iqr",
            "diff_residual",
            "norm_residual",
            "sample_count",
            "fallback_used",
        ];
        if smoothers.is_some() {
            header.extend(["q1_smooth", "q3_smooth"]);
        }
        if options.anomaly_threshold.is_some() {
            header.push("anomaly_flag");
        }
        out.write_record(&header).map_err(|e| QbsdError::io("<output>", e))?;
        Ok(RecordWriter {
            out,
            options,
            smoothers,
            pending: VecDeque::new(),
            rows: 0,
            anomalies: 0,
        })
    }

    /// Rows written so far.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Rows flagged so far.
    pub fn anomalies(&self) -> usize {
        self.anomalies
    }

    /// Rows accepted but not yet written.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn write(
        &mut self,
        timestamp: i64,
        actual: Option<f64>,
        forecast: Option<ForecastOutput>,
        residuals: Option<Residuals>,
    ) -> Result<()> {
        let row = Row { timestamp, actual, forecast, residuals };
        match &mut self.smoothers {
            None => self.emit(row, None),
            Some((s1, s3)) => {
                self.pending.push_back(row);
                let a = s1.push(forecast.map(|f| f.q1));
                let b = s3.push(forecast.map(|f| f.q3));
                self.drain(a, b)
            }
        }
    }

    /// Writes held-back rows and flushes the sink.
    pub fn finish(self) -> Result<W> {
        self.finish_counted().map(|(w, _)| w)
    }

    /// Like [`Self::finish`], also returning the final anomaly count.
    pub fn finish_counted(mut self) -> Result<(W, usize)> {
        if let Some((s1, s3)) = &mut self.smoothers {
            let (a, b) = (s1.finish(), s3.finish());
            self.drain(a, b)?;
        }
        debug_assert!(self.pending.is_empty());
        let anomalies = self.anomalies;
        let out = self
            .out
            .into_inner()
            .map_err(|e| QbsdError::io("<output>", e.error()))?;
        Ok((out, anomalies))
    }

    fn drain(&mut self, q1: Vec<Option<f64>>, q3: Vec<Option<f64>>) -> Result<()> {
        debug_assert_eq!(q1.len(), q3.len());
        for (a, b) in q1.into_iter().zip(q3) {
            let row = self.pending.pop_front().expect("smoother emitted more rows than it received");
            self.emit(row, Some((a, b)))?;
        }
        Ok(())
    }

    fn emit(&mut self, row: Row, smooth: Option<(Option<f64>, Option<f64>)>) -> Result<()> {
        let f = row.forecast;
        let r = row.residuals;
        let mut rec = vec![
            format_timestamp(row.timestamp),
            field(row.actual),
            field(f.map(|f| f.forecast)),
            field(f.map(|f| f.q1)),
            field(f.map(|f| f.q3)),
            field(f.map(|f| f.iqr)),
            field(r.map(|r| r.difference)),
            field(r.map(|r| r.normalized)),
            f.map(|f| f.sample_count.to_string()).unwrap_or_default(),
            f.map(|f| f.fallback_used.to_string()).unwrap_or_default(),
        ];
        if let Some((a, b)) = smooth {
            rec.push(field(a));
            rec.push(field(b));
        }
        if let Some(t) = self.options.anomaly_threshold {
            rec.push(match r {
                Some(r) => {
                    let flagged = r.normalized.abs() > t;
                    self.anomalies += usize::from(flagged);
                    u8::from(flagged).to_string()
                }
                None => String::new(),
            });
        }
        self.out.write_record(&rec).map_err(|e| QbsdError::io("<output>", e))?;
        self.rows += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::smooth_gapped;

    fn fo(q1: f64, q3: f64) -> ForecastOutput {
        ForecastOutput {
            forecast: (q1 + q3) / 2.0,
            q1,
            q3,
            iqr: q3 - q1,
            sample_count: 3,
            fallback_used: false,
        }
    }

    fn read(bytes: &[u8]) -> Vec<csv::StringRecord> {
        csv::Reader::from_reader(bytes).records().map(|r| r.unwrap()).collect()
    }

    #[test]
    fn plain_rows_and_flags() {
        let opts = RecordWriterOptions { anomaly_threshold: Some(3.0), ..Default::default() };
        let mut w = RecordWriter::new(Vec::new(), opts).unwrap();
        w.write(0, Some(1.0), None, None).unwrap();
        let res = |n| Some(Residuals { difference: n, normalized: n });
        w.write(60, Some(2.0), Some(fo(1.0, 3.0)), res(0.5)).unwrap();
        w.write(120, Some(9.0), Some(fo(1.0, 3.0)), res(-4.0)).unwrap();
        assert_eq!(w.anomalies(), 1);
        let bytes = w.finish().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("timestamp,actual,forecast,q1,q3,iqr,diff_residual,norm_residual,sample_count,fallback_used,anomaly_flag\n"));
        let rows = read(&bytes);
        assert_eq!(rows[0].iter().collect::<Vec<_>>(), ["1970-01-01T00:00:00", "1", "", "", "", "", "", "", "", "", ""]);
        assert_eq!(&rows[1][10], "0");
        assert_eq!(&rows[2][10], "1");
    }

    #[test]
    fn smoothed_columns_match_batch() {
        let spec = SmootherSpec::SavitzkyGolay { window_length: 5, polyorder: 2 };
        let opts = RecordWriterOptions { smoother: spec, anomaly_threshold: None };
        let mut w = RecordWriter::new(Vec::new(), opts).unwrap();
        let q1: Vec<Option<f64>> = (0..40)
            .map(|i| if i == 17 { None } else { Some((i as f64 * 0.3).sin()) })
            .collect();
        let mut max_pending = 0;
        for (i, q) in q1.iter().enumerate() {
            w.write(i as i64 * 60, Some(0.0), q.map(|v| fo(v, v + 1.0)), None).unwrap();
            max_pending = max_pending.max(w.pending());
        }
        assert!(max_pending <= 5);
        let rows = read(&w.finish().unwrap());
        assert_eq!(rows.len(), 40);
        let want = smooth_gapped(&q1, spec).unwrap();
        for (row, want) in rows.iter().zip(want) {
            assert_eq!(&row[10], field(want).as_str());
        }
    }

    #[test]
    fn bad_threshold() {
        let opts = RecordWriterOptions { anomaly_threshold: Some(0.0), ..Default::default() };
        assert!(RecordWriter::new(Vec::new(), opts).is_err());
    }
}
