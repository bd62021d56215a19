use serde::{Deserialize, Serialize};

use super::{DatasetDescriptor, SeriesFrame};
use crate::baselines::{baseline_forecast, BaselineSpec};
use crate::decomposition::{compute_residuals, forecast_values, QbsdConfig};
use crate::engine::{History, Observation};
use crate::error::{QbsdError, Result};
use crate::metrics::{evaluate, EvalPairs, MetricsReport};
use crate::timegrid::{align, for_each_subset_slot, SlotCoord};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Qbsd(QbsdConfig),
    Baseline(BaselineSpec),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Qbsd(_) => "qbsd".to_owned(),
            Method::Baseline(b) => b.name(),
        }
    }

    fn lookback(&self) -> u64 {
        match self {
            Method::Qbsd(cfg) => cfg.scheme().span(),
            Method::Baseline(b) => b.lookback(),
        }
    }

    fn forecast(&self, history: &impl History, t: SlotCoord, actual: f64) -> Result<StepOutput> {
        match self {
            Method::Qbsd(cfg) => {
                let mut values = Vec::with_capacity(cfg.scheme().subset_size());
                for_each_subset_slot(t, cfg.scheme(), |s| {
                    if let Some(v) = history.value_at(s) {
                        values.push(v);
                    }
                })?;
                let forecast = forecast_values(values.into_iter(), cfg.min_samples())?;
                let residuals = compute_residuals(actual, &forecast, cfg.c())?;
                Ok(StepOutput::Qbsd(Observation { forecast, residuals }))
            }
            Method::Baseline(spec) => Ok(StepOutput::Baseline {
                forecast: baseline_forecast(history, t, spec)?,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepOutput {
    Qbsd(Observation),
    Baseline { forecast: f64 },
}

impl StepOutput {
    pub fn forecast(&self) -> f64 {
        match self {
            StepOutput::Qbsd(o) => o.forecast.forecast,
            StepOutput::Baseline { forecast } => *forecast,
        }
    }
}

/// One test timestamp. `output` is `None` when no forecast was possible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub slot: SlotCoord,
    pub timestamp: i64,
    pub actual: f64,
    pub output: Option<StepOutput>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub method: String,
    pub report: MetricsReport,
    pub records: Vec<StepRecord>,
    /// Test slots with an actual value but no valid forecast.
    pub skipped: usize,
}

impl Evaluation {
    /// Absolute errors of the scored steps, keyed by slot.
    pub fn abs_errors(&self) -> Vec<(SlotCoord, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.output.map(|o| (r.slot, (r.actual - o.forecast()).abs())))
            .collect()
    }
}

/// Values in the training window that precedes the first test slot.
pub fn training_values(frame: &SeriesFrame, desc: &DatasetDescriptor) -> Result<Vec<f64>> {
    let start = align(desc.test_start, desc.granularity)?;
    let lo = SlotCoord::new(start.global_slot().saturating_sub(desc.train_window_slots));
    let hi = match start.global_slot().checked_sub(1) {
        Some(h) => SlotCoord::new(h),
        None => return Ok(Vec::new()),
    };
    Ok(frame.range(lo, hi).iter().map(|p| p.1).collect())
}

/// Forecast every test slot using only the trailing training window, then
/// score the steps that produced a forecast.
pub fn rolling_evaluate(frame: &SeriesFrame, method: &Method, desc: &DatasetDescriptor) -> Result<Evaluation> {
    if frame.granularity() != desc.granularity {
        return Err(QbsdError::Config(format!(
            "series grid of {} s does not match the {} s grid of `{}`",
            frame.granularity().interval_seconds(),
            desc.granularity.interval_seconds(),
            desc.name
        )));
    }
    let window = desc.train_window_slots;
    if window < method.lookback() {
        return Err(QbsdError::InsufficientHistory {
            present: window as usize,
            required: method.lookback() as usize,
        });
    }
    let start = align(desc.test_start, desc.granularity)?;
    let end = align(desc.test_end, desc.granularity)?;
    let visible = |t: SlotCoord| {
        let lo = SlotCoord::new(t.global_slot().saturating_sub(window));
        let hi = SlotCoord::new(t.global_slot().saturating_sub(1));
        frame.window(lo, hi)
    };
    if start.global_slot() == 0 {
        return Err(QbsdError::InsufficientHistory { present: 0, required: 1 });
    }
    // warm-up must be satisfied at the first test slot, observed or not
    method.forecast(&visible(start), start, 0.0)?;

    let mut records = Vec::new();
    let mut skipped = 0;
    for &(slot, actual) in frame.range(start, end) {
        let output = match method.forecast(&visible(slot), slot, actual) {
            Ok(o) => Some(o),
            Err(QbsdError::InsufficientHistory { .. }) => {
                skipped += 1;
                None
            }
            Err(e) => return Err(e),
        };
        records.push(StepRecord {
            slot,
            timestamp: slot.epoch_seconds(desc.granularity),
            actual,
            output,
        });
    }
    let (actual, predicted): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.output.map(|o| (r.actual, o.forecast())))
        .unzip();
    if actual.is_empty() {
        return Err(QbsdError::InsufficientHistory { present: 0, required: 1 });
    }
    let report = evaluate(&EvalPairs::new(actual, predicted)?)?;
    Ok(Evaluation {
        method: method.name(),
        report,
        records,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{builtin_descriptor, generate_synthetic, SynthSpec};
    use crate::engine::RollingForecaster;
    use crate::timegrid::Granularity;

    fn synthetic(noise: f64) -> (SeriesFrame, DatasetDescriptor) {
        let spec = SynthSpec { noise_std: noise, seed: 3, ..SynthSpec::default() };
        (generate_synthetic(&spec).unwrap(), builtin_descriptor("synthetic").unwrap())
    }

    #[test]
    fn noiseless_qbsd_is_exact() {
        let (frame, desc) = synthetic(0.0);
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        let ev = rolling_evaluate(&frame, &Method::Qbsd(cfg), &desc).unwrap();
        assert!(ev.report.mape <= 1e-9);
        assert_eq!(ev.skipped, 0);
        assert_eq!(ev.records.len(), 28 * 96);
        for r in &ev.records {
            let Some(StepOutput::Qbsd(o)) = r.output else { panic!("missing forecast") };
            assert_eq!(o.forecast.iqr, 0.0);
        }
    }

    #[test]
    fn noiseless_seasonal_naive_is_exact() {
        let (frame, desc) = synthetic(0.0);
        let spec = BaselineSpec::seasonal_naive_weekly(desc.granularity);
        let ev = rolling_evaluate(&frame, &Method::Baseline(spec), &desc).unwrap();
        assert_eq!(ev.report.mape, 0.0);
    }

    #[test]
    fn matches_streaming_engine() {
        let (frame, desc) = synthetic(20.0);
        let desc = desc.with_scheme(4, crate::datasets::descriptors::SchemeRecipe::Weekly(4)).unwrap();
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        let ev = rolling_evaluate(&frame, &Method::Qbsd(cfg.clone()), &desc).unwrap();

        let mut f = RollingForecaster::with_capacity(cfg, desc.granularity, desc.train_window_slots).unwrap();
        let start = align(desc.test_start, desc.granularity).unwrap();
        let mut streamed = Vec::new();
        for &(slot, v) in frame.points() {
            let obs = f.observe(slot, v);
            if slot >= start {
                streamed.push(obs.ok());
            }
        }
        let batch: Vec<Option<Observation>> = ev
            .records
            .iter()
            .map(|r| match r.output {
                Some(StepOutput::Qbsd(o)) => Some(o),
                _ => None,
            })
            .collect();
        assert_eq!(streamed, batch);
    }

    #[test]
    fn window_shorter_than_span_is_rejected() {
        let (frame, mut desc) = synthetic(0.0);
        desc.train_window_slots = desc.scheme.span() - 1;
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        assert!(matches!(
            rolling_evaluate(&frame, &Method::Qbsd(cfg), &desc),
            Err(QbsdError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn test_start_without_warmup_is_rejected() {
        let (frame, mut desc) = synthetic(0.0);
        desc.test_start = frame.points()[10].0.epoch_seconds(desc.granularity);
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        assert!(matches!(
            rolling_evaluate(&frame, &Method::Qbsd(cfg), &desc),
            Err(QbsdError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn gaps_are_skipped_and_counted() {
        // drop a whole week so some test slots lose two of their three samples
        let spec = SynthSpec { gaps: vec![(21 * 96, 28 * 96)], ..SynthSpec::default() };
        let frame = generate_synthetic(&spec).unwrap();
        let desc = builtin_descriptor("synthetic").unwrap();
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        let ev = rolling_evaluate(&frame, &Method::Qbsd(cfg), &desc);
        // first test slot (day 28) reads days 21, 14 and 7: day 21 is missing
        assert!(matches!(ev, Err(QbsdError::InsufficientHistory { present: 2, required: 3 })));

        let mut late = desc.clone();
        late.test_start -= 7 * 86_400;
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        let frame_ok = generate_synthetic(&SynthSpec { gaps: vec![(35 * 96, 36 * 96)], ..SynthSpec::default() }).unwrap();
        let ev = rolling_evaluate(&frame_ok, &Method::Qbsd(cfg), &late).unwrap();
        // day 35 has no actuals; days 42 and 49 lose one of three samples
        assert_eq!(ev.skipped, 2 * 96);
        // days 21..56 minus the gap day
        assert_eq!(ev.records.len(), (56 - 21 - 1) * 96);
    }

    #[test]
    fn grid_mismatch() {
        let (frame, mut desc) = synthetic(0.0);
        desc.granularity = Granularity::HOURLY;
        let cfg = QbsdConfig::with_default_min_samples(desc.scheme.clone(), 1.0).unwrap();
        assert!(matches!(rolling_evaluate(&frame, &Method::Qbsd(cfg), &desc), Err(QbsdError::Config(_))));
    }

    #[test]
    fn training_window_values() {
        let (frame, desc) = synthetic(0.0);
        assert_eq!(training_values(&frame, &desc).unwrap().len(), 28 * 96);
    }
}
