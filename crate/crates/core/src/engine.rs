//! Fit-free rolling forecaster.
//!
//! Each series keeps a FIFO window of recent values in a slot-indexed ring
//! buffer, so a forecast costs one lookup per contextual-subset member no
//! matter how much history is retained.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::{compute_residuals, forecast_values, ForecastOutput, QbsdConfig, Residuals};
use crate::error::{QbsdError, Result};
use crate::timegrid::{align, for_each_subset_slot, Granularity, SlotCoord};

/// Read access to past values by slot.
pub trait History {
    fn value_at(&self, slot: SlotCoord) -> Option<f64>;
}

impl<H: History + ?Sized> History for &H {
    fn value_at(&self, slot: SlotCoord) -> Option<f64> {
        (**self).value_at(slot)
    }
}

/// Forecast and residuals produced when an observation arrives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub forecast: ForecastOutput,
    pub residuals: Residuals,
}

/// Default retained history: four weeks.
pub fn default_capacity(cfg: &QbsdConfig, g: Granularity) -> u64 {
    (28 * g.slots_per_day()).max(min_capacity(cfg))
}

/// Smallest buffer that keeps every subset member of the next target.
pub fn min_capacity(cfg: &QbsdConfig) -> u64 {
    cfg.scheme().span() + 1
}

#[derive(Debug, Clone)]
pub struct RollingForecaster {
    cfg: QbsdConfig,
    granularity: Granularity,
    capacity: u64,
    // NaN marks an empty slot; stored values are always finite
    ring: Vec<f64>,
    latest: Option<u64>,
    len: usize,
}

impl RollingForecaster {
    pub fn new(cfg: QbsdConfig, granularity: Granularity) -> Self {
        let capacity = default_capacity(&cfg, granularity);
        Self::with_buffer(cfg, granularity, capacity)
    }

    pub fn with_capacity(cfg: QbsdConfig, granularity: Granularity, capacity: u64) -> Result<Self> {
        let min = min_capacity(&cfg);
        if capacity < min {
            return Err(QbsdError::Config(format!(
                "history capacity {capacity} is below the {min} slots the scheme needs"
            )));
        }
        Ok(Self::with_buffer(cfg, granularity, capacity))
    }

    fn with_buffer(cfg: QbsdConfig, granularity: Granularity, capacity: u64) -> Self {
        RollingForecaster {
            cfg,
            granularity,
            capacity,
            ring: vec![f64::NAN; capacity as usize],
            latest: None,
            len: 0,
        }
    }

    pub fn config(&self) -> &QbsdConfig {
        &self.cfg
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Number of slots currently holding a value.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn latest_slot(&self) -> Option<SlotCoord> {
        self.latest.map(SlotCoord::new)
    }

    /// Oldest slot still inside the retained window.
    pub fn oldest_retained(&self) -> Option<SlotCoord> {
        self.latest
            .map(|l| SlotCoord::new(l.saturating_sub(self.capacity - 1)))
    }

    fn index(&self, slot: u64) -> usize {
        (slot % self.capacity) as usize
    }

    fn clear_index(&mut self, i: usize) {
        if !self.ring[i].is_nan() {
            self.ring[i] = f64::NAN;
            self.len -= 1;
        }
    }

    /// Insert one value. Later slots advance the window and evict what falls
    /// out of it; earlier slots still inside the window overwrite in place.
    pub fn insert(&mut self, slot: SlotCoord, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(QbsdError::NonFiniteValue(value));
        }
        let s = slot.global_slot();
        match self.latest {
            Some(latest) if s <= latest => {
                if latest - s >= self.capacity {
                    return Err(QbsdError::OutsideRetainedWindow {
                        slot: s,
                        oldest: latest + 1 - self.capacity,
                    });
                }
            }
            Some(latest) => {
                if s - latest >= self.capacity {
                    self.ring.fill(f64::NAN);
                    self.len = 0;
                } else {
                    for gap in latest + 1..s {
                        self.clear_index(self.index(gap));
                    }
                    self.clear_index(self.index(s));
                }
                self.latest = Some(s);
            }
            None => self.latest = Some(s),
        }
        let i = self.index(s);
        if self.ring[i].is_nan() {
            self.len += 1;
        }
        self.ring[i] = value;
        Ok(())
    }

    pub fn ingest_history(&mut self, batch: &[(SlotCoord, f64)]) -> Result<()> {
        batch.iter().try_for_each(|&(s, v)| self.insert(s, v))
    }

    /// Like [`Self::ingest_history`] for epoch-second timestamps.
    pub fn ingest_timestamps(&mut self, batch: &[(i64, f64)]) -> Result<()> {
        for &(ts, v) in batch {
            let slot = align(ts, self.granularity)?;
            self.insert(slot, v)?;
        }
        Ok(())
    }

    /// Forecast for `t` from the retained history. Only slots strictly before
    /// `t` are read.
    pub fn forecast_at(&self, t: SlotCoord) -> Result<ForecastOutput> {
        let scheme = self.cfg.scheme();
        if let Some(oldest) = self.oldest_retained() {
            let first_needed = t.global_slot().saturating_sub(scheme.span());
            if first_needed < oldest.global_slot() && t.global_slot() >= scheme.span() {
                return Err(QbsdError::OutsideRetainedWindow {
                    slot: first_needed,
                    oldest: oldest.global_slot(),
                });
            }
        }
        let mut values = Vec::with_capacity(scheme.subset_size());
        for_each_subset_slot(t, scheme, |s| {
            if let Some(v) = self.value_at(s) {
                values.push(v);
            }
        })?;
        forecast_values(values.into_iter(), self.cfg.min_samples())
    }

    /// Forecast `t`, compute residuals against `value`, then buffer the value.
    /// The value is buffered even when the forecast fails.
    pub fn observe(&mut self, t: SlotCoord, value: f64) -> Result<Observation> {
        if !value.is_finite() {
            return Err(QbsdError::NonFiniteValue(value));
        }
        let forecast = self.forecast_at(t);
        self.insert(t, value)?;
        let forecast = forecast?;
        let residuals = compute_residuals(value, &forecast, self.cfg.c())?;
        Ok(Observation { forecast, residuals })
    }

    pub fn observe_timestamp(&mut self, timestamp: i64, value: f64) -> Result<Observation> {
        let slot = align(timestamp, self.granularity)?;
        self.observe(slot, value)
    }
}

impl History for RollingForecaster {
    fn value_at(&self, slot: SlotCoord) -> Option<f64> {
        let latest = self.latest?;
        let s = slot.global_slot();
        if s > latest || latest - s >= self.capacity {
            return None;
        }
        let v = self.ring[self.index(s)];
        (!v.is_nan()).then_some(v)
    }
}

/// Independent forecasters keyed by series id, all built from one template.
#[derive(Debug, Clone)]
pub struct MultiSeriesEngine {
    template: QbsdConfig,
    granularity: Granularity,
    capacity: u64,
    series: HashMap<String, RollingForecaster>,
}

impl MultiSeriesEngine {
    pub fn new(template: QbsdConfig, granularity: Granularity) -> Self {
        let capacity = default_capacity(&template, granularity);
        MultiSeriesEngine {
            template,
            granularity,
            capacity,
            series: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, series_id: &str) -> Option<&RollingForecaster> {
        self.series.get(series_id)
    }

    /// Register a forecaster with its own configuration.
    pub fn insert_series(&mut self, series_id: impl Into<String>, forecaster: RollingForecaster) {
        self.series.insert(series_id.into(), forecaster);
    }

    pub fn series_mut(&mut self, series_id: &str) -> &mut RollingForecaster {
        let (cfg, g, cap) = (&self.template, self.granularity, self.capacity);
        self.series
            .entry(series_id.to_owned())
            .or_insert_with(|| RollingForecaster::with_buffer(cfg.clone(), g, cap))
    }

    pub fn observe(&mut self, series_id: &str, t: SlotCoord, value: f64) -> Result<Observation> {
        self.series_mut(series_id).observe(t, value)
    }

    /// Feed per-series batches, processing distinct series on the rayon pool.
    /// Results come back in the order of `batches`.
    pub fn observe_parallel(
        &mut self,
        batches: Vec<(String, Vec<(SlotCoord, f64)>)>,
    ) -> Vec<(String, Vec<Result<Observation>>)> {
        let mut work: Vec<_> = batches
            .into_iter()
            .map(|(id, batch)| {
                let f = self.series.remove(&id).unwrap_or_else(|| {
                    RollingForecaster::with_buffer(self.template.clone(), self.granularity, self.capacity)
                });
                (id, f, batch)
            })
            .collect();
        let results: Vec<Vec<Result<Observation>>> = work
            .par_iter_mut()
            .map(|(_, f, batch)| batch.iter().map(|&(s, v)| f.observe(s, v)).collect())
            .collect();
        work.into_iter()
            .zip(results)
            .map(|((id, f, _), res)| {
                self.series.insert(id.clone(), f);
                (id, res)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timegrid::SeasonalityScheme;
    use proptest::prelude::*;

    fn g() -> Granularity {
        Granularity::HOURLY
    }

    fn cfg(k: u32) -> QbsdConfig {
        QbsdConfig::weekly(4, k, g(), 1.0).unwrap()
    }

    fn periodic(slot: u64) -> f64 {
        let week = g().slots_per_week();
        ((slot % week) * 7 % 31) as f64 + 10.0
    }

    #[test]
    fn ingest_fills_to_capacity() {
        let mut f = RollingForecaster::new(cfg(2), g());
        let day = g().slots_per_day();
        let batch: Vec<_> = (0..28 * day).map(|s| (SlotCoord::new(s), 1.0)).collect();
        f.ingest_history(&batch).unwrap();
        assert_eq!(f.len() as u64, 28 * day);
    }

    #[test]
    fn duplicate_slot_last_write_wins() {
        let mut f = RollingForecaster::new(cfg(2), g());
        f.insert(SlotCoord::new(5), 1.0).unwrap();
        f.insert(SlotCoord::new(5), 2.0).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.value_at(SlotCoord::new(5)), Some(2.0));
    }

    #[test]
    fn fifo_eviction() {
        let mut f = RollingForecaster::new(cfg(2), g());
        let day = g().slots_per_day();
        let batch: Vec<_> = (0..40 * day).map(|s| (SlotCoord::new(s), s as f64)).collect();
        f.ingest_history(&batch).unwrap();
        assert_eq!(f.len() as u64, 28 * day);
        assert!((0..12 * day).all(|s| f.value_at(SlotCoord::new(s)).is_none()));
        assert_eq!(f.value_at(SlotCoord::new(12 * day)), Some((12 * day) as f64));
        assert!(matches!(
            f.insert(SlotCoord::new(0), 1.0),
            Err(QbsdError::OutsideRetainedWindow { .. })
        ));
        // out-of-order within the window is accepted
        f.insert(SlotCoord::new(30 * day), -1.0).unwrap();
        assert_eq!(f.value_at(SlotCoord::new(30 * day)), Some(-1.0));
    }

    #[test]
    fn gaps_clear_stale_ring_entries() {
        let c = cfg(1);
        let cap = min_capacity(&c);
        let mut f = RollingForecaster::with_capacity(c, g(), cap).unwrap();
        f.insert(SlotCoord::new(0), 1.0).unwrap();
        f.insert(SlotCoord::new(3), 1.0).unwrap();
        f.insert(SlotCoord::new(cap + 1), 1.0).unwrap();
        // slot 0 evicted, slot 3 retained
        assert_eq!(f.len(), 2);
        f.insert(SlotCoord::new(10 * cap), 1.0).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn capacity_below_span_rejected() {
        let c = cfg(1);
        let min = min_capacity(&c);
        assert!(RollingForecaster::with_capacity(c.clone(), g(), min - 1).is_err());
        assert!(RollingForecaster::with_capacity(c, g(), min).is_ok());
    }

    #[test]
    fn periodic_history_forecast_exact() {
        let cfg = QbsdConfig::weekly(4, 0, g(), 1.0).unwrap();
        let mut f = RollingForecaster::new(cfg, g());
        let week = g().slots_per_week();
        for s in 0..5 * week {
            f.insert(SlotCoord::new(s), periodic(s)).unwrap();
        }
        for t in 5 * week..5 * week + 50 {
            let out = f.forecast_at(SlotCoord::new(t)).unwrap();
            assert_eq!(out.forecast, periodic(t));
            assert_eq!(out.iqr, 0.0);
        }
    }

    #[test]
    fn insufficient_history_and_first_observation() {
        let mut f = RollingForecaster::new(cfg(2), g());
        let week = g().slots_per_week();
        let t = SlotCoord::new(3 * week + 10);
        assert!(matches!(f.observe(t, 4.0), Err(QbsdError::InsufficientHistory { present: 0, .. })));
        assert_eq!(f.value_at(t), Some(4.0));
        assert!(matches!(
            f.forecast_at(SlotCoord::new(t.global_slot() + 1)),
            Err(QbsdError::InsufficientHistory { present: 1, required: 4 })
        ));
        assert!(matches!(f.observe(SlotCoord::new(3 * week + 11), f64::NAN), Err(QbsdError::NonFiniteValue(_))));
    }

    #[test]
    fn target_value_does_not_leak() {
        let mut f = RollingForecaster::new(cfg(3), g());
        let week = g().slots_per_week();
        for s in 0..4 * week {
            f.insert(SlotCoord::new(s), (s % 17) as f64).unwrap();
        }
        let t = SlotCoord::new(4 * week);
        let before = f.forecast_at(t).unwrap();
        f.insert(t, 1e6).unwrap();
        assert_eq!(f.forecast_at(t).unwrap(), before);
    }

    #[test]
    fn observe_constant_series_zero_residuals() {
        let mut f = RollingForecaster::new(cfg(2), g());
        let week = g().slots_per_week();
        for s in 0..3 * week + 2 {
            let _ = f.observe(SlotCoord::new(s), 42.0);
        }
        let obs = f.observe(SlotCoord::new(3 * week + 2), 42.0).unwrap();
        assert_eq!(obs.residuals, Residuals { difference: 0.0, normalized: 0.0 });
    }

    #[test]
    fn spike_residual_equals_injection() {
        let cfg = QbsdConfig::weekly(4, 0, g(), 1.0).unwrap();
        let mut f = RollingForecaster::new(cfg, g());
        let week = g().slots_per_week();
        for s in 0..4 * week {
            f.insert(SlotCoord::new(s), periodic(s)).unwrap();
        }
        let t = 4 * week + 7;
        for s in 4 * week..t {
            f.observe(SlotCoord::new(s), periodic(s)).unwrap();
        }
        let amplitude = 31.0;
        let obs = f.observe(SlotCoord::new(t), periodic(t) + 5.0 * amplitude).unwrap();
        assert_eq!(obs.residuals.difference, 5.0 * amplitude);
    }

    #[test]
    fn multi_series_isolation() {
        let mut engine = MultiSeriesEngine::new(cfg(1), g());
        let week = g().slots_per_week();
        let a: Vec<_> = (0..4 * week).map(|s| (SlotCoord::new(s), 1.0)).collect();
        let b: Vec<_> = (0..4 * week).map(|s| (SlotCoord::new(s), 100.0 + (s % 3) as f64)).collect();
        let res = engine.observe_parallel(vec![("a".into(), a.clone()), ("b".into(), b.clone())]);
        assert_eq!(res[0].0, "a");
        assert_eq!(engine.len(), 2);

        let mut solo = RollingForecaster::new(cfg(1), g());
        let solo_res: Vec<_> = b.iter().map(|&(s, v)| solo.observe(s, v)).collect();
        assert_eq!(res[1].1, solo_res);
        let t = SlotCoord::new(4 * week);
        assert_eq!(engine.get("a").unwrap().forecast_at(t).unwrap().forecast, 1.0);
        assert_eq!(engine.get("b").unwrap().forecast_at(t).unwrap(), solo.forecast_at(t).unwrap());
        let obs = engine.observe("a", t, 1.0).unwrap();
        assert_eq!(obs.residuals.difference, 0.0);
    }

    #[test]
    fn forecast_outside_window_is_an_error() {
        let scheme = SeasonalityScheme::weekly(2, 1, g()).unwrap();
        let c = QbsdConfig::new(scheme, 1.0, 3).unwrap();
        let cap = min_capacity(&c);
        let mut f = RollingForecaster::with_capacity(c, g(), cap).unwrap();
        for s in 0..3 * cap {
            f.insert(SlotCoord::new(s), 1.0).unwrap();
        }
        assert!(f.forecast_at(SlotCoord::new(3 * cap)).is_ok());
        assert!(matches!(
            f.forecast_at(SlotCoord::new(2 * cap)),
            Err(QbsdError::OutsideRetainedWindow { .. })
        ));
    }

    proptest! {
        #[test]
        fn eviction_never_changes_forecasts(
            values in prop::collection::vec(prop::option::of(0.0f64..100.0), 600..900),
            extra in 0u64..200,
        ) {
            // tiny grid: 4 slots per day, 28 per week
            let g = Granularity::new(21_600).unwrap();
            let c = QbsdConfig::weekly(4, 2, g, 1.0).unwrap();
            let tight = min_capacity(&c);
            let mut small = RollingForecaster::with_capacity(c.clone(), g, tight).unwrap();
            let mut large = RollingForecaster::with_capacity(c, g, tight + extra + 500).unwrap();
            for (s, v) in values.iter().enumerate() {
                let s = SlotCoord::new(s as u64);
                prop_assert_eq!(small.forecast_at(s), large.forecast_at(s));
                if let Some(v) = v {
                    prop_assert_eq!(small.observe(s, *v), large.observe(s, *v));
                }
            }
        }

        #[test]
        fn no_leakage_of_target_or_near_future(
            values in prop::collection::vec(prop::option::of(-50.0f64..50.0), 400),
            t_off in 0u64..100,
            future in prop::collection::vec(-1e4f64..1e4, 1..3),
        ) {
            let g = Granularity::new(21_600).unwrap();
            let c = QbsdConfig::weekly(4, 2, g, 1.0).unwrap();
            let mut f = RollingForecaster::new(c, g);
            let t = 300 + t_off;
            for (s, v) in values.iter().enumerate().take(t as usize) {
                if let Some(v) = v { f.insert(SlotCoord::new(s as u64), *v).unwrap(); }
            }
            let t = SlotCoord::new(t);
            let before = f.forecast_at(t);
            for (i, v) in future.iter().enumerate() {
                f.insert(SlotCoord::new(t.global_slot() + i as u64), *v).unwrap();
            }
            prop_assert_eq!(f.forecast_at(t), before);
        }
    }
}
