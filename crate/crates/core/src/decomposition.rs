//! Quartile-based forecast and operating range for a single timestamp.
//!
//! The forecast is the mean of the contextual-subset values lying strictly
//! inside `(Q1, Q3)`; the interquartile range is the expected deviation at
//! that time of day. Percentiles use linear interpolation at position
//! `p * (n - 1)` of the sorted sample.

use serde::{Deserialize, Serialize};

use crate::error::{QbsdError, Result};
use crate::timegrid::{for_each_subset_slot, Granularity, SeasonalityScheme, SlotCoord};

/// Smallest sample count a forecast may be based on, whatever the config says.
pub const MIN_SAMPLES_FLOOR: usize = 3;
pub const DEFAULT_MIN_SAMPLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutput {
    pub forecast: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub sample_count: usize,
    /// The interior `(Q1, Q3)` was empty and the median was used instead.
    pub fallback_used: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub difference: f64,
    pub normalized: f64,
}

/// Percentile of an ascending, non-empty slice.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

fn sorted_finite(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(QbsdError::EmptyInput);
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(QbsdError::NonFiniteValue(*bad));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    Ok(sorted)
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(QbsdError::Config(format!("percentile {p} outside [0, 1]")));
    }
    Ok(percentile_sorted(&sorted_finite(values)?, p))
}

fn quartiles_sorted(sorted: &[f64]) -> Quartiles {
    let q1 = percentile_sorted(sorted, 0.25);
    let q3 = percentile_sorted(sorted, 0.75);
    Quartiles { q1, q3, iqr: q3 - q1 }
}

pub fn compute_quartiles(values: &[f64]) -> Result<Quartiles> {
    Ok(quartiles_sorted(&sorted_finite(values)?))
}

fn forecast_sorted(sorted: &[f64], q: &Quartiles) -> (f64, bool) {
    let (sum, count) = sorted
        .iter()
        .filter(|&&x| q.q1 < x && x < q.q3)
        .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
    if count == 0 {
        (percentile_sorted(sorted, 0.5), true)
    } else {
        (sum / count as f64, false)
    }
}

/// Interior mean of `values`, falling back to the median when no value lies
/// strictly between the quartiles.
pub fn forecast_from_subset(values: &[f64]) -> Result<(f64, bool)> {
    let sorted = sorted_finite(values)?;
    let q = quartiles_sorted(&sorted);
    Ok(forecast_sorted(&sorted, &q))
}

pub fn compute_residuals(actual: f64, fo: &ForecastOutput, c: f64) -> Result<Residuals> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(QbsdError::InvalidConstant(c));
    }
    let difference = actual - fo.forecast;
    Ok(Residuals {
        difference,
        normalized: difference / fo.iqr.max(c),
    })
}

/// `max(|P1(training)|, floor)`.
pub fn contingency_constant(training_values: &[f64], floor: f64) -> Result<f64> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(QbsdError::InvalidConstant(floor));
    }
    let p1 = percentile(training_values, 0.01)?;
    Ok(p1.abs().max(floor))
}

/// Floor for [`contingency_constant`]: 1 for integer-valued data, `1e-6`
/// otherwise.
pub fn default_contingency_floor(training_values: &[f64]) -> f64 {
    if training_values.iter().all(|v| v.fract() == 0.0) {
        1.0
    } else {
        1e-6
    }
}

/// Samples gathered for one target slot. Absent history slots are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualSubset {
    samples: Vec<(SlotCoord, f64)>,
    requested_size: usize,
}

impl ContextualSubset {
    pub fn new(samples: Vec<(SlotCoord, f64)>, requested_size: usize) -> Result<Self> {
        if samples.len() > requested_size {
            return Err(QbsdError::Config(format!(
                "{} samples exceed the requested subset size {requested_size}",
                samples.len()
            )));
        }
        let mut slots: Vec<_> = samples.iter().map(|(s, _)| *s).collect();
        slots.sort_unstable();
        if slots.windows(2).any(|w| w[0] == w[1]) {
            return Err(QbsdError::Config("duplicate slot in contextual subset".into()));
        }
        Ok(ContextualSubset { samples, requested_size })
    }

    /// Collect the subset of `t` from any slot lookup.
    pub fn gather(
        t: SlotCoord,
        scheme: &SeasonalityScheme,
        lookup: impl Fn(SlotCoord) -> Option<f64>,
    ) -> Result<Self> {
        let mut samples = Vec::with_capacity(scheme.subset_size());
        for_each_subset_slot(t, scheme, |s| {
            if let Some(v) = lookup(s) {
                samples.push((s, v));
            }
        })?;
        Ok(ContextualSubset {
            samples,
            requested_size: scheme.subset_size(),
        })
    }

    pub fn samples(&self) -> &[(SlotCoord, f64)] {
        &self.samples
    }

    pub fn requested_size(&self) -> usize {
        self.requested_size
    }

    pub fn present_count(&self) -> usize {
        self.samples.len()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QbsdConfig {
    scheme: SeasonalityScheme,
    c: f64,
    min_samples: usize,
}

impl QbsdConfig {
    pub fn new(scheme: SeasonalityScheme, c: f64, min_samples: usize) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(QbsdError::InvalidConstant(c));
        }
        if min_samples < MIN_SAMPLES_FLOOR {
            return Err(QbsdError::Config(format!(
                "min_samples must be at least {MIN_SAMPLES_FLOOR}, got {min_samples}"
            )));
        }
        if min_samples > scheme.subset_size() {
            return Err(QbsdError::Config(format!(
                "min_samples {min_samples} exceeds the subset size {}",
                scheme.subset_size()
            )));
        }
        Ok(QbsdConfig { scheme, c, min_samples })
    }

    /// Uses the default sample threshold, lowered to the subset size for
    /// tiny subsets (e.g. `k = 0` gives three samples).
    pub fn with_default_min_samples(scheme: SeasonalityScheme, c: f64) -> Result<Self> {
        let min = DEFAULT_MIN_SAMPLES.min(scheme.subset_size()).max(MIN_SAMPLES_FLOOR);
        QbsdConfig::new(scheme, c, min)
    }

    /// Default weekly configuration over `n_weeks` with context period `k`.
    pub fn weekly(n_weeks: u32, k: u32, g: Granularity, c: f64) -> Result<Self> {
        QbsdConfig::with_default_min_samples(SeasonalityScheme::weekly(n_weeks, k, g)?, c)
    }

    pub fn scheme(&self) -> &SeasonalityScheme {
        &self.scheme
    }

    pub fn k(&self) -> u32 {
        self.scheme.k()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(QbsdError::InvalidConstant(c));
        }
        self.c = c;
        Ok(self)
    }
}

pub fn qbsd_step(subset: &ContextualSubset, cfg: &QbsdConfig) -> Result<ForecastOutput> {
    forecast_values(subset.values(), cfg.min_samples())
}

/// Core step over raw sample values; used on the hot path to skip building a
/// [`ContextualSubset`].
pub(crate) fn forecast_values(
    values: impl Iterator<Item = f64>,
    min_samples: usize,
) -> Result<ForecastOutput> {
    let mut sorted: Vec<f64> = values.collect();
    if sorted.len() < min_samples {
        return Err(QbsdError::InsufficientHistory {
            present: sorted.len(),
            required: min_samples,
        });
    }
    if let Some(bad) = sorted.iter().find(|v| !v.is_finite()) {
        return Err(QbsdError::NonFiniteValue(*bad));
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let q = quartiles_sorted(&sorted);
    let (forecast, fallback_used) = forecast_sorted(&sorted, &q);
    Ok(ForecastOutput {
        forecast,
        q1: q.q1,
        q3: q.q3,
        iqr: q.iqr,
        sample_count: sorted.len(),
        fallback_used,
    })
}
