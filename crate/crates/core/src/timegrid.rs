//! Fixed-interval slot grid and contextual-subset index resolution.
//!
//! Timestamps are naive epoch seconds on a grid of `interval_seconds`. A
//! calendar day is always 86400 s, so a lag of `7 * slots_per_day` slots lands
//! on the same weekday and time of day without any calendar arithmetic.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{QbsdError, Result};

pub const SECONDS_PER_DAY: u32 = 86_400;

/// Sampling interval of a series (the result output period).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Granularity {
    interval_seconds: u32,
}

impl Granularity {
    pub const QUARTER_HOURLY: Granularity = Granularity { interval_seconds: 900 };
    pub const HOURLY: Granularity = Granularity { interval_seconds: 3600 };
    pub const DAILY: Granularity = Granularity { interval_seconds: SECONDS_PER_DAY };

    pub fn new(interval_seconds: u32) -> Result<Self> {
        if interval_seconds == 0 || !SECONDS_PER_DAY.is_multiple_of(interval_seconds) {
            return Err(QbsdError::InvalidGranularity { interval_seconds });
        }
        Ok(Granularity { interval_seconds })
    }

    pub fn interval_seconds(&self) -> u32 {
        self.interval_seconds
    }

    pub fn slots_per_day(&self) -> u64 {
        u64::from(SECONDS_PER_DAY / self.interval_seconds)
    }

    pub fn slots_per_week(&self) -> u64 {
        7 * self.slots_per_day()
    }

    /// Number of whole slots in `seconds`, or `None` if it is not a multiple
    /// of the interval.
    pub fn slots_in(&self, seconds: u64) -> Option<u64> {
        let step = u64::from(self.interval_seconds);
        seconds.is_multiple_of(step).then_some(seconds / step)
    }
}

/// A position on the slot grid, counted from the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotCoord(u64);

impl SlotCoord {
    pub const fn new(global_slot: u64) -> Self {
        SlotCoord(global_slot)
    }

    pub const fn global_slot(self) -> u64 {
        self.0
    }

    pub fn day_index(self, g: Granularity) -> u64 {
        self.0 / g.slots_per_day()
    }

    pub fn slot_of_day(self, g: Granularity) -> u64 {
        self.0 % g.slots_per_day()
    }

    /// Day of week with Monday = 0. The epoch (1970-01-01) was a Thursday.
    pub fn day_of_week(self, g: Granularity) -> u8 {
        ((self.day_index(g) + 3) % 7) as u8
    }

    pub fn epoch_seconds(self, g: Granularity) -> i64 {
        (self.0 * u64::from(g.interval_seconds())) as i64
    }

    pub fn checked_offset(self, delta: i64) -> Option<SlotCoord> {
        self.0.checked_add_signed(delta).map(SlotCoord)
    }
}

/// Map an epoch timestamp onto the grid. Misaligned timestamps are rejected
/// rather than snapped.
pub fn align(timestamp: i64, g: Granularity) -> Result<SlotCoord> {
    if timestamp < 0 {
        return Err(QbsdError::NegativeTimestamp { timestamp });
    }
    let step = i64::from(g.interval_seconds());
    if timestamp % step != 0 {
        return Err(QbsdError::GridMisaligned {
            timestamp,
            interval_seconds: g.interval_seconds(),
        });
    }
    Ok(SlotCoord((timestamp / step) as u64))
}

/// Window shape around a (lagged) target slot, `k` being the context period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WindowKind {
    /// Offsets `-k..=-1`.
    Past(u32),
    /// Offsets `-k..=k`.
    Symmetric(u32),
    /// Offsets `0..=k`.
    ForwardInclusive(u32),
}

impl WindowKind {
    pub fn k(&self) -> u32 {
        match *self {
            WindowKind::Past(k) | WindowKind::Symmetric(k) | WindowKind::ForwardInclusive(k) => k,
        }
    }

    pub fn size(&self) -> usize {
        match *self {
            WindowKind::Past(k) => k as usize,
            WindowKind::Symmetric(k) => 2 * k as usize + 1,
            WindowKind::ForwardInclusive(k) => k as usize + 1,
        }
    }

    /// Offsets relative to the lagged slot. Empty for `Past(0)`.
    pub fn offsets(&self) -> RangeInclusive<i64> {
        let k = i64::from(self.k());
        match self {
            WindowKind::Past(_) => -k..=-1,
            WindowKind::Symmetric(_) => -k..=k,
            WindowKind::ForwardInclusive(_) => 0..=k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LagSpec {
    pub lag_slots: u64,
    pub window: WindowKind,
}

impl LagSpec {
    pub fn new(lag_slots: u64, window: WindowKind) -> Self {
        LagSpec { lag_slots, window }
    }

    /// Offsets relative to the target slot itself.
    pub fn relative_offsets(&self) -> RangeInclusive<i64> {
        let lag = self.lag_slots as i64;
        let w = self.window.offsets();
        (w.start() - lag)..=(w.end() - lag)
    }
}

/// Ordered lag/window recipe defining the contextual subset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeasonalityScheme {
    lags: Vec<LagSpec>,
}

impl SeasonalityScheme {
    /// Validates that the first group is the unlagged past window, that no
    /// group reaches the target slot or beyond, and that groups are disjoint.
    pub fn new(lags: Vec<LagSpec>) -> Result<Self> {
        match lags.first() {
            None => return Err(QbsdError::InvalidScheme("no lag groups".into())),
            Some(first) if first.lag_slots != 0 || !matches!(first.window, WindowKind::Past(_)) => {
                return Err(QbsdError::InvalidScheme(
                    "first lag group must be the unlagged past window".into(),
                ))
            }
            Some(_) => {}
        }
        let mut ranges: Vec<RangeInclusive<i64>> = lags
            .iter()
            .map(LagSpec::relative_offsets)
            .filter(|r| !r.is_empty())
            .collect();
        if let Some(r) = ranges.iter().find(|r| *r.end() >= 0) {
            return Err(QbsdError::InvalidScheme(format!(
                "lag group covering offsets {}..={} includes the target slot or later",
                r.start(),
                r.end()
            )));
        }
        ranges.sort_by_key(|r| *r.start());
        for pair in ranges.windows(2) {
            if pair[1].start() <= pair[0].end() {
                return Err(QbsdError::InvalidScheme(format!(
                    "lag groups overlap at offsets {}..={} and {}..={}",
                    pair[0].start(),
                    pair[0].end(),
                    pair[1].start(),
                    pair[1].end()
                )));
            }
        }
        Ok(SeasonalityScheme { lags })
    }

    pub fn lags(&self) -> &[LagSpec] {
        &self.lags
    }

    pub fn subset_size(&self) -> usize {
        self.lags.iter().map(|l| l.window.size()).sum()
    }

    /// Largest context period among the groups.
    pub fn k(&self) -> u32 {
        self.lags.iter().map(|l| l.window.k()).max().unwrap_or(0)
    }

    /// How far back (in slots) the oldest member of the subset lies.
    pub fn span(&self) -> u64 {
        self.lags
            .iter()
            .map(LagSpec::relative_offsets)
            .filter(|r| !r.is_empty())
            .map(|r| r.start().unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Current week (past-only), `n_weeks - 2` symmetric weekly lags and a
    /// forward-inclusive window on the oldest week. `n_weeks = 4` gives the
    /// classic `6k + 3` subset.
    pub fn weekly(n_weeks: u32, k: u32, g: Granularity) -> Result<Self> {
        if n_weeks < 2 {
            return Err(QbsdError::InvalidScheme(format!(
                "weekly scheme needs at least 2 weeks, got {n_weeks}"
            )));
        }
        let week = g.slots_per_week();
        let mut lags = vec![LagSpec::new(0, WindowKind::Past(k))];
        for w in 1..n_weeks - 1 {
            lags.push(LagSpec::new(u64::from(w) * week, WindowKind::Symmetric(k)));
        }
        lags.push(LagSpec::new(
            u64::from(n_weeks - 1) * week,
            WindowKind::ForwardInclusive(k),
        ));
        SeasonalityScheme::new(lags)
    }

    /// Current week, two symmetric weekly lags and a symmetric window 52
    /// weeks back, for series with annual seasonality.
    pub fn weekly_plus_yearly(k: u32, g: Granularity) -> Result<Self> {
        let day = g.slots_per_day();
        SeasonalityScheme::new(vec![
            LagSpec::new(0, WindowKind::Past(k)),
            LagSpec::new(7 * day, WindowKind::Symmetric(k)),
            LagSpec::new(14 * day, WindowKind::Symmetric(k)),
            LagSpec::new(364 * day, WindowKind::Symmetric(k)),
        ])
    }
}

pub fn default_weekly_scheme(n_weeks: u32, k: u32, g: Granularity) -> Result<SeasonalityScheme> {
    SeasonalityScheme::weekly(n_weeks, k, g)
}

/// Slots of the contextual subset of `t`, group by group in scheme order and
/// ascending within a group.
pub fn resolve_subset_slots(t: SlotCoord, scheme: &SeasonalityScheme) -> Result<Vec<SlotCoord>> {
    let mut out = Vec::with_capacity(scheme.subset_size());
    for_each_subset_slot(t, scheme, |s| out.push(s))?;
    Ok(out)
}

/// Allocation-free form of [`resolve_subset_slots`].
pub fn for_each_subset_slot(
    t: SlotCoord,
    scheme: &SeasonalityScheme,
    mut visit: impl FnMut(SlotCoord),
) -> Result<()> {
    let span = scheme.span();
    if t.global_slot() < span {
        return Err(QbsdError::InsufficientSpan {
            slot: t.global_slot(),
            deficit: span - t.global_slot(),
        });
    }
    for lag in scheme.lags() {
        for off in lag.relative_offsets() {
            // in range: every offset is >= -span and <= -1
            visit(SlotCoord::new(t.global_slot() - off.unsigned_abs()));
        }
    }
    Ok(())
}
