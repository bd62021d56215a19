use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::parse_timestamp;
use super::synth::SynthSpec;
use crate::error::{QbsdError, Result};
use crate::timegrid::{align, Granularity, LagSpec, SeasonalityScheme, WindowKind};

/// Named recipe for building a [`SeasonalityScheme`] on a given grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeRecipe {
    /// Current week plus `n - 1` previous weeks.
    Weekly(u32),
    WeeklyPlusYearly,
    /// Extra lag groups after the implied unlagged past window, as
    /// `(lag seconds, window kind)`; the kind carries no `k` yet.
    Custom(Vec<(u64, CustomWindow)>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CustomWindow {
    Past,
    Symmetric,
    Forward,
}

impl SchemeRecipe {
    pub fn build(&self, k: u32, g: Granularity) -> Result<SeasonalityScheme> {
        match self {
            SchemeRecipe::Weekly(n) => SeasonalityScheme::weekly(*n, k, g),
            SchemeRecipe::WeeklyPlusYearly => SeasonalityScheme::weekly_plus_yearly(k, g),
            SchemeRecipe::Custom(groups) => {
                let mut lags = vec![LagSpec::new(0, WindowKind::Past(k))];
                for &(secs, kind) in groups {
                    let lag = g.slots_in(secs).ok_or_else(|| {
                        QbsdError::InvalidScheme(format!("lag of {secs} s is not a whole number of slots"))
                    })?;
                    let window = match kind {
                        CustomWindow::Past => WindowKind::Past(k),
                        CustomWindow::Symmetric => WindowKind::Symmetric(k),
                        CustomWindow::Forward => WindowKind::ForwardInclusive(k),
                    };
                    lags.push(LagSpec::new(lag, window));
                }
                SeasonalityScheme::new(lags)
            }
        }
    }
}

/// `weekly4`, `weekly6`, `weekly<N>`, `weekly_plus_yearly` or
/// `custom:7d/sym,14d/sym,21d/fwd`.
impl FromStr for SchemeRecipe {
    type Err = QbsdError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "weekly_plus_yearly" || s == "weekly-plus-yearly" {
            return Ok(SchemeRecipe::WeeklyPlusYearly);
        }
        if let Some(n) = s.strip_prefix("weekly") {
            return n
                .parse()
                .map(SchemeRecipe::Weekly)
                .map_err(|_| QbsdError::InvalidScheme(format!("bad week count in `{s}`")));
        }
        if let Some(spec) = s.strip_prefix("custom:") {
            let groups = spec
                .split(',')
                .map(|g| {
                    let (lag, kind) = g.split_once('/').ok_or_else(|| {
                        QbsdError::InvalidScheme(format!("lag group `{g}` must look like 7d/sym"))
                    })?;
                    let kind = match kind {
                        "past" => CustomWindow::Past,
                        "sym" => CustomWindow::Symmetric,
                        "fwd" => CustomWindow::Forward,
                        other => return Err(QbsdError::InvalidScheme(format!("unknown window `{other}`"))),
                    };
                    Ok((parse_duration_secs(lag)?, kind))
                })
                .collect::<Result<_>>()?;
            return Ok(SchemeRecipe::Custom(groups));
        }
        Err(QbsdError::InvalidScheme(format!("unknown scheme `{s}`")))
    }
}

impl fmt::Display for SchemeRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeRecipe::Weekly(n) => write!(f, "weekly{n}"),
            SchemeRecipe::WeeklyPlusYearly => f.write_str("weekly_plus_yearly"),
            SchemeRecipe::Custom(groups) => {
                f.write_str("custom:")?;
                for (i, (secs, kind)) in groups.iter().enumerate() {
                    let kind = match kind {
                        CustomWindow::Past => "past",
                        CustomWindow::Symmetric => "sym",
                        CustomWindow::Forward => "fwd",
                    };
                    write!(f, "{}{secs}s/{kind}", if i > 0 { "," } else { "" })?;
                }
                Ok(())
            }
        }
    }
}

/// `90`, `90s`, `15m`, `2h`, `1d`, `6w`.
pub fn parse_duration_secs(s: &str) -> Result<u64> {
    let s = s.trim();
    let split = s.find(|c: char| !c.is_ascii_digit()).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let n: u64 = num
        .parse()
        .map_err(|_| QbsdError::Config(format!("`{s}` is not a duration")))?;
    let mult = match unit {
        "" | "s" => 1,
        "m" | "min" => 60,
        "h" => 3600,
        "d" => 86_400,
        "w" => 604_800,
        _ => return Err(QbsdError::Config(format!("unknown duration unit in `{s}`"))),
    };
    Ok(n * mult)
}

/// A bare integer counts slots; anything with a unit is a duration that must
/// be a whole number of slots.
pub fn parse_slots(s: &str, g: Granularity) -> Result<u64> {
    if let Ok(n) = s.trim().parse::<u64>() {
        return Ok(n);
    }
    let secs = parse_duration_secs(s)?;
    g.slots_in(secs).ok_or_else(|| {
        QbsdError::Config(format!("`{s}` is not a whole number of {} s slots", g.interval_seconds()))
    })
}

/// Everything needed to evaluate one dataset: grid, columns, QBSD parameters
/// and the moving-window protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub granularity: Granularity,
    pub timestamp_column: String,
    pub target_column: String,
    /// Slots of trailing history visible to each forecast.
    pub train_window_slots: u64,
    pub k_slots: u32,
    pub recipe: SchemeRecipe,
    pub scheme: SeasonalityScheme,
    /// Inclusive test range, epoch seconds.
    pub test_start: i64,
    pub test_end: i64,
}

impl DatasetDescriptor {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        granularity: Granularity,
        timestamp_column: &str,
        target_column: &str,
        train_window_secs: u64,
        k_secs: u64,
        recipe: SchemeRecipe,
        test_start: i64,
        test_end: i64,
    ) -> Result<Self> {
        let k_slots = granularity.slots_in(k_secs).ok_or_else(|| {
            QbsdError::Config(format!("{name}: k of {k_secs} s is not a whole number of slots"))
        })?;
        let train_window_slots = granularity.slots_in(train_window_secs).ok_or_else(|| {
            QbsdError::Config(format!("{name}: training window is not a whole number of slots"))
        })?;
        let k_slots = u32::try_from(k_slots).map_err(|_| QbsdError::Config(format!("{name}: k too large")))?;
        let scheme = recipe.build(k_slots, granularity)?;
        let desc = DatasetDescriptor {
            name: name.to_owned(),
            granularity,
            timestamp_column: timestamp_column.to_owned(),
            target_column: target_column.to_owned(),
            train_window_slots,
            k_slots,
            recipe,
            scheme,
            test_start,
            test_end,
        };
        desc.validate()?;
        Ok(desc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_window_slots < self.scheme.span() {
            return Err(QbsdError::Config(format!(
                "{}: training window of {} slots is shorter than the {}-slot scheme span",
                self.name,
                self.train_window_slots,
                self.scheme.span()
            )));
        }
        let start = align(self.test_start, self.granularity)?;
        let end = align(self.test_end, self.granularity)?;
        if start > end {
            return Err(QbsdError::Config(format!("{}: test range ends before it starts", self.name)));
        }
        Ok(())
    }

    /// Same dataset with a different context period or scheme.
    pub fn with_scheme(&self, k_slots: u32, recipe: SchemeRecipe) -> Result<Self> {
        let mut d = self.clone();
        d.scheme = recipe.build(k_slots, self.granularity)?;
        d.k_slots = k_slots;
        d.recipe = recipe;
        d.validate()?;
        Ok(d)
    }
}

fn ts(s: &str) -> i64 {
    parse_timestamp(s).expect("builtin timestamps are well-formed")
}

const DAY: u64 = 86_400;
const HOUR: u64 = 3_600;

/// Descriptors for the public benchmark datasets plus the built-in synthetic
/// KPI series. "1 month" windows are 28 days; "1 year" is 365 days, or 366 for
/// daily data with a ±2 day window around the 364-day lag.
pub fn builtin_descriptors() -> Vec<DatasetDescriptor> {
    let synth = SynthSpec::default();
    let synth_test_start = synth.start_epoch + 28 * DAY as i64;
    let synth_test_end = synth.start_epoch + i64::from(synth.days) * DAY as i64 - 900;
    [
        DatasetDescriptor::new(
            "births2015",
            Granularity::DAILY,
            "date",
            "births",
            42 * DAY,
            DAY,
            SchemeRecipe::Weekly(6),
            ts("2015-02-01"),
            ts("2015-02-28"),
        ),
        DatasetDescriptor::new(
            "electricity-demand",
            Granularity::DAILY,
            "date",
            "demand",
            366 * DAY,
            2 * DAY,
            SchemeRecipe::WeeklyPlusYearly,
            ts("2016-01-01"),
            ts("2016-01-31"),
        ),
        DatasetDescriptor::new(
            "bitcoin",
            Granularity::DAILY,
            "date",
            "transactions",
            28 * DAY,
            2 * DAY,
            SchemeRecipe::Weekly(4),
            ts("2016-01-01"),
            ts("2016-12-31"),
        ),
        DatasetDescriptor::new(
            "electricity",
            Granularity::HOURLY,
            "date",
            "MT_320",
            365 * DAY,
            2 * HOUR,
            SchemeRecipe::WeeklyPlusYearly,
            ts("2013-01-01T00:00:00"),
            ts("2013-01-31T23:00:00"),
        ),
        DatasetDescriptor::new(
            "weather",
            Granularity::HOURLY,
            "date",
            "WetBulbFarenheit",
            365 * DAY,
            2 * HOUR,
            SchemeRecipe::WeeklyPlusYearly,
            ts("2011-03-01T00:00:00"),
            ts("2011-03-07T23:00:00"),
        ),
        DatasetDescriptor::new(
            "eon1-cell-f",
            Granularity::QUARTER_HOURLY,
            "timestamp",
            "E",
            28 * DAY,
            HOUR,
            SchemeRecipe::Weekly(4),
            ts("2023-04-01T00:00:00"),
            ts("2023-04-30T23:45:00"),
        ),
        DatasetDescriptor::new(
            "synthetic",
            Granularity::QUARTER_HOURLY,
            "timestamp",
            "value",
            28 * DAY,
            0,
            SchemeRecipe::Weekly(4),
            synth_test_start,
            synth_test_end,
        ),
    ]
    .into_iter()
    .map(|d| d.expect("builtin descriptors are valid"))
    .collect()
}

pub fn builtin_descriptor(name: &str) -> Option<DatasetDescriptor> {
    builtin_descriptors().into_iter().find(|d| d.name == name)
}
