//! Reference forecasters for comparison tables. Like the QBSD forecast they
//! only read slots strictly before the target.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::History;
use crate::error::{QbsdError, Result};
use crate::timegrid::{Granularity, SlotCoord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineSpec {
    SeasonalNaive { season_slots: u64 },
    Persistence,
    MovingAverage { window_slots: u64 },
}

impl BaselineSpec {
    /// One week back, whatever the grid.
    pub fn seasonal_naive_weekly(g: Granularity) -> Self {
        BaselineSpec::SeasonalNaive {
            season_slots: g.slots_per_week(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineSpec::SeasonalNaive { season_slots: 0 } => {
                Err(QbsdError::Config("season length must be at least one slot".into()))
            }
            BaselineSpec::MovingAverage { window_slots: 0 } => {
                Err(QbsdError::Config("moving-average window must be at least one slot".into()))
            }
            _ => Ok(()),
        }
    }

    /// Slots of history this baseline reaches back.
    pub fn lookback(&self) -> u64 {
        match *self {
            BaselineSpec::SeasonalNaive { season_slots } => season_slots,
            BaselineSpec::Persistence => 1,
            BaselineSpec::MovingAverage { window_slots } => window_slots,
        }
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineSpec::SeasonalNaive { season_slots } => write!(f, "seasonal-naive:{season_slots}"),
            BaselineSpec::Persistence => f.write_str("persistence"),
            BaselineSpec::MovingAverage { window_slots } => write!(f, "moving-average:{window_slots}"),
        }
    }
}

/// Parses `seasonal-naive:<slots>`, `persistence` or `moving-average:<slots>`.
/// Use [`parse_baseline`] to get the grid-dependent default season.
impl FromStr for BaselineSpec {
    type Err = QbsdError;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let slots = |a: Option<&str>| -> Result<u64> {
            let a = a.ok_or_else(|| QbsdError::Config(format!("baseline `{name}` needs a slot count")))?;
            a.parse()
                .map_err(|_| QbsdError::Config(format!("`{a}` is not a slot count")))
        };
        let spec = match name {
            "seasonal-naive" | "snaive" => BaselineSpec::SeasonalNaive { season_slots: slots(arg)? },
            "persistence" | "naive" => BaselineSpec::Persistence,
            "moving-average" | "ma" => BaselineSpec::MovingAverage { window_slots: slots(arg)? },
            other => return Err(QbsdError::Config(format!("unknown baseline `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Like `FromStr`, but a bare `seasonal-naive` means one week on grid `g` and
/// a bare `moving-average` means one day.
pub fn parse_baseline(s: &str, g: Granularity) -> Result<BaselineSpec> {
    match s {
        "seasonal-naive" | "snaive" => Ok(BaselineSpec::seasonal_naive_weekly(g)),
        "moving-average" | "ma" => Ok(BaselineSpec::MovingAverage {
            window_slots: g.slots_per_day(),
        }),
        _ => s.parse(),
    }
}

pub fn baseline_forecast(history: &impl History, t: SlotCoord, spec: &BaselineSpec) -> Result<f64> {
    let back = |n: u64| t.global_slot().checked_sub(n).map(SlotCoord::new);
    let missing = |present: usize, required: usize| QbsdError::InsufficientHistory { present, required };
    match *spec {
        BaselineSpec::SeasonalNaive { season_slots } => back(season_slots)
            .and_then(|s| history.value_at(s))
            .ok_or(missing(0, 1)),
        BaselineSpec::Persistence => back(1).and_then(|s| history.value_at(s)).ok_or(missing(0, 1)),
        BaselineSpec::MovingAverage { window_slots } => {
            let (sum, n) = (1..=window_slots)
                .filter_map(|d| back(d).and_then(|s| history.value_at(s)))
                .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
            if n == 0 {
                Err(missing(0, 1))
            } else {
                Ok(sum / n as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    struct Map(HashMap<u64, f64>);

    impl History for Map {
        fn value_at(&self, slot: SlotCoord) -> Option<f64> {
            self.0.get(&slot.global_slot()).copied()
        }
    }

    fn series(f: impl Fn(u64) -> f64, n: u64) -> Map {
        Map((0..n).map(|s| (s, f(s))).collect())
    }

    #[test]
    fn seasonal_naive_on_periodic_series() {
        let g = Granularity::QUARTER_HOURLY;
        let week = g.slots_per_week();
        let f = |s: u64| ((s % week) as f64).sin() * 10.0 + 50.0;
        let h = series(f, 3 * week);
        let spec = BaselineSpec::seasonal_naive_weekly(g);
        for t in week..3 * week {
            assert_eq!(baseline_forecast(&h, SlotCoord::new(t), &spec).unwrap(), f(t));
        }
        assert!(baseline_forecast(&h, SlotCoord::new(week - 1), &spec).is_err());
    }

    #[test]
    fn persistence_and_moving_average() {
        let h = series(|_| 7.0, 10);
        assert_eq!(baseline_forecast(&h, SlotCoord::new(5), &BaselineSpec::Persistence).unwrap(), 7.0);
        assert!(baseline_forecast(&h, SlotCoord::new(0), &BaselineSpec::Persistence).is_err());

        // values 1, 2, 3, ... at slots 1, 2, 3, ...
        let ramp = Map((1..10).map(|s| (s, s as f64)).collect());
        let ma3 = BaselineSpec::MovingAverage { window_slots: 3 };
        assert_eq!(baseline_forecast(&ramp, SlotCoord::new(4), &ma3).unwrap(), 2.0);
        // partial window at the start uses what is there
        assert_eq!(baseline_forecast(&ramp, SlotCoord::new(2), &ma3).unwrap(), 1.0);
    }

    #[test]
    fn baselines_ignore_target_and_future() {
        let mut h = series(|s| s as f64, 50);
        let t = SlotCoord::new(30);
        let specs = [
            BaselineSpec::Persistence,
            BaselineSpec::SeasonalNaive { season_slots: 7 },
            BaselineSpec::MovingAverage { window_slots: 5 },
        ];
        let before: Vec<_> = specs.iter().map(|s| baseline_forecast(&h, t, s).unwrap()).collect();
        for s in 30..50 {
            h.0.insert(s, -1e9);
        }
        let after: Vec<_> = specs.iter().map(|s| baseline_forecast(&h, t, s).unwrap()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn parsing() {
        let g = Granularity::DAILY;
        assert_eq!(parse_baseline("seasonal-naive", g).unwrap(), BaselineSpec::SeasonalNaive { season_slots: 7 });
        assert_eq!(parse_baseline("ma", g).unwrap(), BaselineSpec::MovingAverage { window_slots: 1 });
        assert_eq!(parse_baseline("moving-average:3", g).unwrap(), BaselineSpec::MovingAverage { window_slots: 3 });
        assert_eq!(parse_baseline("persistence", g).unwrap(), BaselineSpec::Persistence);
        assert!(parse_baseline("seasonal-naive:0", g).is_err());
        assert!(parse_baseline("prophet", g).is_err());
        let s: BaselineSpec = "seasonal-naive:672".parse().unwrap();
        assert_eq!(s.to_string().parse::<BaselineSpec>().unwrap(), s);
    }
}
