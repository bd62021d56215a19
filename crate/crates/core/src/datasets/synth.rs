use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SeriesFrame;
use crate::error::{QbsdError, Result};
use crate::timegrid::{align, Granularity, SlotCoord};

/// Shape of one day, before the day-of-week scale is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DailyProfile {
    /// Cell-KPI-like day: near `night` around 03:00, a morning shoulder and an
    /// evening peak reaching roughly `peak`.
    Kpi { night: f64, peak: f64 },
    /// One value per slot of the day.
    Custom(Vec<f64>),
}

impl DailyProfile {
    pub fn value(&self, slot_of_day: u64, slots_per_day: u64) -> f64 {
        match self {
            DailyProfile::Kpi { night, peak } => {
                let hour = 24.0 * slot_of_day as f64 / slots_per_day as f64;
                let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2) / 2.0).exp();
                let shape = 0.75 * bump(10.5, 2.5) + bump(19.0, 2.8) + 0.25 * bump(14.5, 3.0);
                // the summed bumps top out just below 1.1 near 19:00
                night + (peak - night) * shape / 1.1
            }
            DailyProfile::Custom(values) => values[(slot_of_day as usize) % values.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// First timestamp, epoch seconds (aligned to the grid).
    pub start_epoch: i64,
    pub days: u32,
    pub granularity: Granularity,
    pub profile: DailyProfile,
    pub weekday_scale: f64,
    pub weekend_scale: f64,
    pub noise_std: f64,
    /// `(slot index from start, additive magnitude)`.
    pub anomalies: Vec<(u64, f64)>,
    /// Half-open `[from, to)` slot-index ranges left out of the output.
    pub gaps: Vec<(u64, u64)>,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Eight noiseless weeks of 15-minute data starting Monday 2023-02-06.
    fn default() -> Self {
        SynthSpec {
            start_epoch: 1_675_641_600,
            days: 56,
            granularity: Granularity::QUARTER_HOURLY,
            profile: DailyProfile::Kpi { night: 5.0, peak: 1000.0 },
            weekday_scale: 1.0,
            weekend_scale: 0.6,
            noise_std: 0.0,
            anomalies: Vec::new(),
            gaps: Vec::new(),
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn total_slots(&self) -> u64 {
        u64::from(self.days) * self.granularity.slots_per_day()
    }

    /// Noise-free, anomaly-free value at a slot index from the start.
    pub fn clean_value(&self, index: u64) -> Result<f64> {
        let first = align(self.start_epoch, self.granularity)?;
        let slot = SlotCoord::new(first.global_slot() + index);
        let g = self.granularity;
        let scale = if slot.day_of_week(g) >= 5 { self.weekend_scale } else { self.weekday_scale };
        Ok(self.profile.value(slot.slot_of_day(g), g.slots_per_day()) * scale)
    }
}

/// Deterministic for a fixed spec (including the seed).
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SeriesFrame> {
    let g = spec.granularity;
    let first = align(spec.start_epoch, g)?;
    if let DailyProfile::Custom(v) = &spec.profile {
        if v.is_empty() {
            return Err(QbsdError::Config("custom daily profile is empty".into()));
        }
    }
    let noise = if spec.noise_std > 0.0 {
        Some(
            Normal::new(0.0, spec.noise_std)
                .map_err(|e| QbsdError::Config(format!("noise std {}: {e}", spec.noise_std)))?,
        )
    } else if spec.noise_std == 0.0 {
        None
    } else {
        return Err(QbsdError::Config(format!("noise std must be >= 0, got {}", spec.noise_std)));
    };
    let total = spec.total_slots();
    if let Some((idx, _)) = spec.anomalies.iter().find(|(i, _)| *i >= total) {
        return Err(QbsdError::Config(format!(
            "anomaly at slot index {idx} lies beyond the {total} generated slots"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut points = Vec::with_capacity(total as usize);
    for i in 0..total {
        // draw before gap filtering so gaps never shift the noise sequence
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        if spec.gaps.iter().any(|&(a, b)| a <= i && i < b) {
            continue;
        }
        let injected: f64 = spec.anomalies.iter().filter(|(at, _)| *at == i).map(|(_, m)| m).sum();
        // counts cannot go negative; injections are added afterwards so they stay exact
        let v = (spec.clean_value(i)? + eps).max(0.0) + injected;
        points.push((SlotCoord::new(first.global_slot() + i), v));
    }
    SeriesFrame::new(g, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_is_weekly_periodic() {
        let spec = SynthSpec::default();
        let f = generate_synthetic(&spec).unwrap();
        assert_eq!(f.len(), 56 * 96);
        let week = spec.granularity.slots_per_week() as usize;
        let pts = f.points();
        assert!((week..pts.len()).all(|i| pts[i].1 == pts[i - week].1));
        // weekends are quieter
        let day = 96;
        let monday_peak = pts[..day].iter().map(|p| p.1).fold(0.0, f64::max);
        let saturday_peak = pts[5 * day..6 * day].iter().map(|p| p.1).fold(0.0, f64::max);
        assert!(saturday_peak < monday_peak);
        assert_eq!(pts[0].0.day_of_week(spec.granularity), 0);
    }

    #[test]
    fn seeded_determinism() {
        let spec = SynthSpec { noise_std: 5.0, seed: 7, ..SynthSpec::default() };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec.clone() };
        assert_ne!(generate_synthetic(&spec).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn single_injection() {
        let clean = generate_synthetic(&SynthSpec::default()).unwrap();
        let spec = SynthSpec { anomalies: vec![(3000, 500.0)], ..SynthSpec::default() };
        let spiked = generate_synthetic(&spec).unwrap();
        for (i, (a, b)) in clean.points().iter().zip(spiked.points()).enumerate() {
            if i == 3000 {
                assert!((b.1 - a.1 - 500.0).abs() < 1e-9);
            } else {
                assert_eq!(a, b);
            }
        }
        let bad = SynthSpec { anomalies: vec![(1_000_000, 1.0)], ..SynthSpec::default() };
        assert!(generate_synthetic(&bad).is_err());
    }

    #[test]
    fn gaps_are_dropped() {
        let spec = SynthSpec { gaps: vec![(10, 20)], noise_std: 1.0, ..SynthSpec::default() };
        let f = generate_synthetic(&spec).unwrap();
        assert_eq!(f.len(), 56 * 96 - 10);
        let full = generate_synthetic(&SynthSpec { gaps: vec![], ..spec }).unwrap();
        assert_eq!(f.points()[10], full.points()[20]);
    }
}
