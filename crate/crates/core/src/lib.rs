//! Quartile-based seasonality decomposition (QBSD).
//!
//! A fit-free forecaster for seasonal time series. The forecast at a slot is
//! the mean of the values inside the interquartile range of a contextual
//! subset drawn from earlier seasons, and the quartiles double as operating
//! bounds for anomaly detection.
//!
//! ```
//! use qbsd::{QbsdConfig, RollingForecaster, Granularity, SlotCoord};
//!
//! let g = Granularity::DAILY;
//! let cfg = QbsdConfig::weekly(4, 1, g, 1.0).unwrap();
//! let mut f = RollingForecaster::new(cfg, g);
//! for day in 0..35u64 {
//!     let v = if day % 7 == 5 { 50.0 } else { 100.0 };
//!     let _ = f.observe(SlotCoord::new(day), v);
//! }
//! let next = f.forecast_at(SlotCoord::new(35)).unwrap();
//! assert!(next.forecast > 0.0);
//! ```

pub mod baselines;
pub mod cli;
pub mod datasets;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod smoothing;
pub mod timegrid;

pub use baselines::{baseline_forecast, parse_baseline, BaselineSpec};
pub use datasets::{DatasetDescriptor, SeriesFrame};
pub use decomposition::{compute_quartiles, compute_residuals, ForecastOutput, QbsdConfig, Quartiles, Residuals};
pub use engine::{History, MultiSeriesEngine, Observation, RollingForecaster};
pub use error::{QbsdError, Result};
pub use metrics::{evaluate, wilcoxon_signed_rank, Alternative, MetricsReport};
pub use smoothing::{smooth, SmootherSpec, StreamingSmoother};
pub use timegrid::{align, Granularity, SeasonalityScheme, SlotCoord};
