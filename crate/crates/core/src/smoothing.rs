//! Savitzky–Golay and moving-average smoothing for emitted bound series.
//!
//! Savitzky–Golay edges are handled by fitting the polynomial to the first or
//! last full window and evaluating it at the edge positions, so any polynomial
//! of degree `<= polyorder` is reproduced everywhere. Smoothing is for
//! presentation only and never feeds back into forecasts or metrics.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QbsdError, Result};

pub const DEFAULT_SG_WINDOW: usize = 11;
pub const DEFAULT_SG_POLYORDER: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SmootherSpec {
    SavitzkyGolay { window_length: usize, polyorder: usize },
    MovingAverage { window: usize },
    #[default]
    None,
}

impl SmootherSpec {
    pub fn savitzky_golay(window_length: usize, polyorder: usize) -> Result<Self> {
        validate_sg(window_length, polyorder)?;
        Ok(SmootherSpec::SavitzkyGolay { window_length, polyorder })
    }

    pub fn window(&self) -> usize {
        match *self {
            SmootherSpec::SavitzkyGolay { window_length, .. } => window_length,
            SmootherSpec::MovingAverage { window } => window,
            SmootherSpec::None => 1,
        }
    }
}

/// Parses `none`, `ma:<window>`, `sg:<window>:<polyorder>` or `sg` (defaults).
impl FromStr for SmootherSpec {
    type Err = QbsdError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| QbsdError::InvalidWindow(format!("`{p}` is not a non-negative integer")))
        };
        let spec = match parts.as_slice() {
            ["none"] | [""] => SmootherSpec::None,
            ["sg"] => SmootherSpec::SavitzkyGolay {
                window_length: DEFAULT_SG_WINDOW,
                polyorder: DEFAULT_SG_POLYORDER,
            },
            ["sg", w, p] => SmootherSpec::SavitzkyGolay {
                window_length: num(w)?,
                polyorder: num(p)?,
            },
            ["ma", w] => SmootherSpec::MovingAverage { window: num(w)? },
            _ => {
                return Err(QbsdError::InvalidWindow(format!(
                    "unrecognised smoother `{s}`; expected none, ma:W or sg:W:P"
                )))
            }
        };
        Kernel::compile(spec)?;
        Ok(spec)
    }
}

impl fmt::Display for SmootherSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmootherSpec::SavitzkyGolay { window_length, polyorder } => {
                write!(f, "sg:{window_length}:{polyorder}")
            }
            SmootherSpec::MovingAverage { window } => write!(f, "ma:{window}"),
            SmootherSpec::None => f.write_str("none"),
        }
    }
}

fn validate_sg(window_length: usize, polyorder: usize) -> Result<()> {
    if window_length < 3 || window_length.is_multiple_of(2) {
        return Err(QbsdError::InvalidWindow(format!(
            "window length must be odd and at least 3, got {window_length}"
        )));
    }
    if polyorder >= window_length {
        return Err(QbsdError::InvalidWindow(format!(
            "polyorder {polyorder} must be less than window length {window_length}"
        )));
    }
    Ok(())
}

/// `(A^T A)^-1 A^T` for the Vandermonde matrix on offsets `-h..=h`, via QR.
/// Row `j` maps a window to the fitted coefficient of `x^j`.
fn fit_matrix(window_length: usize, polyorder: usize) -> DMatrix<f64> {
    let half = (window_length / 2) as f64;
    let vander = DMatrix::from_fn(window_length, polyorder + 1, |i, j| (i as f64 - half).powi(j as i32));
    let qr = vander.qr();
    let r = qr.r();
    let qt = qr.q().transpose();
    r.solve_upper_triangular(&qt)
        .expect("Vandermonde on distinct nodes has full column rank")
}

/// Convolution weights, in window order, for the `derivative`-th derivative
/// of the local least-squares polynomial at the window centre.
pub fn savgol_coefficients(window_length: usize, polyorder: usize, derivative: usize) -> Result<Vec<f64>> {
    validate_sg(window_length, polyorder)?;
    if derivative > polyorder {
        return Ok(vec![0.0; window_length]);
    }
    let fit = fit_matrix(window_length, polyorder);
    let factorial: f64 = (1..=derivative).map(|v| v as f64).product();
    Ok(fit.row(derivative).iter().map(|w| w * factorial).collect())
}

#[derive(Debug, Clone)]
enum Kernel {
    Identity,
    Sg {
        half: usize,
        center: Vec<f64>,
        // edge[j]: weights evaluating the window fit at window position j
        edge: Vec<Vec<f64>>,
    },
    Ma {
        left: usize,
        right: usize,
    },
}

impl Kernel {
    fn compile(spec: SmootherSpec) -> Result<Kernel> {
        match spec {
            SmootherSpec::None => Ok(Kernel::Identity),
            SmootherSpec::MovingAverage { window: 0 } => {
                Err(QbsdError::InvalidWindow("moving-average window must be at least 1".into()))
            }
            SmootherSpec::MovingAverage { window: 1 } => Ok(Kernel::Identity),
            SmootherSpec::MovingAverage { window } => Ok(Kernel::Ma {
                left: (window - 1) / 2,
                right: window / 2,
            }),
            SmootherSpec::SavitzkyGolay { window_length, polyorder } => {
                let center = savgol_coefficients(window_length, polyorder, 0)?;
                let fit = fit_matrix(window_length, polyorder);
                let half = window_length / 2;
                let edge = (0..window_length)
                    .map(|pos| {
                        let x = pos as f64 - half as f64;
                        (0..window_length)
                            .map(|col| (0..=polyorder).map(|j| x.powi(j as i32) * fit[(j, col)]).sum())
                            .collect()
                    })
                    .collect();
                Ok(Kernel::Sg { half, center, edge })
            }
        }
    }

    fn window(&self) -> usize {
        match self {
            Kernel::Identity => 1,
            Kernel::Sg { half, .. } => 2 * half + 1,
            Kernel::Ma { left, right } => left + right + 1,
        }
    }

    fn lookahead(&self) -> usize {
        match self {
            Kernel::Identity => 0,
            Kernel::Sg { half, .. } => *half,
            Kernel::Ma { right, .. } => *right,
        }
    }

    /// Smoothed value at position `i` of a segment of final length `n`
    /// (`n >= window`); `get` must cover every index the kernel touches.
    fn eval(&self, i: usize, n: usize, get: impl Fn(usize) -> f64) -> f64 {
        let dot = |w: &[f64], start: usize| w.iter().enumerate().map(|(j, w)| w * get(start + j)).sum();
        match self {
            Kernel::Identity => get(i),
            Kernel::Sg { half, center, edge } => {
                let w = 2 * half + 1;
                if i < *half {
                    dot(&edge[i], 0)
                } else if i + half >= n {
                    dot(&edge[i + w - n], n - w)
                } else {
                    dot(center, i - half)
                }
            }
            Kernel::Ma { left, right } => {
                let lo = i.saturating_sub(*left);
                let hi = (i + right).min(n - 1);
                (lo..=hi).map(&get).sum::<f64>() / (hi - lo + 1) as f64
            }
        }
    }
}

/// Smooth a gap-free series. Output has the same length as the input.
pub fn smooth(series: &[f64], spec: SmootherSpec) -> Result<Vec<f64>> {
    let kernel = Kernel::compile(spec)?;
    let w = kernel.window();
    if series.len() < w {
        return Err(QbsdError::SeriesTooShort { len: series.len(), window: w });
    }
    let n = series.len();
    Ok((0..n).map(|i| kernel.eval(i, n, |j| series[j])).collect())
}

/// Smooth each run of present values independently. Runs shorter than the
/// window are passed through unchanged.
pub fn smooth_gapped(series: &[Option<f64>], spec: SmootherSpec) -> Result<Vec<Option<f64>>> {
    let mut s = StreamingSmoother::new(spec)?;
    let mut out = Vec::with_capacity(series.len());
    for v in series {
        out.extend(s.push(*v));
    }
    out.extend(s.finish());
    Ok(out)
}

/// Incremental form of [`smooth_gapped`] holding at most one window of values.
/// Each input position yields exactly one output, in order, once enough
/// lookahead has arrived.
#[derive(Debug, Clone)]
pub struct StreamingSmoother {
    kernel: Kernel,
    buf: VecDeque<f64>,
    seg_len: usize,
    emitted: usize,
}

impl StreamingSmoother {
    pub fn new(spec: SmootherSpec) -> Result<Self> {
        let kernel = Kernel::compile(spec)?;
        Ok(StreamingSmoother {
            buf: VecDeque::with_capacity(kernel.window()),
            kernel,
            seg_len: 0,
            emitted: 0,
        })
    }

    /// Positions received but not yet emitted.
    pub fn pending(&self) -> usize {
        self.seg_len - self.emitted
    }

    fn get(&self, abs: usize) -> f64 {
        self.buf[abs - (self.seg_len - self.buf.len())]
    }

    pub fn push(&mut self, value: Option<f64>) -> Vec<Option<f64>> {
        let Some(v) = value else {
            let mut out = self.flush();
            out.push(None);
            return out;
        };
        let w = self.kernel.window();
        self.buf.push_back(v);
        self.seg_len += 1;
        let mut out = Vec::new();
        if self.seg_len >= w {
            let ready = self.seg_len - self.kernel.lookahead();
            // final length unknown, but every ready position is interior or a
            // leading edge, neither of which depends on it
            let n = usize::MAX;
            while self.emitted < ready {
                out.push(Some(self.kernel.eval(self.emitted, n, |j| self.get(j))));
                self.emitted += 1;
            }
        }
        if self.buf.len() > w {
            self.buf.pop_front();
        }
        out
    }

    fn flush(&mut self) -> Vec<Option<f64>> {
        let n = self.seg_len;
        let out = if n < self.kernel.window() {
            self.buf.iter().skip(self.emitted).map(|v| Some(*v)).collect()
        } else {
            (self.emitted..n)
                .map(|i| Some(self.kernel.eval(i, n, |j| self.get(j))))
                .collect()
        };
        self.buf.clear();
        self.seg_len = 0;
        self.emitted = 0;
        out
    }

    /// Emit everything still pending at end of input.
    pub fn finish(&mut self) -> Vec<Option<f64>> {
        self.flush()
    }
}
