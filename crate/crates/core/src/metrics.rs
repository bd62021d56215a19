//! Forecast accuracy metrics and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{QbsdError, Result};

/// Paired actual/forecast values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPairs {
    actual: Vec<f64>,
    predicted: Vec<f64>,
}

impl EvalPairs {
    pub fn new(actual: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(QbsdError::LengthMismatch {
                left: actual.len(),
                right: predicted.len(),
            });
        }
        if actual.is_empty() {
            return Err(QbsdError::EmptyInput);
        }
        if let Some(bad) = actual.iter().chain(&predicted).find(|v| !v.is_finite()) {
            return Err(QbsdError::NonFiniteValue(*bad));
        }
        Ok(EvalPairs { actual, predicted })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// Percent; averaged over points with non-zero actual. NaN when every
    /// actual is zero.
    pub mape: f64,
    /// `None` when the actual values have zero variance.
    pub r2: Option<f64>,
    pub mape_excluded_count: usize,
}

pub fn evaluate(pairs: &EvalPairs) -> Result<MetricsReport> {
    let n = pairs.len();
    let nf = n as f64;
    let (mut abs_sum, mut sq_sum, mut ape_sum, mut ape_n) = (0.0, 0.0, 0.0, 0usize);
    for (&y, &yhat) in pairs.actual.iter().zip(&pairs.predicted) {
        let e = y - yhat;
        abs_sum += e.abs();
        sq_sum += e * e;
        if y != 0.0 {
            ape_sum += (e / y).abs();
            ape_n += 1;
        }
    }
    let mse = sq_sum / nf;
    Ok(MetricsReport {
        n,
        mae: abs_sum / nf,
        mse,
        rmse: mse.sqrt(),
        mape: if ape_n == 0 { f64::NAN } else { ape_sum / ape_n as f64 * 100.0 },
        r2: r_squared(pairs).ok(),
        mape_excluded_count: n - ape_n,
    })
}

pub fn r_squared(pairs: &EvalPairs) -> Result<f64> {
    let n = pairs.len() as f64;
    let mean = pairs.actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = pairs.actual.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(QbsdError::DegenerateVariance);
    }
    let ss_res: f64 = pairs
        .actual
        .iter()
        .zip(&pairs.predicted)
        .map(|(y, yhat)| (y - yhat) * (y - yhat))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    /// `a` tends to be smaller than `b`.
    Less,
    /// `a` tends to be larger than `b`.
    Greater,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WilcoxonMethod {
    /// Exact up to [`EXACT_MAX_PAIRS`] pairs, normal approximation beyond.
    Auto,
    Exact,
    Approximate,
}

pub const EXACT_MAX_PAIRS: usize = 12;
pub const MIN_PAIRS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of positive differences `a - b`.
    pub w_plus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Average ranks (1-based) of `values`, ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64], alternative: Alternative) -> Result<f64> {
    Ok(wilcoxon_signed_rank_with(a, b, alternative, WilcoxonMethod::Auto)?.p_value)
}

pub fn wilcoxon_signed_rank_with(
    a: &[f64],
    b: &[f64],
    alternative: Alternative,
    method: WilcoxonMethod,
) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(QbsdError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if let Some(bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(QbsdError::NonFiniteValue(*bad));
    }
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(QbsdError::TooFewPairs { n, required: MIN_PAIRS });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();

    let exact = match method {
        WilcoxonMethod::Auto => n <= EXACT_MAX_PAIRS,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Approximate => false,
    };
    let p_value = if exact {
        exact_p(&ranks, w_plus, alternative)
    } else {
        normal_p(&abs, w_plus, alternative)
    };
    Ok(WilcoxonResult { w_plus, n, p_value, exact })
}

/// Null distribution of W+ by counting rank subsets. Ranks are doubled so
/// half-integer tie ranks stay integral.
fn exact_p(ranks: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    // counts[s] = number of sign assignments with doubled W+ == s
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let all = 2f64.powi(ranks.len() as i32);
    let observed = (2.0 * w_plus).round() as usize;
    let upper = counts[observed..].iter().sum::<f64>() / all;
    let lower = counts[..=observed].iter().sum::<f64>() / all;
    match alternative {
        Alternative::Greater => upper,
        Alternative::Less => lower,
        Alternative::TwoSided => (2.0 * upper.min(lower)).min(1.0),
    }
}

fn normal_p(abs: &[f64], w_plus: f64, alternative: Alternative) -> f64 {
    let n = abs.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|v| **v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    let std_normal = Normal::standard();
    let sf = |z: f64| 1.0 - std_normal.cdf(z);
    match alternative {
        Alternative::Greater => sf((w_plus - mean - 0.5) / sd),
        Alternative::Less => std_normal.cdf((w_plus - mean + 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((w_plus - mean).abs() - 0.5).max(0.0) / sd;
            (2.0 * sf(z)).min(1.0)
        }
    }
}
