//! Threshold choice and the graphical diagnostics that go with it: the
//! mean-excess curve, the Hill curve, the KS distance of a fit, and a
//! parameter-versus-threshold stability table.

use serde::Serialize;
use thiserror::Error;

use crate::gpd::{Estimator, GpdError, GpdParams};

/// Default confidence level for the threshold.
pub const DEFAULT_THRESHOLD_CONFIDENCE: f64 = 0.80;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThresholdError {
    #[error("empty sample")]
    Empty,
    #[error("confidence must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("Hill curve needs at least 2 points, got {0}")]
    TooFew(usize),
    #[error("Hill curve needs positive values; point {index} is {value}")]
    NonPositive { index: usize, value: f64 },
    #[error(transparent)]
    Gpd(#[from] GpdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMethod {
    Quantile,
    MeanExcess,
    Hill,
    Ks,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub mu: f64,
    pub method: ThresholdMethod,
    pub confidence: f64,
    /// Points strictly above `mu`.
    pub n_u: usize,
}

/// 1-based nearest-rank index `ceil(q n)`, clamped to `[1, n]`. A relative
/// slack of a few ulps keeps products such as `0.7 * 10` from rounding up to
/// the next rank.
pub fn nearest_rank(n: usize, q: f64) -> usize {
    let raw = q * n as f64;
    let rank = (raw * (1.0 - 4.0 * f64::EPSILON)).ceil();
    (rank as usize).clamp(1, n)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Threshold at the nearest-rank empirical quantile.
pub fn threshold_by_quantile(
    losses: &[f64],
    confidence: f64,
) -> Result<ThresholdChoice, ThresholdError> {
    if losses.is_empty() {
        return Err(ThresholdError::Empty);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(ThresholdError::InvalidConfidence(confidence));
    }
    let s = sorted(losses);
    let mu = s[nearest_rank(s.len(), confidence) - 1];
    Ok(ThresholdChoice {
        mu,
        method: ThresholdMethod::Quantile,
        confidence,
        n_u: s.iter().filter(|&&x| x > mu).count(),
    })
}

/// Excesses `x - mu` of every point strictly above `mu`, in input order.
pub fn exceedances(losses: &[f64], mu: f64) -> Vec<f64> {
    losses
        .iter()
        .filter(|&&x| x > mu)
        .map(|&x| x - mu)
        .collect()
}

/// Conditional mean excess `e(u) = mean(X - u | X > u)`; thresholds without
/// any exceedance are left out.
pub fn mean_excess_curve(losses: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    thresholds
        .iter()
        .filter_map(|&u| {
            let ex = exceedances(losses, u);
            (!ex.is_empty()).then(|| (u, ex.iter().sum::<f64>() / ex.len() as f64))
        })
        .collect()
}

/// `h(k) = (1/k) sum_{j=1..k} ln X_(n-j+1) - ln X_(n-k)` for `k = 1..n-1`.
pub fn hill_curve(losses: &[f64]) -> Result<Vec<(usize, f64)>, ThresholdError> {
    if losses.len() < 2 {
        return Err(ThresholdError::TooFew(losses.len()));
    }
    if let Some((index, &value)) = losses.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
        return Err(ThresholdError::NonPositive { index, value });
    }
    let desc: Vec<f64> = sorted(losses).into_iter().rev().map(f64::ln).collect();
    let mut top_sum = 0.0;
    Ok((1..desc.len())
        .map(|k| {
            top_sum += desc[k - 1];
            (k, top_sum / k as f64 - desc[k])
        })
        .collect())
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `exceedances`
/// and the GPD with `params`.
pub fn ks_statistic(exceedances: &[f64], params: &GpdParams) -> Result<f64, ThresholdError> {
    if exceedances.is_empty() {
        return Err(ThresholdError::Empty);
    }
    let s = sorted(exceedances);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = params.cdf(x)?;
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub confidence: f64,
    pub u: f64,
    pub n_u: usize,
    /// `(k, sigma, ks)` when the fit at this threshold succeeded.
    pub fit: Option<(f64, f64, f64)>,
}

/// Refits the GPD above each threshold in `confidences` so parameter drift
/// against `u` can be inspected.
pub fn threshold_stability(
    losses: &[f64],
    confidences: &[f64],
    estimator: &Estimator,
) -> Result<Vec<StabilityRow>, ThresholdError> {
    confidences
        .iter()
        .map(|&c| {
            let choice = threshold_by_quantile(losses, c)?;
            let ex = exceedances(losses, choice.mu);
            let fit = estimator
                .fit(&ex)
                .ok()
                .filter(|f| f.converged)
                .and_then(|f| {
                    let ks = ks_statistic(&ex, &f.params).ok()?;
                    Some((f.params.k(), f.params.sigma(), ks))
                });
            Ok(StabilityRow {
                confidence: c,
                u: choice.mu,
                n_u: choice.n_u,
                fit,
            })
        })
        .collect()
}
