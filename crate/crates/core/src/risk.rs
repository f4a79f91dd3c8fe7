//! Monthly Value-at-Risk from per-window tail fits, the risk fluctuation
//! range (month-over-month VaR slope) and its sign summary.
//!
//! The tail quantile is the standard peaks-over-threshold form written in the
//! `(1 - k x / sigma)` parameterization:
//!
//! ```text
//! VaR = mu + (sigma / k) * (1 - ((n / n_u) * (1 - p))^k)      k != 0
//! VaR = mu + sigma * ln(n_u / (n * (1 - p)))                  k == 0
//! ```
//!
//! With `mu = 0` and `n = n_u` it reduces to the GPD quantile at `p`, and at
//! `p = 1 - n_u / n` it equals the threshold.

use serde::Serialize;
use thiserror::Error;

use crate::gpd::{Estimator, GpdError, GpdFit};
use crate::ingest::{MonthKey, MonthPartition};
use crate::returns::ExcessReturnSeries;
use crate::threshold::{exceedances, threshold_by_quantile, ThresholdChoice};

pub const DEFAULT_VAR_P: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error(
        "threshold confidence {threshold} and VaR level {p} must satisfy 0 < threshold < p < 1"
    )]
    InvalidLevels { threshold: f64, p: f64 },
    #[error("VaR level {p} is below the threshold's own level {level}")]
    LevelBelowThreshold { p: f64, level: f64 },
    #[error("pool window must be at least one month")]
    InvalidPoolWindow,
    #[error("no values to summarize")]
    Empty,
    #[error(transparent)]
    Gpd(#[from] GpdError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarConfig {
    pub threshold_confidence: f64,
    pub p: f64,
    pub estimator: Estimator,
}

impl Default for VarConfig {
    fn default() -> Self {
        Self {
            threshold_confidence: crate::threshold::DEFAULT_THRESHOLD_CONFIDENCE,
            p: DEFAULT_VAR_P,
            estimator: Estimator::ProfileMle,
        }
    }
}

impl VarConfig {
    pub fn validate(&self) -> Result<(), RiskError> {
        let (t, p) = (self.threshold_confidence, self.p);
        if !(t > 0.0 && t < p && p < 1.0) {
            return Err(RiskError::InvalidLevels { threshold: t, p });
        }
        if let Estimator::ZhangLm { r } = self.estimator {
            if !(r.is_finite() && r < 0.5 && r != 0.0) {
                return Err(GpdError::InvalidR(r).into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarStatus {
    Ok,
    SkippedMinObs,
    FitFailed,
}

impl VarStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            VarStatus::Ok => "ok",
            VarStatus::SkippedMinObs => "skipped_min_obs",
            VarStatus::FitFailed => "fit_failed",
        }
    }
}

/// Why a window that passed `min_obs` still produced no VaR.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFailure {
    /// The fitter rejected the exceedances (too few, all equal, ...).
    Rejected(String),
    NotConverged,
    LevelBelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarPoint {
    pub entity_id: String,
    pub month: MonthKey,
    pub var: Option<f64>,
    pub p: f64,
    pub status: VarStatus,
    /// Observations in the fitted window (including pooled months).
    pub n: usize,
    pub threshold: Option<ThresholdChoice>,
    pub fit: Option<GpdFit>,
    pub failure: Option<FitFailure>,
}

impl VarPoint {
    pub fn is_ok(&self) -> bool {
        self.status == VarStatus::Ok
    }

    pub fn skipped(entity_id: &str, month: MonthKey, n: usize, p: f64) -> Self {
        Self {
            entity_id: entity_id.to_owned(),
            month,
            var: None,
            p,
            status: VarStatus::SkippedMinObs,
            n,
            threshold: None,
            fit: None,
            failure: None,
        }
    }
}

/// Tail quantile at level `p` implied by a fit with threshold `fit.mu`.
/// `p` must not sit below the threshold's empirical level `1 - n_u / n`.
pub fn var_from_fit(fit: &GpdFit, p: f64) -> Result<f64, RiskError> {
    let level = 1.0 - fit.n_u as f64 / fit.n as f64;
    let ratio = fit.n as f64 / fit.n_u as f64 * (1.0 - p);
    if !(p < 1.0) || ratio > 1.0 + 1e-12 {
        return Err(RiskError::LevelBelowThreshold { p, level });
    }
    let params = &fit.params;
    if params.is_exponential() {
        return Ok(fit.mu - params.sigma() * ratio.ln());
    }
    let k = params.k();
    Ok(fit.mu - (params.sigma() / k) * (k * ratio.ln()).exp_m1())
}

/// Threshold, fit and VaR for one window of losses.
pub fn var_for_window(
    entity_id: &str,
    month: MonthKey,
    losses: &[f64],
    config: &VarConfig,
) -> VarPoint {
    let mut point = VarPoint {
        entity_id: entity_id.to_owned(),
        month,
        var: None,
        p: config.p,
        status: VarStatus::FitFailed,
        n: losses.len(),
        threshold: None,
        fit: None,
        failure: None,
    };
    let choice = match threshold_by_quantile(losses, config.threshold_confidence) {
        Ok(c) => c,
        Err(e) => {
            point.failure = Some(FitFailure::Rejected(e.to_string()));
            return point;
        }
    };
    point.threshold = Some(choice);
    let excess = exceedances(losses, choice.mu);
    let fit = match config.estimator.fit(&excess) {
        Ok(f) => f.with_threshold(choice.mu, losses.len()),
        Err(e) => {
            point.failure = Some(FitFailure::Rejected(e.to_string()));
            return point;
        }
    };
    if !fit.converged {
        point.fit = Some(fit);
        point.failure = Some(FitFailure::NotConverged);
        return point;
    }
    let level = 1.0 - fit.n_u as f64 / fit.n as f64;
    let var = if config.p > level {
        var_from_fit(&fit, config.p).ok()
    } else {
        None
    };
    point.fit = Some(fit);
    match var {
        Some(v) => {
            point.var = Some(v);
            point.status = VarStatus::Ok;
        }
        None => point.failure = Some(FitFailure::LevelBelowThreshold),
    }
    point
}

/// One VaR point per calendar month of `returns`, in month order. With
/// `pool_window > 1` each fit also uses the losses of the preceding
/// `pool_window - 1` calendar months.
pub fn monthly_var(
    returns: &ExcessReturnSeries,
    partition: &MonthPartition,
    config: &VarConfig,
    pool_window: usize,
) -> Result<Vec<VarPoint>, RiskError> {
    config.validate()?;
    if pool_window == 0 {
        return Err(RiskError::InvalidPoolWindow);
    }
    let months = partition.months();
    let entity = returns.entity_id();
    Ok(months
        .iter()
        .enumerate()
        .map(|(i, (month, span, kept))| {
            if !kept {
                return VarPoint::skipped(entity, *month, span.len(), config.p);
            }
            let first = months[..=i]
                .iter()
                .rev()
                .take_while(|(m, _, _)| m.months_until(*month) < pool_window as i64)
                .last()
                .map(|(_, s, _)| s.start)
                .unwrap_or(span.start);
            var_for_window(entity, *month, &returns.losses_in(first..span.end), config)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RfrPoint {
    pub entity_id: String,
    pub from: MonthKey,
    pub to: MonthKey,
    pub rfr: f64,
}

/// Slope of VaR between adjacent calendar months, per month. A pair is
/// emitted only when both months are `ok`; skipped, failed or absent months
/// break the chain.
pub fn rfr_series(points: &[VarPoint]) -> Vec<RfrPoint> {
    points
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (&w[0], &w[1]);
            match (a.var, b.var) {
                (Some(va), Some(vb)) if a.is_ok() && b.is_ok() && a.month.next() == b.month => {
                    Some(RfrPoint {
                        entity_id: b.entity_id.clone(),
                        from: a.month,
                        to: b.month,
                        rfr: (vb - va) / 1.0,
                    })
                }
                _ => None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignFractions {
    pub above: f64,
    pub below: f64,
    pub zero: f64,
    pub count: usize,
}

/// Fractions of RFR values above, below and exactly at zero.
pub fn sign_fractions<I: IntoIterator<Item = f64>>(values: I) -> Result<SignFractions, RiskError> {
    let (mut above, mut below, mut count) = (0usize, 0usize, 0usize);
    for v in values {
        count += 1;
        if v > 0.0 {
            above += 1;
        } else if v < 0.0 {
            below += 1;
        }
    }
    if count == 0 {
        return Err(RiskError::Empty);
    }
    let n = count as f64;
    Ok(SignFractions {
        above: above as f64 / n,
        below: below as f64 / n,
        zero: (count - above - below) as f64 / n,
        count,
    })
}
