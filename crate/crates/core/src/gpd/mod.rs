//! Generalized Pareto distribution and its two fitters.
//!
//! Both fitters reduce the two-parameter problem to a search over
//! `b = k / sigma` on `b < 1 / max(X)`: for a fixed `b` the shape follows as
//! `k(b) = -mean(ln(1 - b X))` and the scale as `sigma = k / b`.
//!
//! * [`fit_profile_mle`] solves the profile score equation
//!   `mean((1 - bX)^-1) - (1 + mean(ln(1 - bX)))^-1 = 0` and keeps the root
//!   with the highest log-likelihood, subject to `k <= 1`.
//! * [`fit_zhang_lm`] solves the likelihood-moment equation
//!   `mean((1 - bX)^p) - 1/(1 - r) = 0` with `p = r n / sum(ln(1 - bX))`,
//!   which has a single root for `r < 1/2, r != 0`.

mod dist;
mod profile;
mod zhang;

pub use dist::{gpd_cdf, gpd_log_likelihood, gpd_quantile, GpdParams, K_BRANCH_TOL};
pub use profile::{fit_profile_mle, profile_log_likelihood, profile_score};
pub use zhang::{fit_zhang_lm, zhang_g, DEFAULT_R_ZHANG};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpdError {
    #[error("invalid GPD parameters k={k}, sigma={sigma}")]
    InvalidParams { k: f64, sigma: f64 },
    #[error("x={x} lies outside the GPD support")]
    OutsideSupport { x: f64 },
    #[error("probability {q} outside [0, 1)")]
    InvalidProbability { q: f64 },
    #[error("sample has {n} point(s), need at least {min}")]
    SampleTooSmall { n: usize, min: usize },
    #[error("all sample points are equal; no admissible root")]
    DegenerateSample,
    #[error("sample point {index} is {value}; exceedances must be positive and finite")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("r must satisfy r < 1/2 and r != 0, got {0}")]
    InvalidR(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    ProfileMle,
    ZhangLm,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::ProfileMle => "profile_mle",
            EstimatorKind::ZhangLm => "zhang_lm",
        }
    }
}

/// A fitter together with its tuning constant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    #[default]
    ProfileMle,
    ZhangLm {
        r: f64,
    },
}

impl Estimator {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Estimator::ProfileMle => EstimatorKind::ProfileMle,
            Estimator::ZhangLm { .. } => EstimatorKind::ZhangLm,
        }
    }

    pub fn fit(&self, sample: &[f64]) -> Result<GpdFit, GpdError> {
        match *self {
            Estimator::ProfileMle => fit_profile_mle(sample),
            Estimator::ZhangLm { r } => fit_zhang_lm(sample, r),
        }
    }
}

/// Result of fitting exceedances above a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpdFit {
    pub params: GpdParams,
    /// Threshold the exceedances were measured above.
    pub mu: f64,
    /// Total window size the threshold was chosen from.
    pub n: usize,
    pub n_u: usize,
    pub estimator: EstimatorKind,
    pub converged: bool,
    pub iterations: usize,
    /// Residual of the estimating equation at the returned `b`.
    pub residual: f64,
    /// Set when the profile fit sits on the `k = 1` constraint rather than at
    /// a root of the score equation.
    pub at_shape_bound: bool,
}

impl GpdFit {
    /// Records the threshold and window size; fitters themselves only see
    /// the excesses and report `mu = 0`, `n = n_u`.
    pub fn with_threshold(mut self, mu: f64, n: usize) -> Self {
        self.mu = mu;
        self.n = n;
        self
    }
}

/// Validated excess sample with the summaries both fitters need.
#[derive(Debug)]
pub(crate) struct Excesses<'a> {
    pub xs: &'a [f64],
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub mean_sq: f64,
}

impl<'a> Excesses<'a> {
    pub fn new(xs: &'a [f64], min_len: usize) -> Result<Self, GpdError> {
        if xs.len() < min_len {
            return Err(GpdError::SampleTooSmall {
                n: xs.len(),
                min: min_len,
            });
        }
        if let Some((index, &value)) = xs
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x > 0.0) || !x.is_finite())
        {
            return Err(GpdError::NonPositiveSample { index, value });
        }
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        if max == min {
            return Err(GpdError::DegenerateSample);
        }
        let n = xs.len() as f64;
        Ok(Self {
            xs,
            max,
            min,
            mean: xs.iter().sum::<f64>() / n,
            mean_sq: xs.iter().map(|x| x * x).sum::<f64>() / n,
        })
    }

    pub fn len(&self) -> f64 {
        self.xs.len() as f64
    }

    /// `b` below which `k(b) / b` is replaced by its two-term series.
    fn series_cutoff(&self) -> f64 {
        1e-8 / self.max
    }

    /// Shape from the moment condition `k = -mean(ln(1 - b X))`.
    pub fn shape_at(&self, b: f64) -> f64 {
        if b.abs() < self.series_cutoff() {
            return b * self.scale_series(b);
        }
        -self.xs.iter().map(|&x| (-b * x).ln_1p()).sum::<f64>() / self.len()
    }

    fn scale_series(&self, b: f64) -> f64 {
        self.mean + 0.5 * b * self.mean_sq
    }

    /// GPD parameters implied by `b`. `sigma` stays positive since `k(b)`
    /// has the sign of `b`.
    pub fn params_at(&self, b: f64) -> GpdParams {
        let (k, sigma) = if b.abs() < self.series_cutoff() {
            let sigma = self.scale_series(b);
            (b * sigma, sigma)
        } else {
            let k = self.shape_at(b);
            (k, k / b)
        };
        GpdParams::new(k, sigma).expect("k(b)/b is positive and finite on b < 1/max")
    }

    /// Largest admissible `b`, kept a hair inside `1 / max(X)`.
    pub fn upper_b(&self) -> f64 {
        (1.0 / self.max) * (1.0 - 1e-9)
    }
}

/// Bisection on a bracket `[lo, hi]` whose ends have opposite signs under `f`.
/// Stops when the width drops below `1e-12 * max(1, |b|)` or after 200 steps.
pub(crate) fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
) -> (f64, usize) {
    let mut iterations = 0;
    while iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= 1e-12 * mid.abs().max(1.0) || mid == lo || mid == hi {
            break;
        }
        iterations += 1;
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return (mid, iterations);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let f_hi = f(hi);
    let b = if f_lo.abs() <= f_hi.abs() { lo } else { hi };
    (b, iterations)
}
