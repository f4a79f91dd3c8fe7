use serde::Serialize;

use super::GpdError;

/// Shapes with `|k|` below this use the exponential (k = 0) formulas.
pub const K_BRANCH_TOL: f64 = 1e-9;

/// Generalized Pareto parameters in the `(1 - k x / sigma)` parameterization.
///
/// `k` here is the negative of the usual extreme-value shape `xi`: `k < 0`
/// is a heavy (Pareto-type) tail, `k > 0` a bounded tail with upper endpoint
/// `sigma / k`. `b = k / sigma` is the ratio the profile-likelihood
/// estimators search over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpdParams {
    k: f64,
    sigma: f64,
    b: f64,
}

impl GpdParams {
    pub fn new(k: f64, sigma: f64) -> Result<Self, GpdError> {
        if !k.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(GpdError::InvalidParams { k, sigma });
        }
        Ok(Self {
            k,
            sigma,
            b: k / sigma,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Conventional extreme-value shape, `xi = -k`.
    pub fn xi(&self) -> f64 {
        -self.k
    }

    pub fn is_exponential(&self) -> bool {
        self.k.abs() < K_BRANCH_TOL
    }

    /// `sigma / k` for bounded tails.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.k > 0.0).then(|| self.sigma / self.k)
    }

    pub fn in_support(&self, x: f64) -> bool {
        x >= 0.0 && self.upper_endpoint().is_none_or(|hi| x <= hi)
    }

    pub fn cdf(&self, x: f64) -> Result<f64, GpdError> {
        if !self.in_support(x) {
            return Err(GpdError::OutsideSupport { x });
        }
        if self.is_exponential() {
            return Ok(-(-x / self.sigma).exp_m1());
        }
        let log_surv = (-self.k * x / self.sigma).ln_1p() / self.k;
        Ok(-log_surv.exp_m1())
    }

    pub fn quantile(&self, q: f64) -> Result<f64, GpdError> {
        if !(0.0..1.0).contains(&q) {
            return Err(GpdError::InvalidProbability { q });
        }
        let log_surv = (-q).ln_1p();
        if self.is_exponential() {
            return Ok(-self.sigma * log_surv);
        }
        Ok(-(self.sigma / self.k) * (self.k * log_surv).exp_m1())
    }

    /// Log-likelihood of `sample` (excesses over the threshold). Any point
    /// outside the open support yields `-inf` so optimizers can reject it.
    pub fn log_likelihood(&self, sample: &[f64]) -> f64 {
        let n = sample.len() as f64;
        if sample.iter().any(|&x| !(x >= 0.0)) {
            return f64::NEG_INFINITY;
        }
        if self.is_exponential() {
            let sum: f64 = sample.iter().sum();
            return -n * self.sigma.ln() - sum / self.sigma;
        }
        let mut acc = 0.0;
        for &x in sample {
            let t = self.k * x / self.sigma;
            if t >= 1.0 {
                return f64::NEG_INFINITY;
            }
            acc += (-t).ln_1p();
        }
        -n * self.sigma.ln() + (1.0 / self.k - 1.0) * acc
    }

    /// Analytic score `(d/d sigma, d/d k)` of [`GpdParams::log_likelihood`].
    pub fn score(&self, sample: &[f64]) -> (f64, f64) {
        let n = sample.len() as f64;
        let (k, s) = (self.k, self.sigma);
        if self.is_exponential() {
            let sum: f64 = sample.iter().sum();
            let sum_sq: f64 = sample.iter().map(|x| x * x).sum();
            // d/dk at k = 0 from the series of ln(1 - kx/s)/k
            return (-n / s + sum / (s * s), sum / s - sum_sq / (2.0 * s * s));
        }
        let mut d_sigma = 0.0;
        let mut sum_log = 0.0;
        let mut sum_ratio = 0.0;
        for &x in sample {
            let w = 1.0 - k * x / s;
            d_sigma += x / w;
            sum_log += (-k * x / s).ln_1p();
            sum_ratio += x / (s * w);
        }
        (
            -n / s + (1.0 - k) / (s * s) * d_sigma,
            -sum_log / (k * k) - (1.0 / k - 1.0) * sum_ratio,
        )
    }
}

pub fn gpd_cdf(x: f64, params: &GpdParams) -> Result<f64, GpdError> {
    params.cdf(x)
}

pub fn gpd_quantile(q: f64, params: &GpdParams) -> Result<f64, GpdError> {
    params.quantile(q)
}

pub fn gpd_log_likelihood(sample: &[f64], params: &GpdParams) -> f64 {
    params.log_likelihood(sample)
}
