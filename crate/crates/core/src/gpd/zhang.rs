use super::{bisect, EstimatorKind, Excesses, GpdError, GpdFit};

pub const DEFAULT_R_ZHANG: f64 = -0.5;

const MAX_EXPANSIONS: usize = 60;

impl Excesses<'_> {
    fn zhang_g(&self, b: f64, r: f64) -> f64 {
        let target = 1.0 / (1.0 - r);
        if b.abs() < 1e-12 {
            // removable singularity: p -> -r / (b mean), (1 - bX)^p -> exp(r X / mean)
            let sum: f64 = self.xs.iter().map(|&x| (r * x / self.mean).exp()).sum();
            return sum / self.len() - target;
        }
        let logs: Vec<f64> = self.xs.iter().map(|&x| (-b * x).ln_1p()).collect();
        let p = r * self.len() / logs.iter().sum::<f64>();
        logs.iter().map(|&l| (p * l).exp()).sum::<f64>() / self.len() - target
    }
}

/// `g(b) = mean((1 - bX)^p) - 1/(1 - r)` with `p = r n / sum(ln(1 - bX))`.
pub fn zhang_g(sample: &[f64], b: f64, r: f64) -> Result<f64, GpdError> {
    Ok(Excesses::new(sample, 1)?.zhang_g(b, r))
}

fn check_r(r: f64) -> Result<(), GpdError> {
    if r.is_finite() && r < 0.5 && r != 0.0 {
        Ok(())
    } else {
        Err(GpdError::InvalidR(r))
    }
}

/// Likelihood-moment estimate. `g` is increasing with `g < 0` as
/// `b -> -inf` and `g > 0` as `b -> 1/max(X)`, so the root is bracketed by
/// doubling a lower end from `-1/mean(X)` and bisected.
pub fn fit_zhang_lm(sample: &[f64], r: f64) -> Result<GpdFit, GpdError> {
    check_r(r)?;
    let s = Excesses::new(sample, 3)?;
    let g = |b: f64| s.zhang_g(b, r);

    let mut lo = -1.0 / s.mean;
    let mut g_lo = g(lo);
    let mut expansions = 0;
    while g_lo >= 0.0 && expansions < MAX_EXPANSIONS {
        lo *= 2.0;
        g_lo = g(lo);
        expansions += 1;
    }
    let hi = s.upper_b();
    let g_hi = g(hi);

    let fit = |b: f64, converged: bool, iterations: usize| GpdFit {
        params: s.params_at(b),
        mu: 0.0,
        n: sample.len(),
        n_u: sample.len(),
        estimator: EstimatorKind::ZhangLm,
        converged,
        iterations,
        residual: g(b),
        at_shape_bound: false,
    };
    if g_lo >= 0.0 {
        return Ok(fit(lo, false, expansions));
    }
    if g_hi <= 0.0 {
        return Ok(fit(hi, false, expansions));
    }
    let (b, iterations) = bisect(g, lo, hi, g_lo);
    Ok(fit(b, true, expansions + iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_signs_on_small_sample() {
        let xs = [1.0, 2.0, 3.0];
        assert!(zhang_g(&xs, -1e6, -0.5).unwrap() < 0.0);
        assert!(zhang_g(&xs, (1.0 / 3.0) * (1.0 - 1e-9), -0.5).unwrap() > 0.0);
    }

    #[test]
    fn singular_point_is_continuous() {
        let xs = [0.4, 1.0, 2.5, 0.7];
        let at_zero = zhang_g(&xs, 0.0, -0.5).unwrap();
        let near = zhang_g(&xs, 1e-7, -0.5).unwrap();
        assert!((at_zero - near).abs() < 1e-6);
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(
            fit_zhang_lm(&[1.0, 2.0, 3.0], 0.0),
            Err(GpdError::InvalidR(_))
        ));
        assert!(matches!(
            fit_zhang_lm(&[1.0, 2.0, 3.0], 0.5),
            Err(GpdError::InvalidR(_))
        ));
        assert!(matches!(
            fit_zhang_lm(&[3.0, 3.0, 3.0], -0.5),
            Err(GpdError::DegenerateSample)
        ));
        assert!(matches!(
            fit_zhang_lm(&[1.0, 2.0], -0.5),
            Err(GpdError::SampleTooSmall { .. })
        ));
    }

    #[test]
    fn root_has_small_residual() {
        let fit = fit_zhang_lm(&[0.3, 1.2, 0.8, 2.9, 0.1, 1.7], -0.5).unwrap();
        assert!(fit.converged);
        assert!(fit.residual.abs() <= 1e-10);
    }
}
