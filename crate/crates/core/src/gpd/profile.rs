use super::{bisect, EstimatorKind, Excesses, GpdError, GpdFit};

const PROBES: usize = 512;
const MAX_EXPANSIONS: usize = 60;
/// Probes with `|b| * max(X)` below this are dropped. `b = 0` is always a
/// double root of the score equation (the exponential fit, which is excluded)
/// and closer in the score's sign is dominated by rounding.
const ZERO_BAND: f64 = 1e-4;

impl Excesses<'_> {
    /// `mean((1 - bX)^-1) - (1 + mean(ln(1 - bX)))^-1`. Negative where the
    /// profile likelihood increases in `b`.
    fn profile_score(&self, b: f64) -> f64 {
        let mut inv = 0.0;
        let mut log = 0.0;
        for &x in self.xs {
            let t = -b * x;
            inv += 1.0 / (1.0 + t);
            log += t.ln_1p();
        }
        let n = self.len();
        inv / n - 1.0 / (1.0 + log / n)
    }

    fn profile_ll(&self, b: f64) -> f64 {
        self.params_at(b).log_likelihood(self.xs)
    }
}

fn evenly_spaced(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// `n` points from `from` to `to` (same sign) with a constant ratio.
fn log_spaced(from: f64, to: f64, n: usize) -> impl Iterator<Item = f64> {
    let ratio = (to / from).ln() / (n - 1) as f64;
    (0..n).map(move |i| from * (ratio * i as f64).exp())
}

/// Residual of the profile score equation at `b`.
pub fn profile_score(sample: &[f64], b: f64) -> Result<f64, GpdError> {
    Ok(Excesses::new(sample, 1)?.profile_score(b))
}

/// Log-likelihood at `k = k(b)`, `sigma = k(b) / b`.
pub fn profile_log_likelihood(sample: &[f64], b: f64) -> Result<f64, GpdError> {
    let s = Excesses::new(sample, 1)?;
    if b >= 1.0 / s.max {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(s.profile_ll(b))
}

/// Profile maximum likelihood over `b`, constrained to `k <= 1`.
///
/// The admissible interval runs from a lower end where the profile
/// likelihood is still increasing up to the `b` at which `k(b) = 1` (or the
/// support edge if `k` stays below one). Sign changes of the score are
/// located on 512 evenly spaced probes across the interval, refined by
/// another 512 evenly spaced over the positive side and log-spaced sets on
/// both sides of zero (the lower end can sit many decades below the roots
/// when the smallest excess is tiny). Each sign change is bisected. The
/// candidate with the largest log-likelihood wins; the `k = 1` end of the
/// interval is itself a candidate.
pub fn fit_profile_mle(sample: &[f64]) -> Result<GpdFit, GpdError> {
    let s = Excesses::new(sample, 3)?;
    let mut iterations = 0;

    let upper = s.upper_b();
    let unit_b = if s.shape_at(upper) > 1.0 {
        let (b, it) = bisect(|b| s.shape_at(b) - 1.0, 0.0, upper, -1.0);
        iterations += it;
        Some(b)
    } else {
        None
    };
    let hi = unit_b.unwrap_or(upper);

    let mut lo = (2.0 * (s.min - s.mean) / (s.min * s.min)).min(-1.0 / s.mean);
    for _ in 0..MAX_EXPANSIONS {
        if s.profile_score(lo) < 0.0 {
            break;
        }
        lo *= 2.0;
    }

    let zero_band = ZERO_BAND / s.max;
    let mut probes = Vec::with_capacity(4 * PROBES);
    probes.extend(evenly_spaced(lo, hi, PROBES));
    probes.extend(evenly_spaced(0.0, hi, PROBES));
    probes.extend(log_spaced(lo, -zero_band, PROBES));
    probes.extend(log_spaced(hi, zero_band, PROBES));
    probes.retain(|b| b.abs() >= zero_band);
    probes.sort_by(f64::total_cmp);
    probes.dedup();

    let scores: Vec<f64> = probes.iter().map(|&b| s.profile_score(b)).collect();
    let mut roots = Vec::new();
    for i in 0..probes.len().saturating_sub(1) {
        let (b0, b1) = (probes[i], probes[i + 1]);
        let (h0, h1) = (scores[i], scores[i + 1]);
        if (b0 < 0.0) != (b1 < 0.0) {
            continue;
        }
        if h0 == 0.0 {
            roots.push(b0);
        } else if h0.is_finite() && h1.is_finite() && (h0 < 0.0) != (h1 < 0.0) {
            let (b, it) = bisect(|b| s.profile_score(b), b0, b1, h0);
            iterations += it;
            roots.push(b);
        }
    }

    let mut best: Option<(f64, f64, bool)> = None;
    let mut consider = |b: f64, bound: bool| {
        let ll = s.profile_ll(b);
        if ll.is_finite() && best.is_none_or(|(_, best_ll, _)| ll > best_ll) {
            best = Some((b, ll, bound));
        }
    };
    for &b in &roots {
        consider(b, false);
    }
    if let Some(b) = unit_b {
        consider(b, true);
    }

    let (b, converged, at_shape_bound) = match best {
        Some((b, _, bound)) => (b, true, bound),
        None => {
            let b = probes
                .iter()
                .copied()
                .filter(|&b| b < hi)
                .max_by(|&x, &y| s.profile_ll(x).total_cmp(&s.profile_ll(y)))
                .unwrap_or(lo);
            (b, false, false)
        }
    };
    let params = s.params_at(b);
    Ok(GpdFit {
        params,
        mu: 0.0,
        n: sample.len(),
        n_u: sample.len(),
        estimator: EstimatorKind::ProfileMle,
        converged,
        iterations,
        residual: if at_shape_bound {
            f64::NAN
        } else {
            s.profile_score(b)
        },
        at_shape_bound,
    })
}
