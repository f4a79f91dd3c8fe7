//! Seeded synthetic data: GPD draws by inverse-CDF sampling and a toy
//! multi-entity price panel with a tunable common factor.
//!
//! The uniform stream is SplitMix64 (Steele, Lea & Flood 2014):
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z ^ (z >> 31)
//! ```
//!
//! with `u = (z >> 11) * 2^-53` in `[0, 1)`. Stream `i` of a panel (factor is
//! stream 0, entity `j` is stream `j + 1`, index `m` follows the entities) is
//! seeded with the SplitMix64 output of `seed ^ (i * 0xD1B54A32D192ED03)`.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gpd::{GpdError, GpdParams};
use crate::ingest::{IngestError, PricePoint, PriceSeries, RiskFreeSeries};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const STREAM_MIX: u64 = 0xD1B5_4A32_D192_ED03;
/// Simple returns are floored here before compounding.
pub const RETURN_FLOOR: f64 = -0.99;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Gpd(#[from] GpdError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Source of uniforms on `[0, 1)`.
pub trait UniformSource {
    fn next_uniform(&mut self) -> f64;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Independent stream `index` derived from `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(Self::new(seed ^ index.wrapping_mul(STREAM_MIX)).next_u64())
    }
}

impl UniformSource for SplitMix64 {
    fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

pub fn sample_gpd_from<U: UniformSource + ?Sized>(
    n: usize,
    params: &GpdParams,
    uniforms: &mut U,
) -> Vec<f64> {
    (0..n)
        .map(|_| {
            params
                .quantile(uniforms.next_uniform())
                .expect("uniforms lie in [0, 1)")
        })
        .collect()
}

/// `n` GPD draws from a fresh SplitMix64 stream seeded with `seed`.
pub fn sample_gpd(n: usize, params: &GpdParams, seed: u64) -> Vec<f64> {
    sample_gpd_from(n, params, &mut SplitMix64::new(seed))
}

/// Shock distribution: a GPD magnitude with a random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub k: f64,
    pub sigma: f64,
}

impl ShockSpec {
    fn params(&self) -> Result<GpdParams, SynthError> {
        Ok(GpdParams::new(self.k, self.sigma)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    #[serde(flatten)]
    pub shock: ShockSpec,
    /// Trading-day index of the first close; later values model a late listing.
    #[serde(default)]
    pub listed_from: usize,
}

/// An index whose return is the cross-entity mean return plus its own noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub id: String,
    #[serde(flatten)]
    pub noise: ShockSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub start_date: NaiveDate,
    /// Trading days per entity (weekends are skipped).
    pub n_days: usize,
    pub start_price: f64,
    /// Constant risk-free rate per day.
    pub daily_rate: f64,
    /// `r = w * factor + (1 - w) * idiosyncratic`.
    pub common_factor_weight: f64,
    pub factor: ShockSpec,
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub indices: Vec<IndexSpec>,
}

impl SynthSpec {
    /// `n_entities` entities named `E01`, `E02`, ... sharing one shock law.
    pub fn uniform(
        seed: u64,
        n_entities: usize,
        n_days: usize,
        shock: ShockSpec,
        common_factor_weight: f64,
    ) -> Self {
        Self {
            seed,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 1).expect("valid date"),
            n_days,
            start_price: 100.0,
            daily_rate: 0.0001,
            common_factor_weight,
            factor: shock,
            entities: (1..=n_entities)
                .map(|i| EntitySpec {
                    id: format!("E{i:02}"),
                    shock,
                    listed_from: 0,
                })
                .collect(),
            indices: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let w = self.common_factor_weight;
        if !(0.0..=1.0).contains(&w) {
            return Err(SynthError::Spec(format!(
                "common_factor_weight {w} not in [0, 1]"
            )));
        }
        if self.n_days < 2 {
            return Err(SynthError::Spec("n_days must be at least 2".into()));
        }
        if !(self.start_price > 0.0) || !self.start_price.is_finite() {
            return Err(SynthError::Spec("start_price must be positive".into()));
        }
        if !self.daily_rate.is_finite() {
            return Err(SynthError::Spec("daily_rate must be finite".into()));
        }
        if self.entities.is_empty() {
            return Err(SynthError::Spec("no entities".into()));
        }
        if let Some(e) = self
            .entities
            .iter()
            .find(|e| e.listed_from + 2 > self.n_days)
        {
            return Err(SynthError::Spec(format!(
                "{} listed too late for two closes",
                e.id
            )));
        }
        let mut ids: Vec<_> = self
            .entities
            .iter()
            .map(|e| e.id.as_str())
            .chain(self.indices.iter().map(|i| i.id.as_str()))
            .collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(SynthError::Spec("duplicate entity id".into()));
        }
        self.factor.params()?;
        for e in &self.entities {
            e.shock.params()?;
        }
        for i in &self.indices {
            i.noise.params()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthPanel {
    /// Entities first, then indices, each in spec order.
    pub prices: Vec<PriceSeries>,
    pub rates: RiskFreeSeries,
}

fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn signed_shocks(n: usize, params: &GpdParams, rng: &mut SplitMix64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let sign = if rng.next_uniform() < 0.5 { -1.0 } else { 1.0 };
            let mag = params
                .quantile(rng.next_uniform())
                .expect("uniforms lie in [0, 1)");
            sign * mag
        })
        .collect()
}

fn compound(
    id: &str,
    dates: &[NaiveDate],
    start_price: f64,
    returns: &[f64],
) -> Result<PriceSeries, SynthError> {
    let mut close = start_price;
    let mut obs = Vec::with_capacity(dates.len());
    obs.push(PricePoint {
        date: dates[0],
        close,
    });
    for (date, r) in dates[1..].iter().zip(returns) {
        close *= 1.0 + r.max(RETURN_FLOOR);
        obs.push(PricePoint { date: *date, close });
    }
    Ok(PriceSeries::new(id, obs)?)
}

/// Price paths `a_t = a_{t-1} (1 + r_t)` with `r_t` mixing a common factor
/// and an entity shock, floored at [`RETURN_FLOOR`]. Index paths compound the
/// mean floored return of the entities listed on each day plus index noise.
pub fn generate_panel(spec: &SynthSpec) -> Result<SynthPanel, SynthError> {
    spec.validate()?;
    let dates = trading_days(spec.start_date, spec.n_days);
    let steps = spec.n_days - 1;
    let w = spec.common_factor_weight;
    let factor = signed_shocks(
        steps,
        &spec.factor.params()?,
        &mut SplitMix64::stream(spec.seed, 0),
    );
    let returns: Vec<Vec<f64>> = spec
        .entities
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let own = signed_shocks(
                steps,
                &e.shock.params()?,
                &mut SplitMix64::stream(spec.seed, j as u64 + 1),
            );
            Ok(factor
                .iter()
                .zip(&own)
                .map(|(f, o)| (w * f + (1.0 - w) * o).max(RETURN_FLOOR))
                .collect())
        })
        .collect::<Result<_, SynthError>>()?;

    let mut prices = spec
        .entities
        .iter()
        .zip(&returns)
        .map(|(e, r)| {
            compound(
                &e.id,
                &dates[e.listed_from..],
                spec.start_price,
                &r[e.listed_from..],
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    let market: Vec<f64> = (0..steps)
        .map(|t| {
            let live: Vec<f64> = spec
                .entities
                .iter()
                .zip(&returns)
                .filter(|(e, _)| e.listed_from <= t)
                .map(|(_, r)| r[t])
                .collect();
            live.iter().sum::<f64>() / live.len().max(1) as f64
        })
        .collect();
    for (m, idx) in spec.indices.iter().enumerate() {
        let stream = (spec.entities.len() + 1 + m) as u64;
        let noise = signed_shocks(
            steps,
            &idx.noise.params()?,
            &mut SplitMix64::stream(spec.seed, stream),
        );
        let r: Vec<f64> = market.iter().zip(&noise).map(|(a, b)| a + b).collect();
        prices.push(compound(&idx.id, &dates, spec.start_price, &r)?);
    }
    Ok(SynthPanel {
        prices,
        rates: RiskFreeSeries::constant(spec.start_date, spec.daily_rate)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(f64);

    impl UniformSource for Fixed {
        fn next_uniform(&mut self) -> f64 {
            self.0
        }
    }

    #[test]
    fn forced_uniform_draw() {
        let params = GpdParams::new(0.5, 1.0).unwrap();
        let draws = sample_gpd_from(1, &params, &mut Fixed(0.75));
        assert!((draws[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 0 from the reference C implementation
        let mut g = SplitMix64::new(0);
        assert_eq!(g.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(g.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn bounded_support_and_determinism() {
        let params = GpdParams::new(0.4, 2.0).unwrap();
        let a = sample_gpd(2000, &params, 9);
        assert!(a.iter().all(|x| (0.0..5.0).contains(x)));
        assert_eq!(a, sample_gpd(2000, &params, 9));
        assert_ne!(a, sample_gpd(2000, &params, 10));
    }

    #[test]
    fn full_weight_makes_identical_paths() {
        let shock = ShockSpec {
            k: -0.2,
            sigma: 0.01,
        };
        let panel = generate_panel(&SynthSpec::uniform(3, 3, 200, shock, 1.0)).unwrap();
        let first: Vec<f64> = panel.prices[0]
            .observations()
            .iter()
            .map(|p| p.close)
            .collect();
        for s in &panel.prices[1..] {
            let c: Vec<f64> = s.observations().iter().map(|p| p.close).collect();
            assert_eq!(c, first);
        }
    }

    #[test]
    fn closes_stay_positive_under_wild_shocks() {
        let shock = ShockSpec {
            k: -0.9,
            sigma: 0.5,
        };
        let panel = generate_panel(&SynthSpec::uniform(1, 2, 500, shock, 0.3)).unwrap();
        assert!(panel
            .prices
            .iter()
            .all(|s| s.observations().iter().all(|p| p.close > 0.0)));
    }

    #[test]
    fn skips_weekends() {
        let days = trading_days(NaiveDate::from_ymd_opt(2018, 3, 2).unwrap(), 3);
        let names: Vec<_> = days.iter().map(|d| d.weekday()).collect();
        assert_eq!(names, vec![Weekday::Fri, Weekday::Mon, Weekday::Tue]);
    }

    #[test]
    fn spec_validation() {
        let shock = ShockSpec {
            k: 0.1,
            sigma: 0.01,
        };
        let mut spec = SynthSpec::uniform(1, 2, 50, shock, 1.5);
        assert!(generate_panel(&spec).is_err());
        spec.common_factor_weight = 0.5;
        spec.entities[1].id = spec.entities[0].id.clone();
        assert!(generate_panel(&spec).is_err());
    }

    #[test]
    fn late_listing_and_index_paths() {
        let shock = ShockSpec {
            k: -0.2,
            sigma: 0.01,
        };
        let mut spec = SynthSpec::uniform(4, 3, 120, shock, 0.5);
        spec.entities[2].listed_from = 60;
        spec.indices.push(IndexSpec {
            id: "IDX".into(),
            noise: ShockSpec {
                k: 0.0,
                sigma: 1e-4,
            },
        });
        let panel = generate_panel(&spec).unwrap();
        assert_eq!(panel.prices.len(), 4);
        assert_eq!(panel.prices[2].len(), 60);
        assert_eq!(panel.prices[3].entity_id(), "IDX");
        assert_eq!(panel.prices[3].len(), 120);
        // adding an index leaves the entity paths untouched
        spec.indices.clear();
        assert_eq!(
            generate_panel(&spec).unwrap().prices[..3],
            panel.prices[..3]
        );
        spec.entities[0].listed_from = 119;
        assert!(generate_panel(&spec).is_err());
    }
}
