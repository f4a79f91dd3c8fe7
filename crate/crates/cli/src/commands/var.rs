use std::collections::BTreeMap;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use rayon::prelude::*;
use serde::Serialize;
use tailrisk::ingest::{align, load_price_panel, load_rates, partition_months, RiskFreeSeries};
use tailrisk::risk::{monthly_var, rfr_series, FitFailure, VarStatus};
use tailrisk::{excess_returns, ExcessReturnSeries, MonthKey, PriceSeries, VarPoint};

use crate::config::{RunConfig, VarArgs};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_num, fmt_opt, write_atomic, CsvBuffer};

pub const VAR_HEADER: [&str; 11] = [
    "entity",
    "month",
    "var",
    "rfr",
    "status",
    "k_hat",
    "sigma_hat",
    "mu",
    "n",
    "n_u",
    "estimator",
];

/// VaR points and the RFR keyed by the later month, for one entity.
#[derive(Debug, Clone)]
pub struct EntityRisk {
    pub entity: String,
    pub points: Vec<VarPoint>,
    pub rfr: BTreeMap<MonthKey, f64>,
    pub returns: ExcessReturnSeries,
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    /// Calendar months with at least one return.
    pub months: usize,
    /// Months with at least `min_obs` returns.
    pub windows: usize,
    pub ok: usize,
    pub fit_failed: usize,
    pub skipped_min_obs: usize,
}

impl Counts {
    fn of(points: &[VarPoint]) -> Self {
        let mut c = Counts {
            months: points.len(),
            ..Counts::default()
        };
        for p in points {
            match p.status {
                VarStatus::Ok => c.ok += 1,
                VarStatus::FitFailed => c.fit_failed += 1,
                VarStatus::SkippedMinObs => c.skipped_min_obs += 1,
            }
        }
        c.windows = c.ok + c.fit_failed;
        c
    }

    fn add(&mut self, o: &Counts) {
        self.months += o.months;
        self.windows += o.windows;
        self.ok += o.ok;
        self.fit_failed += o.fit_failed;
        self.skipped_min_obs += o.skipped_min_obs;
    }
}

#[derive(Debug, Serialize)]
struct EntitySummary<'a> {
    entity: &'a str,
    #[serde(flatten)]
    counts: Counts,
}

#[derive(Debug, Serialize)]
struct Failure<'a> {
    entity: &'a str,
    month: MonthKey,
    reason: String,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    totals: Counts,
    entities: Vec<EntitySummary<'a>>,
    failures: Vec<Failure<'a>>,
    generated_at: String,
}

pub fn failure_reason(f: &FitFailure) -> String {
    match f {
        FitFailure::Rejected(msg) => format!("fit rejected: {msg}"),
        FitFailure::NotConverged => "fit did not converge".into(),
        FitFailure::LevelBelowThreshold => "var_p not above the threshold level".into(),
    }
}

/// Entity ids become file names, so they may not contain path syntax.
pub fn check_entity_id(id: &str) -> Result<(), CliError> {
    if id.is_empty() || id == "." || id == ".." || id.contains(['/', '\\', '\0']) {
        return Err(CliError::Input(format!(
            "entity id {id:?} cannot be used as a file name"
        )));
    }
    Ok(())
}

pub fn entity_risk(
    prices: &PriceSeries,
    rates: &RiskFreeSeries,
    cfg: &RunConfig,
) -> Result<EntityRisk, CliError> {
    let aligned = align(prices, rates)?;
    let returns = excess_returns(&aligned);
    let partition = partition_months(&returns, cfg.min_obs)?;
    let points = monthly_var(&returns, &partition, &cfg.var_config(), cfg.pool_window)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(p) = points
        .iter()
        .find(|p| p.var.is_some_and(|v| !v.is_finite()))
    {
        return Err(CliError::Numerical(format!(
            "non-finite VaR for {} in {}",
            p.entity_id, p.month
        )));
    }
    let rfr = rfr_series(&points)
        .into_iter()
        .map(|r| (r.to, r.rfr))
        .collect();
    Ok(EntityRisk {
        entity: prices.entity_id().to_owned(),
        points,
        rfr,
        returns,
    })
}

pub fn var_csv(risk: &EntityRisk) -> CsvBuffer {
    let mut csv = CsvBuffer::new(VAR_HEADER);
    for p in &risk.points {
        let ok_fit = p.fit.as_ref().filter(|f| f.converged);
        let n = p.n.to_string();
        let n_u = p.threshold.map(|t| t.n_u.to_string()).unwrap_or_default();
        csv.row([
            p.entity_id.as_str(),
            &p.month.to_string(),
            &fmt_opt(p.var),
            &fmt_opt(risk.rfr.get(&p.month).copied()),
            p.status.as_str(),
            &fmt_opt(ok_fit.map(|f| f.params.k())),
            &fmt_opt(ok_fit.map(|f| f.params.sigma())),
            &fmt_opt(p.threshold.map(|t| t.mu)),
            &n,
            &n_u,
            p.fit.as_ref().map_or("", |f| f.estimator.as_str()),
        ]);
    }
    csv
}

fn returns_csv(r: &ExcessReturnSeries) -> CsvBuffer {
    let mut csv = CsvBuffer::new(["entity", "date", "ar", "loss"]);
    for x in r.observations() {
        csv.row([
            r.entity_id(),
            &x.date.format("%Y-%m-%d").to_string(),
            &fmt_num(x.ar),
            &fmt_num(x.loss),
        ]);
    }
    csv
}

/// Runs the monthly VaR pipeline for every entity in the panel.
pub fn compute_panel(cfg: &RunConfig) -> Result<Vec<EntityRisk>, CliError> {
    let panel = load_price_panel(&cfg.prices)?;
    if panel.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no price rows",
            cfg.prices.display()
        )));
    }
    let rates = load_rates(&cfg.rates)?;
    for s in &panel {
        check_entity_id(s.entity_id())?;
    }
    panel
        .par_iter()
        .map(|s| entity_risk(s, &rates, cfg))
        .collect()
}

pub fn var_file(out: &Path, entity: &str) -> std::path::PathBuf {
    out.join(format!("var_{entity}.csv"))
}

pub fn cmd_var(args: &VarArgs) -> Result<(), CliError> {
    let cfg = RunConfig::new(
        args.prices.clone(),
        args.rates.clone(),
        &args.fit,
        args.out.clone(),
    )?;
    let risks = compute_panel(&cfg)?;
    ensure_dir(&cfg.out)?;
    risks.par_iter().try_for_each(|r| {
        var_csv(r).save(&var_file(&cfg.out, &r.entity))?;
        if args.write_returns {
            returns_csv(&r.returns).save(&cfg.out.join(format!("returns_{}.csv", r.entity)))?;
        }
        Ok::<_, CliError>(())
    })?;

    let mut totals = Counts::default();
    let mut entities = Vec::new();
    let mut failures = Vec::new();
    for r in &risks {
        let counts = Counts::of(&r.points);
        totals.add(&counts);
        entities.push(EntitySummary {
            entity: &r.entity,
            counts,
        });
        failures.extend(r.points.iter().filter_map(|p| {
            Some(Failure {
                entity: &r.entity,
                month: p.month,
                reason: failure_reason(p.failure.as_ref()?),
            })
        }));
    }
    let summary = Summary {
        config: &cfg,
        totals,
        entities,
        failures,
        generated_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    };
    let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    json.push(b'\n');
    write_atomic(&cfg.out.join("summary.json"), &json)
}
