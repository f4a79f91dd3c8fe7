use tailrisk::excess_returns;
use tailrisk::ingest::{align, load_price_panel, load_rates, partition_months};
use tailrisk::threshold::{hill_curve, mean_excess_curve, threshold_stability};
use tailrisk::MonthKey;

use crate::config::{DiagnosticsArgs, RunConfig};
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_num, fmt_opt, CsvBuffer};

/// Threshold levels refitted for the stability table, together with the
/// configured threshold confidence.
fn stability_levels(configured: f64) -> Vec<f64> {
    let mut levels: Vec<f64> = (10..20).map(|i| i as f64 / 20.0).collect();
    levels.push(configured);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
}

/// Losses of one (entity, month) window, with the skip reason as an error.
pub fn window_losses(cfg: &RunConfig, entity: &str, month: MonthKey) -> Result<Vec<f64>, CliError> {
    let panel = load_price_panel(&cfg.prices)?;
    let series = panel
        .iter()
        .find(|s| s.entity_id() == entity)
        .ok_or_else(|| CliError::Input(format!("unknown entity {entity}")))?;
    let rates = load_rates(&cfg.rates)?;
    let returns = excess_returns(&align(series, &rates)?);
    let part = partition_months(&returns, cfg.min_obs)?;
    if let Some(w) = part.windows.iter().find(|w| w.month == month) {
        return Ok(returns.losses_in(w.span.clone()));
    }
    if let Some(s) = part.skipped.iter().find(|s| s.month == month) {
        return Err(CliError::Input(format!(
            "{entity} {month} skipped: {} observations, below min_obs {}",
            s.obs_count, s.min_obs
        )));
    }
    Err(CliError::Input(format!(
        "{entity} has no returns in {month}"
    )))
}

pub fn cmd_diagnostics(args: &DiagnosticsArgs) -> Result<(), CliError> {
    let cfg = RunConfig::new(
        args.prices.clone(),
        args.rates.clone(),
        &args.fit,
        args.out.clone(),
    )?;
    let month: MonthKey = args
        .month
        .parse()
        .map_err(|_| CliError::Config(format!("month {:?} is not YYYY-MM", args.month)))?;
    let losses = window_losses(&cfg, &args.entity, month)?;
    ensure_dir(&cfg.out)?;

    let mut grid = losses.clone();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut me = CsvBuffer::new(["u", "mean_excess"]);
    for (u, e) in mean_excess_curve(&losses, &grid) {
        me.row([fmt_num(u), fmt_num(e)]);
    }
    me.save(&cfg.out.join("mean_excess.csv"))?;

    let positive: Vec<f64> = losses.iter().copied().filter(|&x| x > 0.0).collect();
    let mut hill = CsvBuffer::new(["k", "hill"]);
    match hill_curve(&positive) {
        Ok(curve) => {
            for (k, h) in curve {
                hill.row([k.to_string(), fmt_num(h)]);
            }
        }
        Err(_) => eprintln!(
            "warning: {} {month} has {} positive losses; Hill curve left empty",
            args.entity,
            positive.len()
        ),
    }
    hill.save(&cfg.out.join("hill.csv"))?;

    let rows = threshold_stability(
        &losses,
        &stability_levels(cfg.threshold_confidence),
        &cfg.estimator(),
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let mut stab = CsvBuffer::new(["u", "k_hat", "sigma_hat", "ks"]);
    for r in rows {
        stab.row([
            fmt_num(r.u),
            fmt_opt(r.fit.map(|f| f.0)),
            fmt_opt(r.fit.map(|f| f.1)),
            fmt_opt(r.fit.map(|f| f.2)),
        ]);
    }
    stab.save(&cfg.out.join("stability.csv"))
}
