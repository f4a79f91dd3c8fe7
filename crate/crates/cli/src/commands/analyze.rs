use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use tailrisk::analysis::{
    compare_to_index, correlation_matrix, stacked_shares, AlignedPanel, RiskPanel,
};
use tailrisk::risk::sign_fractions;
use tailrisk::MonthKey;

use crate::config::AnalyzeArgs;
use crate::error::CliError;
use crate::output::{ensure_dir, fmt_num, fmt_opt, CsvBuffer};

#[derive(Debug, Deserialize)]
struct VarRow {
    entity: String,
    month: MonthKey,
    var: Option<f64>,
    rfr: Option<f64>,
}

/// One entity's monthly VaR and RFR as read back from `var_<entity>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarTable {
    pub entity: String,
    pub var: Vec<(MonthKey, Option<f64>)>,
    pub rfr: Vec<(MonthKey, Option<f64>)>,
}

fn read_var_file(path: &Path) -> Result<VarTable, CliError> {
    let bad = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(bad)?;
    let rows: Vec<VarRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(bad)?;
    let entity = match rows.first() {
        Some(r) => r.entity.clone(),
        None => return Err(CliError::Input(format!("{}: no rows", path.display()))),
    };
    if let Some(r) = rows.iter().find(|r| r.entity != entity) {
        return Err(CliError::Input(format!(
            "{}: mixes entities {entity} and {}",
            path.display(),
            r.entity
        )));
    }
    Ok(VarTable {
        entity,
        var: rows.iter().map(|r| (r.month, r.var)).collect(),
        rfr: rows.iter().map(|r| (r.month, r.rfr)).collect(),
    })
}

/// Every `var_*.csv` in `dir`, ordered by file name.
pub fn read_var_dir(dir: &Path) -> Result<Vec<VarTable>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("var_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| read_var_file(p)).collect()
}

fn risk_panel(tables: &[&VarTable]) -> RiskPanel {
    RiskPanel {
        var: AlignedPanel::from_series(tables.iter().map(|t| (t.entity.clone(), t.var.clone()))),
        rfr: AlignedPanel::from_series(tables.iter().map(|t| (t.entity.clone(), t.rfr.clone()))),
    }
}

fn save_matrix(entities: &[String], cells: &[Vec<String>], path: &Path) -> Result<(), CliError> {
    let mut csv =
        CsvBuffer::new(std::iter::once("entity").chain(entities.iter().map(String::as_str)));
    for (e, row) in entities.iter().zip(cells) {
        csv.row(std::iter::once(e.as_str()).chain(row.iter().map(String::as_str)));
    }
    csv.save(path)
}

fn save_correlations(panel: &AlignedPanel, out: &Path, name: &str) -> Result<(), CliError> {
    let m = correlation_matrix(panel);
    let rho: Vec<Vec<String>> = m
        .rho
        .iter()
        .map(|r| r.iter().map(|&v| fmt_opt(v)).collect())
        .collect();
    save_matrix(&m.entities, &rho, &out.join(format!("corr_{name}.csv")))?;
    let counts: Vec<Vec<String>> = m
        .pair_counts
        .iter()
        .map(|r| r.iter().map(usize::to_string).collect())
        .collect();
    save_matrix(
        &m.entities,
        &counts,
        &out.join(format!("pair_counts_{name}.csv")),
    )
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let tables = read_var_dir(&args.var_dir)?;
    for idx in &args.indices {
        if !tables.iter().any(|t| &t.entity == idx) {
            return Err(CliError::Config(format!(
                "index {idx} has no var file in {}",
                args.var_dir.display()
            )));
        }
    }
    let (indices, entities): (Vec<&VarTable>, Vec<&VarTable>) = tables
        .iter()
        .partition(|t| args.indices.contains(&t.entity));
    if entities.len() < 2 {
        return Err(CliError::Input(format!(
            "need at least 2 non-index entities, found {}",
            entities.len()
        )));
    }
    ensure_dir(&args.out)?;

    let panel = risk_panel(&entities);
    save_correlations(&panel.var, &args.out, "var")?;
    save_correlations(&panel.rfr, &args.out, "rfr")?;

    let shares = stacked_shares(&panel.rfr);
    let mut csv = CsvBuffer::new(["month", "entity", "share", "total_magnitude"]);
    for (m, month) in shares.shares.months().iter().enumerate() {
        let month = month.to_string();
        let total = fmt_num(shares.totals[m]);
        for (e, entity) in shares.shares.entities().iter().enumerate() {
            csv.row([&month, entity, &fmt_opt(shares.shares.row(e)[m]), &total]);
        }
    }
    csv.save(&args.out.join("shares.csv"))?;

    let mut fractions: Vec<(&str, Option<_>)> = entities
        .iter()
        .map(|t| {
            let values = t.rfr.iter().filter_map(|(_, v)| *v);
            (t.entity.as_str(), sign_fractions(values).ok())
        })
        .collect();
    fractions.sort_by(|a, b| {
        let above = |x: &Option<tailrisk::risk::SignFractions>| x.map_or(-1.0, |f| f.above);
        above(&b.1).total_cmp(&above(&a.1)).then(a.0.cmp(b.0))
    });
    let mut csv = CsvBuffer::new(["entity", "above", "below", "zero", "count"]);
    for (entity, f) in fractions {
        csv.row([
            entity.to_owned(),
            fmt_opt(f.map(|f| f.above)),
            fmt_opt(f.map(|f| f.below)),
            fmt_opt(f.map(|f| f.zero)),
            f.map_or(0, |f| f.count).to_string(),
        ]);
    }
    csv.save(&args.out.join("sign_fractions.csv"))?;

    if !indices.is_empty() {
        let rows = compare_to_index(&panel, &risk_panel(&indices));
        let mut csv = CsvBuffer::new(["entity", "index", "var_rho", "rfr_rho", "rfr_std_ratio"]);
        for r in rows {
            csv.row([
                r.entity,
                r.index,
                fmt_opt(r.var_rho),
                fmt_opt(r.rfr_rho),
                fmt_opt(r.rfr_std_ratio),
            ]);
        }
        csv.save(&args.out.join("comparison.csv"))?;
    }
    Ok(())
}
