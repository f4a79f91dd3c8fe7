//! Cross-entity views over monthly risk panels: pairwise-complete Pearson
//! correlation, stacked |RFR| shares and entity-versus-index comparison.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::MonthKey;

/// Per-month values for one entity; `None` marks a missing month.
pub type MonthlySeries = Vec<(MonthKey, Option<f64>)>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("need at least 2 overlapping points, got {0}")]
    InsufficientOverlap(usize),
    #[error("zero variance over the overlap")]
    ZeroVariance,
    #[error("panel shape mismatch: {0}")]
    Shape(String),
    #[error("months must be strictly increasing")]
    UnorderedMonths,
}

/// Entity x month matrix of optional values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedPanel {
    entities: Vec<String>,
    months: Vec<MonthKey>,
    values: Vec<Vec<Option<f64>>>,
}

impl AlignedPanel {
    pub fn new(
        entities: Vec<String>,
        months: Vec<MonthKey>,
        values: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, AnalysisError> {
        if values.len() != entities.len() {
            return Err(AnalysisError::Shape(format!(
                "{} rows for {} entities",
                values.len(),
                entities.len()
            )));
        }
        if let Some(row) = values.iter().find(|r| r.len() != months.len()) {
            return Err(AnalysisError::Shape(format!(
                "row of length {} for {} months",
                row.len(),
                months.len()
            )));
        }
        if months.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AnalysisError::UnorderedMonths);
        }
        Ok(Self {
            entities,
            months,
            values,
        })
    }

    /// Builds a panel over the union of months from per-entity series.
    pub fn from_series<I, S>(series: I) -> Self
    where
        I: IntoIterator<Item = (S, MonthlySeries)>,
        S: Into<String>,
    {
        let series: Vec<(String, MonthlySeries)> =
            series.into_iter().map(|(e, v)| (e.into(), v)).collect();
        let months: Vec<MonthKey> = series
            .iter()
            .flat_map(|(_, v)| v.iter().map(|(m, _)| *m))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let values = series
            .iter()
            .map(|(_, v)| {
                let mut row = vec![None; months.len()];
                for (m, x) in v {
                    let idx = months.binary_search(m).expect("month collected above");
                    row[idx] = *x;
                }
                row
            })
            .collect();
        Self {
            entities: series.into_iter().map(|(e, _)| e).collect(),
            months,
            values,
        }
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn months(&self) -> &[MonthKey] {
        &self.months
    }

    pub fn values(&self) -> &[Vec<Option<f64>>] {
        &self.values
    }

    pub fn row(&self, entity: usize) -> &[Option<f64>] {
        &self.values[entity]
    }

    /// Row for `entity` looked up on an arbitrary month axis.
    fn row_on(&self, entity: usize, months: &[MonthKey]) -> Vec<Option<f64>> {
        months
            .iter()
            .map(|m| {
                self.months
                    .binary_search(m)
                    .ok()
                    .and_then(|i| self.values[entity][i])
            })
            .collect()
    }
}

fn overlap(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    x.iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Pearson correlation over the points where both series are present,
/// with population (1/n) moments.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>]) -> Result<f64, AnalysisError> {
    let (xs, ys) = overlap(x, y);
    if xs.len() < 2 {
        return Err(AnalysisError::InsufficientOverlap(xs.len()));
    }
    let (mx, my) = (mean(&xs), mean(&ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Convenience wrapper for complete series.
pub fn pearson_complete(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    let wrap = |v: &[f64]| v.iter().copied().map(Some).collect::<Vec<_>>();
    pearson(&wrap(x), &wrap(y))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub entities: Vec<String>,
    /// `None` where the pair has fewer than 2 overlapping points or no variance.
    pub rho: Vec<Vec<Option<f64>>>,
    pub pair_counts: Vec<Vec<usize>>,
}

pub fn correlation_matrix(panel: &AlignedPanel) -> CorrelationMatrix {
    let n = panel.entities.len();
    let mut rho = vec![vec![None; n]; n];
    let mut pair_counts = vec![vec![0; n]; n];
    for i in 0..n {
        for j in i..n {
            let (x, y) = (panel.row(i), panel.row(j));
            let count = x
                .iter()
                .zip(y)
                .filter(|(a, b)| a.is_some() && b.is_some())
                .count();
            let r = if i == j {
                pearson(x, y).ok().map(|_| 1.0)
            } else {
                pearson(x, y).ok()
            };
            rho[i][j] = r;
            rho[j][i] = r;
            pair_counts[i][j] = count;
            pair_counts[j][i] = count;
        }
    }
    CorrelationMatrix {
        entities: panel.entities.clone(),
        rho,
        pair_counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharePanel {
    pub shares: AlignedPanel,
    /// Sum of |value| over present entities, per month.
    pub totals: Vec<f64>,
}

/// Per-month share of each entity in the total absolute RFR. Missing cells
/// stay missing; a zero total gives zero shares.
pub fn stacked_shares(panel: &AlignedPanel) -> SharePanel {
    let months = panel.months.len();
    let totals: Vec<f64> = (0..months)
        .map(|m| {
            panel
                .values
                .iter()
                .filter_map(|row| row[m])
                .map(f64::abs)
                .sum()
        })
        .collect();
    let values = panel
        .values
        .iter()
        .map(|row| {
            row.iter()
                .zip(&totals)
                .map(|(v, &t)| v.map(|x| if t == 0.0 { 0.0 } else { x.abs() / t }))
                .collect()
        })
        .collect();
    SharePanel {
        shares: AlignedPanel {
            entities: panel.entities.clone(),
            months: panel.months.clone(),
            values,
        },
        totals,
    }
}

/// VaR and RFR panels over the same entities.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskPanel {
    pub var: AlignedPanel,
    pub rfr: AlignedPanel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub entity: String,
    pub index: String,
    pub var_rho: Option<f64>,
    pub rfr_rho: Option<f64>,
    /// Population std of entity RFR over that of the index, on common months.
    pub rfr_std_ratio: Option<f64>,
}

/// Correlates every entity with every index on their common months.
pub fn compare_to_index(entities: &RiskPanel, indices: &RiskPanel) -> Vec<ComparisonRow> {
    let var_months = union_months(&entities.var, &indices.var);
    let rfr_months = union_months(&entities.rfr, &indices.rfr);
    let mut rows = Vec::new();
    for (ei, entity) in entities.var.entities.iter().enumerate() {
        let ev = entities.var.row_on(ei, &var_months);
        let er = entities
            .rfr
            .entities
            .iter()
            .position(|e| e == entity)
            .map(|i| entities.rfr.row_on(i, &rfr_months))
            .unwrap_or_else(|| vec![None; rfr_months.len()]);
        for (ii, index) in indices.var.entities.iter().enumerate() {
            let iv = indices.var.row_on(ii, &var_months);
            let ir = indices
                .rfr
                .entities
                .iter()
                .position(|e| e == index)
                .map(|i| indices.rfr.row_on(i, &rfr_months))
                .unwrap_or_else(|| vec![None; rfr_months.len()]);
            let (a, b) = overlap(&er, &ir);
            let rfr_std_ratio = (a.len() >= 2)
                .then(|| (population_std(&a), population_std(&b)))
                .filter(|&(_, sb)| sb > 0.0)
                .map(|(sa, sb)| sa / sb);
            rows.push(ComparisonRow {
                entity: entity.clone(),
                index: index.clone(),
                var_rho: pearson(&ev, &iv).ok(),
                rfr_rho: pearson(&er, &ir).ok(),
                rfr_std_ratio,
            });
        }
    }
    rows
}

fn union_months(a: &AlignedPanel, b: &AlignedPanel) -> Vec<MonthKey> {
    a.months
        .iter()
        .chain(&b.months)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
