//! Peaks-over-threshold tail-risk toolkit for daily price series.
//!
//! The pipeline runs prices -> excess returns -> monthly loss windows ->
//! threshold + generalized Pareto fit -> monthly VaR -> risk fluctuation
//! range (VaR slope) -> cross-entity analysis.
//!
//! Shape convention: the GPD is written `F(x) = 1 - (1 - k x / sigma)^(1/k)`,
//! so `k = -xi` against the usual extreme-value shape. Negative `k` means a
//! heavy tail.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod gpd;
pub mod ingest;
pub mod returns;
pub mod risk;
pub mod synthgen;
pub mod threshold;

pub use gpd::{Estimator, EstimatorKind, GpdError, GpdFit, GpdParams};
pub use ingest::{MonthKey, PriceSeries, RiskFreeSeries};
pub use returns::{excess_returns, ExcessReturnSeries};
pub use risk::{VarConfig, VarPoint, VarStatus};
