//! Command-line arguments and the validated run configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tailrisk::gpd::DEFAULT_R_ZHANG;
use tailrisk::ingest::DEFAULT_MIN_OBS;
use tailrisk::risk::{VarConfig, DEFAULT_VAR_P};
use tailrisk::threshold::DEFAULT_THRESHOLD_CONFIDENCE;
use tailrisk::Estimator;

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tailrisk",
    version,
    about = "Monthly GPD tail-risk indices for daily price panels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic price panel and rate file.
    Synth(SynthArgs),
    /// Monthly VaR and RFR per entity, plus a run summary.
    Var(VarArgs),
    /// Mean-excess, Hill and threshold-stability tables for one window.
    Diagnostics(DiagnosticsArgs),
    /// Correlation, share, sign-fraction and index tables from `var` output.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON synth spec; the bundled spec when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the synth spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum EstimatorArg {
    #[value(name = "profile_mle")]
    #[serde(rename = "profile_mle")]
    ProfileMle,
    #[value(name = "zhang_lm")]
    #[serde(rename = "zhang_lm")]
    ZhangLm,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_CONFIDENCE)]
    pub threshold_confidence: f64,
    #[arg(long, default_value_t = DEFAULT_VAR_P)]
    pub var_p: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::ProfileMle)]
    pub estimator: EstimatorArg,
    #[arg(long, default_value_t = DEFAULT_R_ZHANG, allow_hyphen_values = true)]
    pub r_zhang: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_OBS)]
    pub min_obs: usize,
    /// Calendar months pooled into each fit (the month itself plus predecessors).
    #[arg(long, default_value_t = 1)]
    pub pool_window: usize,
}

#[derive(Debug, Args)]
pub struct VarArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long)]
    pub rates: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write `returns_<entity>.csv` with the daily excess returns.
    #[arg(long)]
    pub write_returns: bool,
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    #[arg(long)]
    pub prices: PathBuf,
    #[arg(long)]
    pub rates: PathBuf,
    #[arg(long)]
    pub entity: String,
    /// Calendar month as `YYYY-MM`.
    #[arg(long)]
    pub month: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding `var_<entity>.csv` files.
    #[arg(long)]
    pub var_dir: PathBuf,
    /// Entity id to treat as a market index (repeatable).
    #[arg(long = "index")]
    pub indices: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Every effective fitting parameter, echoed into `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub prices: PathBuf,
    pub rates: PathBuf,
    pub threshold_confidence: f64,
    pub var_p: f64,
    pub estimator: EstimatorArg,
    pub r_zhang: f64,
    pub min_obs: usize,
    pub pool_window: usize,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(
        prices: PathBuf,
        rates: PathBuf,
        fit: &FitArgs,
        out: PathBuf,
    ) -> Result<Self, CliError> {
        let cfg = Self {
            prices,
            rates,
            threshold_confidence: fit.threshold_confidence,
            var_p: fit.var_p,
            estimator: fit.estimator,
            r_zhang: fit.r_zhang,
            min_obs: fit.min_obs,
            pool_window: fit.pool_window,
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let (t, p) = (self.threshold_confidence, self.var_p);
        if !(t > 0.0 && t < p && p < 1.0) {
            return Err(CliError::Config(format!(
                "need 0 < threshold_confidence < var_p < 1, got threshold_confidence={t}, var_p={p}"
            )));
        }
        if self.estimator == EstimatorArg::ZhangLm {
            let r = self.r_zhang;
            if !(r.is_finite() && r < 0.5 && r != 0.0) {
                return Err(CliError::Config(format!(
                    "need r_zhang < 0.5 and r_zhang != 0, got {r}"
                )));
            }
        }
        if self.min_obs < 2 {
            return Err(CliError::Config(format!(
                "need min_obs >= 2, got {}",
                self.min_obs
            )));
        }
        if self.pool_window < 1 {
            return Err(CliError::Config("need pool_window >= 1, got 0".into()));
        }
        Ok(())
    }

    pub fn estimator(&self) -> Estimator {
        match self.estimator {
            EstimatorArg::ProfileMle => Estimator::ProfileMle,
            EstimatorArg::ZhangLm => Estimator::ZhangLm { r: self.r_zhang },
        }
    }

    pub fn var_config(&self) -> VarConfig {
        VarConfig {
            threshold_confidence: self.threshold_confidence,
            p: self.var_p,
            estimator: self.estimator(),
        }
    }
}
