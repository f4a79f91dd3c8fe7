use std::fs;

use tailrisk::ingest::{write_prices, write_rates};
use tailrisk::synthgen::{generate_panel, SynthSpec};

use crate::config::SynthArgs;
use crate::error::CliError;
use crate::output::{ensure_dir, write_atomic};

/// The synthetic panel used by the examples and the golden-file tests.
pub const BUNDLED_SPEC: &str = include_str!("../../fixtures/bundled_spec.json");

pub fn bundled_spec() -> SynthSpec {
    serde_json::from_str(BUNDLED_SPEC).expect("bundled spec parses")
}

pub fn load_spec(args: &SynthArgs) -> Result<SynthSpec, CliError> {
    let mut spec = match &args.spec {
        None => bundled_spec(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

/// Writes `prices.csv` and `rates.csv` for the synth spec into `args.out`.
pub fn cmd_synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = load_spec(args)?;
    let panel = generate_panel(&spec).map_err(|e| CliError::Config(e.to_string()))?;
    ensure_dir(&args.out)?;

    let mut prices = Vec::new();
    write_prices(&mut prices, &panel.prices).map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&args.out.join("prices.csv"), &prices)?;

    let mut rates = Vec::new();
    write_rates(&mut rates, &panel.rates).map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&args.out.join("rates.csv"), &rates)
}
