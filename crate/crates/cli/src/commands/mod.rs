mod analyze;
mod diagnostics;
mod synth;
mod var;

pub use analyze::{cmd_analyze, read_var_dir, VarTable};
pub use diagnostics::{cmd_diagnostics, window_losses};
pub use synth::{bundled_spec, cmd_synth, load_spec, BUNDLED_SPEC};
pub use var::{
    check_entity_id, cmd_var, compute_panel, entity_risk, failure_reason, var_csv, var_file,
    Counts, EntityRisk, VAR_HEADER,
};
