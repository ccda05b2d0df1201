use schemars::schema::RootSchema;
use schemars::schema_for;

use crate::config::RunConfig;
use crate::error::ErrorReport;
use crate::report::*;

/// Names and schemas of every document the CLI writes or reads.
pub fn all() -> Vec<(&'static str, RootSchema)> {
    vec![
        ("run_config", schema_for!(RunConfig)),
        ("magic", schema_for!(MagicReport)),
        ("trace", schema_for!(TraceReport)),
        ("bands", schema_for!(BandsReport)),
        ("wavefunction", schema_for!(WavefunctionReport)),
        ("chern", schema_for!(ChernReport)),
        ("sweep", schema_for!(SweepReport)),
        ("error", schema_for!(ErrorReport)),
    ]
}

pub fn file_name(name: &str) -> String {
    format!("{name}.schema.json")
}
