//! Declarative experiment runner for the `poisson-entropy` crate.
//!
//! A scenario file (TOML) names a system and a list of experiments; running
//! it produces `report.json`, `metadata.json` and a CSV bundle for plotting.
//! See the repository README for the schema.

pub mod report;
pub mod run;
pub mod scenario;

use std::path::Path;

pub use report::{emit_plot_data, Check, Class, Report};
pub use run::{run_scenario, Outcome, RunOptions};
pub use scenario::{Diagnostic, Experiment, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid scenario:\n{}", .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),

    #[error(transparent)]
    Core(#[from] poisson_entropy::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(String),
}

impl LabError {
    pub(crate) fn csv(e: csv::Error) -> Self {
        Self::Csv(e.to_string())
    }
}

/// Built-in scenarios: `(name, TOML source)`.
pub const BUILTIN: &[(&str, &str)] = &[
    ("half-half", include_str!("../scenarios/half-half.toml")),
    ("telescoping", include_str!("../scenarios/telescoping.toml")),
    ("random-walk", include_str!("../scenarios/random-walk.toml")),
    ("transient", include_str!("../scenarios/transient.toml")),
    ("rank-one-tower", include_str!("../scenarios/rank-one-tower.toml")),
    ("violating-tower", include_str!("../scenarios/violating-tower.toml")),
    ("suspension", include_str!("../scenarios/suspension.toml")),
];

/// Reads `builtin:<name>` or a path.
pub fn load_scenario(arg: &str) -> Result<Scenario, LabError> {
    let text = match arg.strip_prefix("builtin:") {
        Some(name) => BUILTIN
            .iter()
            .find(|b| b.0 == name)
            .map(|b| b.1.to_string())
            .ok_or_else(|| LabError::Config(format!("no built-in scenario `{name}`")))?,
        None => {
            std::fs::read_to_string(Path::new(arg)).map_err(|e| LabError::Config(format!("cannot read {arg}: {e}")))?
        }
    };
    Scenario::from_toml(&text).map_err(|e| match e {
        LabError::Config(m) => LabError::Config(format!("{arg}: {m}")),
        other => other,
    })
}

/// Parses, validates and builds the system without running anything.
pub fn validate_scenario(s: &Scenario) -> Result<(), LabError> {
    let problems = s.validate();
    if !problems.is_empty() {
        return Err(LabError::Invalid(problems));
    }
    if let Some(spec) = &s.system {
        spec.build().map_err(|e| LabError::Config(format!("system: {e}")))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for (name, _) in BUILTIN {
            let s = load_scenario(&format!("builtin:{name}")).unwrap();
            assert_eq!(&s.name, name);
            validate_scenario(&s).unwrap();
        }
    }
}
