//! JSON scenario files: `{"name": ..., "parameters": {...}}`.

use std::path::Path;

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::args::{ApparatusParams, Command, CounterfactualParams, KsParams, VerifyParams};
use crate::error::{CliError, CliResult};

/// Names accepted in the `name` field.
pub const SCENARIOS: [&str; 5] = ["commutators", "ks-predict", "apparatus", "counterfactual", "verify"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSpec {
    name: String,
    #[serde(default)]
    parameters: Map<String, Value>,
}

fn params<T: for<'de> Deserialize<'de>>(name: &str, p: Map<String, Value>) -> CliResult<T> {
    serde_json::from_value(Value::Object(p))
        .map_err(|e| CliError::Validation(format!("parameters of `{name}`: {e}")))
}

/// Parses a scenario document into the equivalent subcommand.
pub fn parse_scenario(text: &str) -> CliResult<Command> {
    let spec: ScenarioSpec = match serde_json::from_str::<Value>(text) {
        Err(e) => return Err(CliError::Parse(e.to_string())),
        Ok(v) => serde_json::from_value(v).map_err(|e| CliError::Validation(e.to_string()))?,
    };
    let name = spec.name.as_str();
    Ok(match name {
        "commutators" => {
            if !spec.parameters.is_empty() {
                return Err(CliError::Validation("`commutators` takes no parameters".into()));
            }
            Command::Commutators
        }
        "ks-predict" => Command::KsPredict(params::<KsParams>(name, spec.parameters)?),
        "apparatus" => Command::Apparatus(params::<ApparatusParams>(name, spec.parameters)?),
        "counterfactual" => {
            Command::Counterfactual(params::<CounterfactualParams>(name, spec.parameters)?)
        }
        "verify" => Command::Verify(params::<VerifyParams>(name, spec.parameters)?),
        other => {
            return Err(CliError::Validation(format!(
                "unknown scenario `{other}`; expected one of {}",
                SCENARIOS.join(", ")
            )))
        }
    })
}

pub fn read_scenario(path: &Path) -> CliResult<Command> {
    parse_scenario(&std::fs::read_to_string(path)?)
}
