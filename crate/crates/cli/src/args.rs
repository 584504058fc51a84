use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "kslab",
    version,
    about = "Product-observable contextuality: quantum predictions, hidden-variable \
             enumeration, apparatus simulation and counterfactual timelines"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// Seed of the random stream used for sampled runs.
    #[arg(long, default_value_t = 0, global = true)]
    pub seed: u64,

    /// Number of sampled trials; 0 reports analytic results only.
    #[arg(long, default_value_t = 0, global = true)]
    pub trials: u64,

    /// Omit the timestamp so identical invocations give identical bytes.
    #[arg(long, global = true)]
    pub deterministic: bool,

    /// Run the scenario described by a JSON file instead of a subcommand.
    #[arg(long, global = true, value_name = "PATH")]
    pub scenario_file: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Commutator norms of single-particle and product observables.
    Commutators,
    /// Quantum versus noncontextual predictions for (Z1X2, X1Z2).
    KsPredict(KsParams),
    /// Simulate the detector stage (1) or the beam-combiner stage (2).
    Apparatus(ApparatusParams),
    /// Classify outcomes on counterfactually modified timelines.
    Counterfactual(CounterfactualParams),
    /// Run the analytic invariant suite.
    Verify(VerifyParams),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Qm,
    Nchv,
    #[default]
    Both,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KsParams {
    #[arg(long, value_enum, default_value_t = Model::Both)]
    #[serde(default)]
    pub model: Model,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApparatusParams {
    /// 1: a detector behind every Stern-Gerlach outlet; 2: detectors behind the combiners.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stage: u8,
    /// Input state: a preset name or `re,im; re,im; re,im; re,im`.
    #[arg(long, default_value = "phi+")]
    #[serde(default = "default_input")]
    pub input: String,
    /// Observable measured after detection, e.g. X1X2.
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follow_up: Option<String>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[arg(skip)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_input() -> String {
    "phi+".into()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterfactualScenario {
    /// x then z on a spin; counterfactually repeat x or measure z first.
    #[value(alias = "fig3")]
    #[serde(alias = "fig3")]
    SpinXz,
    /// Insert detectors before the beam combiners and re-classify the record.
    ApparatusRetrodiction,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualParams {
    #[arg(long, value_enum)]
    pub scenario: CounterfactualScenario,
    /// Overrides the preparation (spin state for spin-xz, path-spin state
    /// for apparatus-retrodiction).
    #[arg(long)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
}

#[derive(Clone, Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyParams {
    /// JSON 4x4 combiner matrix (entries `x` or `[re, im]`) replacing the built-in one.
    #[arg(long, value_name = "PATH")]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combiner_file: Option<PathBuf>,
}
