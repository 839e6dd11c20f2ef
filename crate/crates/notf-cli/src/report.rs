//! The `report.json` envelope every subcommand writes: whatever slice of
//! context the command had, plus the artifact paths it produced. Field
//! contents are reproducible for fixed inputs; wall-clock only ever appears
//! in trace files and manifests.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use notf_core::eval::EvalReport;
use notf_core::solver::SolverTrace;
use notf_core::{SolverConfig, SynthSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth_spec: Option<SynthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver_config: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub artifacts: BTreeMap<String, String>,
}

/// Trace endpoint without the per-iteration histories (those live in
/// `trace.json`) and without timings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub outer_iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_res1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_res2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
}

impl TraceSummary {
    pub fn from_trace(trace: &SolverTrace) -> Self {
        Self {
            outer_iterations: trace.outer_iterations(),
            converged: trace.converged,
            final_res1: trace.final_res1(),
            final_res2: trace.final_res2(),
            final_objective: trace.objective_history.last().copied(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
