use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{check_schema, Arch, ExperimentConfig};
use super::report::{Aggregate, TOOLKIT_VERSION};
use super::runner::{now_timestamp, prepare_data, run_on_data, write_outputs};
use crate::datasets::write_atomic;
use crate::error::{MdlError, Result};

pub const SWEEP_SCHEMA: &str = include_str!("../../schema/sweep.schema.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub arch: Arch,
    pub hidden: usize,
    /// Report location relative to the sweep's output directory.
    pub report: PathBuf,
    pub aggregate: Vec<Aggregate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub toolkit_version: String,
    pub timestamp: String,
    pub settings: Vec<SweepEntry>,
}

/// Directory name of one setting, e.g. `mlp2-h50`.
pub fn setting_name(arch: Arch, hidden: usize) -> String {
    match arch {
        Arch::Linear => "linear".into(),
        _ => format!("{}-h{hidden}", arch.as_str()),
    }
}

/// Runs the config once per (arch, hidden) of its `sweep` section on shared
/// data; each setting writes a full report under `out_dir/<setting>/`, and
/// `sweep.json` lists them all.
pub fn run_sweep(config: &ExperimentConfig, base_dir: &Path) -> Result<PathBuf> {
    let grid = config
        .sweep
        .as_ref()
        .ok_or_else(|| MdlError::Usage("config has no [sweep] section".into()))?;
    let data = prepare_data(config, base_dir)?;
    let out_dir = base_dir.join(&config.out_dir);
    let mut settings = Vec::new();
    for &arch in &grid.archs {
        let sizes: &[usize] = if arch == Arch::Linear { &grid.hidden[..1] } else { &grid.hidden };
        for &hidden in sizes {
            let name = setting_name(arch, hidden);
            let mut setting = config.clone();
            setting.probe.arch = arch;
            setting.probe.hidden = hidden;
            setting.out_dir = config.out_dir.join(&name);
            setting.sweep = None;
            let report = run_on_data(&setting, &data, now_timestamp())?;
            write_outputs(&report, &out_dir.join(&name))?;
            settings.push(SweepEntry {
                arch,
                hidden,
                report: PathBuf::from(&name).join("report.json"),
                aggregate: report.aggregate,
            });
        }
    }
    let summary = SweepSummary {
        toolkit_version: TOOLKIT_VERSION.into(),
        timestamp: now_timestamp(),
        settings,
    };
    let value = serde_json::to_value(&summary).map_err(|e| MdlError::Consistency(e.to_string()))?;
    check_schema(&value, SWEEP_SCHEMA, "sweep summary")?;
    let path = out_dir.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| MdlError::Consistency(e.to_string()))?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
