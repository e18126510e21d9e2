use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{check_schema, ExperimentConfig, CONFIG_SCHEMA};
use crate::codes::{CurvePoint, Schedule};
use crate::datasets::write_atomic;
use crate::error::{MdlError, Result};

pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// `bits / 1000` rounded to 4 significant digits.
pub fn kbits(bits: f64) -> f64 {
    let k = bits / 1000.0;
    if k == 0.0 || !k.is_finite() {
        return k;
    }
    let digits = 3 - k.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits);
    (k * scale).round() / scale
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub dim: usize,
    pub num_classes: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Known `I(x; y)` of a gaussian synthetic task with its own labels.
    pub true_mi_bits: Option<f64>,
}

/// Input-independent codes of the training labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub uniform_bits: f64,
    pub uniform_kbits: f64,
    pub prior_bits: f64,
    pub prior_kbits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub method: String,
    pub seed: u64,
    pub total_bits: f64,
    pub kbits: f64,
    pub compression_uniform: f64,
    pub compression_prior: f64,
    pub accuracy: f64,
    /// `"test"` when a test set was given, else `"train"`.
    pub accuracy_split: String,
    pub data_bits: f64,
    pub model_bits: f64,
    pub model_bits_negative: bool,
    pub epochs_run: usize,
    pub learning_curve: Option<Vec<CurvePoint>>,
    pub schedule: Option<Schedule>,
    pub pruned_architecture: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (zero for a single seed).
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self { mean, std }
    }

    pub fn relative_std(&self) -> f64 {
        self.std / self.mean.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub seeds: usize,
    pub total_bits: Stat,
    pub kbits: Stat,
    pub accuracy: Stat,
    pub compression_uniform: Stat,
}

impl Aggregate {
    pub fn over(method: &str, results: &[SeedResult]) -> Self {
        let pick = |f: fn(&SeedResult) -> f64| -> Vec<f64> { results.iter().map(f).collect() };
        let total = Stat::of(&pick(|r| r.total_bits));
        Self {
            method: method.into(),
            seeds: results.len(),
            total_bits: total,
            kbits: Stat {
                mean: kbits(total.mean),
                std: kbits(total.std),
            },
            accuracy: Stat::of(&pick(|r| r.accuracy)),
            compression_uniform: Stat::of(&pick(|r| r.compression_uniform)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodelengthReport {
    pub toolkit_version: String,
    pub timestamp: String,
    pub config: ExperimentConfig,
    pub dataset: DatasetSummary,
    pub baselines: Baselines,
    pub results: Vec<SeedResult>,
    pub aggregate: Vec<Aggregate>,
}

impl CodelengthReport {
    pub fn results_for<'a>(&'a self, method: &'a str) -> impl Iterator<Item = &'a SeedResult> + 'a {
        self.results.iter().filter(move |r| r.method == method)
    }

    pub fn aggregate_for(&self, method: &str) -> Option<&Aggregate> {
        self.aggregate.iter().find(|a| a.method == method)
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| MdlError::Consistency(format!("report does not serialize: {e}")))
    }

    /// Checks the report schema and the config echo against the config schema.
    pub fn validate_schema(&self) -> Result<()> {
        let value = self.to_json()?;
        check_schema(&value, REPORT_SCHEMA, "report").map_err(as_consistency)?;
        check_schema(&value["config"], CONFIG_SCHEMA, "report config").map_err(as_consistency)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MdlError::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| MdlError::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        check_schema(&value, REPORT_SCHEMA, "report").map_err(as_consistency)?;
        check_schema(&value["config"], CONFIG_SCHEMA, "report config").map_err(as_consistency)?;
        serde_json::from_value(value).map_err(|e| MdlError::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    /// Writes `report.json` in `dir` atomically and returns its path.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        self.validate_schema()?;
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| MdlError::io(dir, e))?;
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(self).map_err(|e| MdlError::Consistency(e.to_string()))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// A schema failure of a report is a data problem, not a usage one.
fn as_consistency(err: MdlError) -> MdlError {
    match err {
        MdlError::Usage(msg) => MdlError::Consistency(msg),
        other => other,
    }
}

/// One line per variational seed: `seed <s>: <architecture>`.
pub fn pruned_arch_text(report: &CodelengthReport) -> Option<String> {
    let mut text = String::new();
    for r in report.results_for("variational") {
        let arch = r.pruned_architecture.as_deref()?;
        let _ = writeln!(text, "seed {}: {arch}", r.seed);
    }
    (!text.is_empty()).then_some(text)
}

/// CSV text of one learning curve; the last row's cumulative bits equal the
/// code's total.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("step_index,t_i,next_block_bits_per_target,test_accuracy,cumulative_bits\n");
    for p in curve {
        let test = p.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.step_index, p.train_size, p.block_bits_per_target, test, p.cumulative_bits
        );
    }
    out
}

/// Writes `<method>_seed<seed>.csv` for every result carrying a learning
/// curve.
pub fn emit_curves(report_path: impl AsRef<Path>, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let report_path = report_path.as_ref();
    let report = CodelengthReport::read(report_path)?;
    let curves: Vec<(&SeedResult, &Vec<CurvePoint>)> =
        report.results.iter().filter_map(|r| r.learning_curve.as_ref().map(|c| (r, c))).collect();
    if curves.is_empty() {
        return Err(MdlError::Consistency(format!("no curve in report {}", report_path.display())));
    }
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| MdlError::io(out_dir, e))?;
    let mut written = Vec::with_capacity(curves.len());
    for (result, curve) in curves {
        let path = out_dir.join(format!("{}_seed{}.csv", result.method, result.seed));
        write_atomic(&path, curve_csv(curve).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
