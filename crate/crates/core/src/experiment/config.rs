use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::codes::DEFAULT_FRACTIONS;
use crate::datasets::{GaussianTaskSpec, TypedTaskSpec};
use crate::error::{MdlError, Result};
use crate::numerics::MlpConfig;
use crate::probe::TrainConfig;
use crate::varcode::DEFAULT_PRUNE_THRESHOLD;

pub const CONFIG_SCHEMA: &str = include_str!("../../schema/config.schema.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Online,
    Variational,
    Baselines,
    Both,
}

impl Method {
    pub fn runs_online(self) -> bool {
        matches!(self, Method::Online | Method::Both)
    }

    pub fn runs_variational(self) -> bool {
        matches!(self, Method::Variational | Method::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Linear,
    Mlp1,
    Mlp2,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Linear => "linear",
            Arch::Mlp1 => "mlp1",
            Arch::Mlp2 => "mlp2",
        }
    }

    pub fn hidden_sizes(self, hidden: usize) -> Vec<usize> {
        match self {
            Arch::Linear => vec![],
            Arch::Mlp1 => vec![hidden],
            Arch::Mlp2 => vec![hidden, hidden],
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = MdlError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Arch::Linear),
            "mlp1" => Ok(Arch::Mlp1),
            "mlp2" => Ok(Arch::Mlp2),
            other => Err(MdlError::Usage(format!("unknown architecture {other:?} (expected linear, mlp1 or mlp2)"))),
        }
    }
}

/// A dataset on disk: either an explicit pair of files or a stem `S` naming
/// `S.features.bin` / `S.labels.bin` (or their `.csv` variants).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetFiles {
    Stem(PathBuf),
    Pair { features: PathBuf, labels: PathBuf },
}

impl DatasetFiles {
    pub fn resolve(&self, base: &Path) -> (PathBuf, PathBuf) {
        match self {
            DatasetFiles::Pair { features, labels } => (base.join(features), base.join(labels)),
            DatasetFiles::Stem(stem) => {
                let stem = base.join(stem);
                let with = |suffix: &str| PathBuf::from(format!("{}.{suffix}", stem.display()));
                let bin = (with("features.bin"), with("labels.bin"));
                if !bin.0.exists() && with("features.csv").exists() {
                    (with("features.csv"), with("labels.csv"))
                } else {
                    bin
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// The generator's own labels.
    Task,
    /// One label per word type, drawn from the empirical label distribution.
    Control,
    /// Labels drawn uniformly, independent of the inputs.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SyntheticTask {
    Typed {
        dim: usize,
        num_classes: usize,
        vocab: usize,
        context_noise: f64,
        label_noise: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        informative_dims: Option<usize>,
    },
    Gaussian {
        dim: usize,
        separation: f64,
    },
}

impl SyntheticTask {
    pub fn typed_spec(&self, n: usize) -> Option<TypedTaskSpec> {
        match *self {
            SyntheticTask::Typed {
                dim,
                num_classes,
                vocab,
                context_noise,
                label_noise,
                informative_dims,
            } => Some(TypedTaskSpec {
                n,
                dim,
                num_classes,
                vocab,
                context_noise,
                label_noise,
                informative_dims,
            }),
            SyntheticTask::Gaussian { .. } => None,
        }
    }

    pub fn gaussian_spec(&self, n: usize) -> Option<GaussianTaskSpec> {
        match *self {
            SyntheticTask::Gaussian { dim, separation } => Some(GaussianTaskSpec { dim, separation, n }),
            SyntheticTask::Typed { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub task: SyntheticTask,
    pub n_train: usize,
    #[serde(default)]
    pub n_dev: usize,
    #[serde(default)]
    pub n_test: usize,
    #[serde(default = "default_labels")]
    pub labels: LabelKind,
    /// Replace features by `ReLU(Q·x)` with a random orthonormal `Q` of this
    /// many rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_features: Option<usize>,
    /// Seed of the data itself; probe seeds come from the experiment.
    #[serde(default)]
    pub seed: u64,
}

fn default_labels() -> LabelKind {
    LabelKind::Task
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<DatasetFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev: Option<DatasetFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<DatasetFiles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
}

/// Standard-probe settings, used by the online code.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub arch: Arch,
    pub hidden: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub anneal_factor: f64,
    pub patience: usize,
    pub annealing: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            arch: Arch::Mlp2,
            hidden: 1000,
            lr: 0.001,
            batch: 64,
            epochs: 1000,
            anneal_factor: 0.5,
            patience: 4,
            annealing: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationalSettings {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Posterior draws for the expected data cost.
    pub samples: usize,
}

impl Default for VariationalSettings {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch: 64,
            epochs: 200,
            samples: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub archs: Vec<Arch>,
    pub hidden: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Worker threads; results do not depend on it.
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    pub out_dir: PathBuf,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    pub data: DataConfig,
    #[serde(default)]
    pub probe: ProbeSettings,
    #[serde(default)]
    pub variational: VariationalSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_jobs() -> usize {
    1
}

fn default_fractions() -> Vec<f64> {
    DEFAULT_FRACTIONS.to_vec()
}

fn default_prune_threshold() -> f64 {
    DEFAULT_PRUNE_THRESHOLD
}

/// Validates a JSON value against one of the in-repo schemas.
pub(crate) fn check_schema(instance: &serde_json::Value, schema_text: &str, what: &str) -> Result<()> {
    let schema: serde_json::Value =
        serde_json::from_str(schema_text).map_err(|e| MdlError::Usage(format!("{what} schema does not parse: {e}")))?;
    let compiled = jsonschema::JSONSchema::compile(&schema)
        .map_err(|e| MdlError::Usage(format!("{what} schema does not compile: {e}")))?;
    if let Err(errors) = compiled.validate(instance) {
        let messages: Vec<String> = errors.map(|e| format!("{}: {e}", e.instance_path)).collect();
        return Err(MdlError::Usage(format!("{what} fails its schema: {}", messages.join("; "))));
    }
    Ok(())
}

/// Parses a TOML literal, falling back to a bare string.
fn parse_scalar(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut table) => table.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

/// Sets `path` (dot-separated, e.g. `probe.lr`) to `value` in a TOML tree,
/// creating intermediate tables as needed.
pub fn apply_override(root: &mut toml::Table, path: &str, value: &str) -> Result<()> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(|| MdlError::Usage(format!("empty override key in {path:?}")))?;
    let mut table = root;
    for key in keys {
        let entry = table.entry(key).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| MdlError::Usage(format!("override {path:?}: {key} is not a section")))?;
    }
    table.insert(last.to_string(), parse_scalar(value));
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, applies `key=value` overrides, checks the schema and
    /// the cross-field rules.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| MdlError::Usage(format!("config does not parse: {e}")))?;
        for (key, value) in overrides {
            apply_override(&mut table, key, value)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let json = serde_json::to_value(&table).map_err(|e| MdlError::Usage(format!("config is not representable as JSON: {e}")))?;
        check_schema(&json, CONFIG_SCHEMA, "config")?;
        let config: Self = table.try_into().map_err(|e| MdlError::Usage(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file. Relative paths inside it are later resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MdlError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(MdlError::Usage("seeds must not be empty".into()));
        }
        let has_files = self.data.train.is_some();
        if has_files == self.data.synthetic.is_some() {
            return Err(MdlError::Usage("data needs exactly one of `train` files or a `synthetic` spec".into()));
        }
        let has_dev = match &self.data.synthetic {
            Some(spec) => spec.n_dev > 0,
            None => self.data.dev.is_some(),
        };
        if !has_dev && self.method.runs_online() && self.probe.annealing {
            return Err(MdlError::Usage("the online code anneals on a dev set; add dev data or set probe.annealing = false".into()));
        }
        if let Some(spec) = &self.data.synthetic {
            if spec.n_train < 2 {
                return Err(MdlError::Usage("synthetic.n_train must be at least 2".into()));
            }
            if let Some(typed) = spec.task.typed_spec(spec.n_train) {
                typed.validate()?;
            }
            if let Some(gauss) = spec.task.gaussian_spec(spec.n_train) {
                gauss.validate()?;
                if spec.labels == LabelKind::Control {
                    return Err(MdlError::Usage("control labels need word types; the gaussian task has none".into()));
                }
            }
        }
        if !(self.prune_threshold.is_finite()) {
            return Err(MdlError::Usage("prune_threshold must be finite".into()));
        }
        if self.method.runs_variational() && self.variational.samples == 0 {
            return Err(MdlError::Usage("variational.samples must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(MdlError::Usage("jobs must be at least 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.archs.is_empty() || sweep.hidden.is_empty() {
                return Err(MdlError::Usage("sweep needs at least one arch and one hidden size".into()));
            }
        }
        self.online_train_config(1, 2).validate()?;
        self.variational_train_config(1, 2).validate()
    }

    fn mlp(&self, input_dim: usize, num_classes: usize) -> MlpConfig {
        MlpConfig::new(input_dim, self.probe.arch.hidden_sizes(self.probe.hidden), num_classes)
    }

    /// Standard-probe config for data of the given shape; the seed is set per run.
    pub fn online_train_config(&self, input_dim: usize, num_classes: usize) -> TrainConfig {
        let p = &self.probe;
        let mut config = TrainConfig::new(self.mlp(input_dim, num_classes), 0);
        config.lr = p.lr;
        config.batch_size = p.batch;
        config.max_epochs = p.epochs;
        config.anneal_factor = p.anneal_factor;
        config.patience = p.patience;
        config.annealing_enabled = p.annealing;
        config
    }

    pub fn variational_train_config(&self, input_dim: usize, num_classes: usize) -> TrainConfig {
        let v = &self.variational;
        let mut config = TrainConfig::variational(self.mlp(input_dim, num_classes), 0);
        config.lr = v.lr;
        config.batch_size = v.batch;
        config.max_epochs = v.epochs;
        config
    }
}
