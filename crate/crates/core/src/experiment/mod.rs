//! Declarative experiments: TOML configs, orchestration of the coders over
//! seeds and settings, and JSON/CSV report files.

mod config;
mod report;
mod runner;
mod sweep;

pub use config::{
    apply_override, Arch, DataConfig, DatasetFiles, ExperimentConfig, LabelKind, Method, ProbeSettings, SweepSettings,
    SyntheticSpec, SyntheticTask, VariationalSettings, CONFIG_SCHEMA,
};
pub use report::{
    curve_csv, emit_curves, kbits, pruned_arch_text, Aggregate, Baselines, CodelengthReport, DatasetSummary, SeedResult,
    Stat, REPORT_SCHEMA, TOOLKIT_VERSION,
};
pub use runner::{
    config_base_dir, generate_synthetic, now_timestamp, prepare_data, run_config, run_experiment, run_on_data,
    write_outputs, PreparedData,
};
pub use sweep::{run_sweep, setting_name, SweepEntry, SweepSummary, SWEEP_SCHEMA};
