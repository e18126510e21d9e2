use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, LabelKind, SyntheticSpec};
use super::report::{kbits, pruned_arch_text, Aggregate, Baselines, CodelengthReport, DatasetSummary, SeedResult, TOOLKIT_VERSION};
use crate::codes::{compression_ratio, make_schedule, online_code, prior_codelength, uniform_codelength, OnlineOptions};
use crate::datasets::{
    gen_gaussian_task, gen_typed_task, make_control_labels, random_features, random_labels, read_dataset, write_atomic,
    Dataset,
};
use crate::error::{MdlError, Result};
use crate::rng::{derive_seed, stream};
use crate::varcode::{pruned_accuracy, train_variational, variational_codelength};

/// Train/dev/test sets of one experiment plus what is known about them.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub train: Dataset,
    pub dev: Option<Dataset>,
    pub test: Option<Dataset>,
    pub true_mi_bits: Option<f64>,
}

impl PreparedData {
    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            name: self.train.name.clone(),
            dim: self.train.dim(),
            num_classes: self.train.num_classes,
            n_train: self.train.len(),
            n_dev: self.dev.as_ref().map_or(0, Dataset::len),
            n_test: self.test.as_ref().map_or(0, Dataset::len),
            true_mi_bits: self.true_mi_bits,
        }
    }
}

/// Generates a synthetic task, relabels it and splits it into consecutive
/// train/dev/test blocks (examples are drawn i.i.d., so order carries no
/// information).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<PreparedData> {
    let n = spec.n_train + spec.n_dev + spec.n_test;
    let (mut data, mut true_mi) = if let Some(typed) = spec.task.typed_spec(n) {
        (gen_typed_task(&typed, spec.seed)?, None)
    } else {
        let gauss = spec.task.gaussian_spec(n).expect("task is typed or gaussian");
        let (data, mi) = gen_gaussian_task(&gauss, spec.seed)?;
        (data, Some(mi))
    };
    let label_seed = derive_seed(spec.seed, stream::LABELS);
    match spec.labels {
        LabelKind::Task => {}
        LabelKind::Control => {
            let labels = make_control_labels(&data, label_seed)?;
            data = data.with_labels(format!("{}-control", data.name), labels)?;
            true_mi = None;
        }
        LabelKind::Random => {
            let labels = random_labels(n, data.num_classes, label_seed);
            data = data.with_labels(format!("{}-random", data.name), labels)?;
            true_mi = Some(0.0);
        }
    }
    if let Some(hidden) = spec.random_features {
        data = random_features(&data, hidden, derive_seed(spec.seed, stream::RANDOM_MAP))?;
        // A random map can only lose information.
        true_mi = true_mi.filter(|&mi| mi == 0.0);
    }
    let cut = |from: usize, len: usize, role: &str| {
        let mut part = data.subset(&(from..from + len).collect::<Vec<_>>());
        part.name = format!("{}/{role}", data.name);
        part
    };
    let train = cut(0, spec.n_train, "train");
    let dev = (spec.n_dev > 0).then(|| cut(spec.n_train, spec.n_dev, "dev"));
    let test = (spec.n_test > 0).then(|| cut(spec.n_train + spec.n_dev, spec.n_test, "test"));
    Ok(PreparedData {
        train,
        dev,
        test,
        true_mi_bits: true_mi,
    })
}

/// Loads or generates the data of `config`; relative paths are taken from
/// `base_dir`.
pub fn prepare_data(config: &ExperimentConfig, base_dir: &Path) -> Result<PreparedData> {
    if let Some(spec) = &config.data.synthetic {
        return generate_synthetic(spec);
    }
    let load = |files: &super::config::DatasetFiles| {
        let (features, labels) = files.resolve(base_dir);
        read_dataset(features, labels)
    };
    let train = load(config.data.train.as_ref().ok_or_else(|| MdlError::Usage("no training data configured".into()))?)?;
    let dev = config.data.dev.as_ref().map(load).transpose()?;
    let test = config.data.test.as_ref().map(load).transpose()?;
    for (role, part) in [("dev", &dev), ("test", &test)] {
        if let Some(part) = part {
            if part.num_classes != train.num_classes || part.dim() != train.dim() {
                return Err(MdlError::Consistency(format!(
                    "{role} set is {}-dimensional with K={}, train is {}-dimensional with K={}",
                    part.dim(),
                    part.num_classes,
                    train.dim(),
                    train.num_classes
                )));
            }
        }
    }
    Ok(PreparedData {
        train,
        dev,
        test,
        true_mi_bits: None,
    })
}

fn baselines(train: &Dataset) -> Baselines {
    let uniform = uniform_codelength(train.len(), train.num_classes);
    let prior = if train.is_empty() { 0.0 } else { prior_codelength(&train.labels) };
    Baselines {
        uniform_bits: uniform,
        uniform_kbits: kbits(uniform),
        prior_bits: prior,
        prior_kbits: kbits(prior),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Coder {
    Online,
    Variational,
}

fn run_online(config: &ExperimentConfig, data: &PreparedData, seed: u64, jobs: usize) -> Result<SeedResult> {
    let train = &data.train;
    let train_config = config.online_train_config(train.dim(), train.num_classes).with_seed(seed);
    let schedule = make_schedule(train.len(), &config.fractions)?;
    let options = OnlineOptions {
        dev: data.dev.as_ref(),
        test: data.test.as_ref(),
        jobs,
    };
    let report = online_code(train, &train_config, &schedule, options)?;
    let (accuracy, split) = match report.final_test {
        Some(t) => (t.accuracy, "test"),
        None => (report.final_train_accuracy, "train"),
    };
    let base = baselines(train);
    Ok(SeedResult {
        method: "online".into(),
        seed,
        total_bits: report.total_bits,
        kbits: kbits(report.total_bits),
        compression_uniform: compression_ratio(base.uniform_bits, report.total_bits)?,
        compression_prior: compression_ratio(base.prior_bits, report.total_bits)?,
        accuracy,
        accuracy_split: split.into(),
        data_bits: report.data_bits,
        model_bits: report.model_bits,
        model_bits_negative: report.model_bits_negative,
        epochs_run: report.learning_curve.iter().map(|p| p.epochs_run).max().unwrap_or(0),
        learning_curve: Some(report.learning_curve),
        schedule: Some(report.schedule),
        pruned_architecture: None,
    })
}

fn run_variational(config: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<SeedResult> {
    let train = &data.train;
    let train_config = config.variational_train_config(train.dim(), train.num_classes).with_seed(seed);
    let mut probe = train_variational(train, &train_config)?;
    probe.prune_threshold = config.prune_threshold;
    let report = variational_codelength(&probe, train, config.variational.samples)?;
    let (accuracy, split) = match &data.test {
        Some(test) => (pruned_accuracy(&probe, test)?, "test"),
        None => (report.accuracy, "train"),
    };
    let base = baselines(train);
    Ok(SeedResult {
        method: "variational".into(),
        seed,
        total_bits: report.total_bits,
        kbits: kbits(report.total_bits),
        compression_uniform: compression_ratio(base.uniform_bits, report.total_bits)?,
        compression_prior: compression_ratio(base.prior_bits, report.total_bits)?,
        accuracy,
        accuracy_split: split.into(),
        data_bits: report.data_bits,
        model_bits: report.kl_bits,
        model_bits_negative: false,
        epochs_run: probe.epochs_run,
        learning_curve: None,
        schedule: None,
        pruned_architecture: Some(report.pruned_architecture),
    })
}

/// Runs every requested coder for every seed on prepared data.
///
/// With more (seed, coder) runs than `jobs` the runs themselves go in
/// parallel; otherwise they go one by one and the online timesteps share the
/// workers. Either way the records come back in (coder, seed) order and do
/// not depend on `jobs`.
pub fn run_on_data(config: &ExperimentConfig, data: &PreparedData, timestamp: String) -> Result<CodelengthReport> {
    config.validate()?;
    if data.train.len() < 2 && config.method != super::config::Method::Baselines {
        return Err(MdlError::Size(format!("coding needs at least 2 training examples, got {}", data.train.len())));
    }
    let mut runs = Vec::new();
    if config.method.runs_online() {
        runs.extend(config.seeds.iter().map(|&s| (Coder::Online, s)));
    }
    if config.method.runs_variational() {
        runs.extend(config.seeds.iter().map(|&s| (Coder::Variational, s)));
    }
    let jobs = config.jobs.max(1);
    let parallel_runs = jobs > 1 && runs.len() >= jobs;
    let one = |&(coder, seed): &(Coder, u64)| match coder {
        Coder::Online => run_online(config, data, seed, if parallel_runs { 1 } else { jobs }),
        Coder::Variational => run_variational(config, data, seed),
    };
    let results: Vec<SeedResult> = if parallel_runs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| MdlError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
        pool.install(|| runs.par_iter().map(one).collect::<Result<Vec<_>>>())?
    } else {
        runs.iter().map(one).collect::<Result<Vec<_>>>()?
    };

    let mut aggregate = Vec::new();
    for method in ["online", "variational"] {
        let of_method: Vec<SeedResult> = results.iter().filter(|r| r.method == method).cloned().collect();
        if !of_method.is_empty() {
            aggregate.push(Aggregate::over(method, &of_method));
        }
    }
    Ok(CodelengthReport {
        toolkit_version: TOOLKIT_VERSION.into(),
        timestamp,
        config: config.clone(),
        dataset: data.summary(),
        baselines: baselines(&data.train),
        results,
        aggregate,
    })
}

pub fn now_timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Writes `report.json` and, for variational runs, `pruned_arch.txt` into
/// `dir`.
pub fn write_outputs(report: &CodelengthReport, dir: &Path) -> Result<PathBuf> {
    let path = report.write(dir)?;
    if let Some(text) = pruned_arch_text(report) {
        write_atomic(&dir.join("pruned_arch.txt"), text.as_bytes())?;
    }
    Ok(path)
}

/// Runs a parsed config whose relative paths are anchored at `base_dir`.
pub fn run_config(config: &ExperimentConfig, base_dir: &Path) -> Result<PathBuf> {
    let data = prepare_data(config, base_dir)?;
    let report = run_on_data(config, &data, now_timestamp())?;
    write_outputs(&report, &base_dir.join(&config.out_dir))
}

/// Loads a config file, runs it and returns the path of `report.json`.
pub fn run_experiment(config_path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<PathBuf> {
    let config_path = config_path.as_ref();
    let config = ExperimentConfig::load(config_path, overrides)?;
    run_config(&config, &config_base_dir(config_path))
}

pub fn config_base_dir(config_path: &Path) -> PathBuf {
    match config_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
