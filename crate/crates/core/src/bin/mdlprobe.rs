use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdl_probe::datasets::{make_control_labels, random_features, random_labels, read_dataset, write_dataset, Dataset};
use mdl_probe::experiment::{
    self, apply_override, config_base_dir, emit_curves, generate_synthetic, run_config, run_sweep, DatasetFiles,
    ExperimentConfig, LabelKind, SyntheticSpec, SyntheticTask,
};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::{evaluate, train_probe, EvalResult, TrainConfig};
use mdl_probe::rng::{derive_seed, stream};
use mdl_probe::{MdlError, Result};

#[derive(Parser)]
#[command(name = "mdlprobe", version, about = "Description-length probing of fixed representations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets, control labels or random features.
    Gen(GenArgs),
    /// Train and evaluate one standard probe per seed.
    Probe(ProbeArgs),
    /// Compute codelengths.
    Code {
        #[command(subcommand)]
        coder: CodeCommand,
    },
    /// Post-process reports.
    Report {
        #[command(subcommand)]
        what: ReportCommand,
    },
    /// Run a settings grid over seeds.
    Sweep(RunArgs),
}

#[derive(Subcommand)]
enum CodeCommand {
    Online(RunArgs),
    Variational(RunArgs),
    Baselines(RunArgs),
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Write one learning-curve CSV per method and seed.
    Curves {
        #[arg(long)]
        report: PathBuf,
        /// Defaults to `curves/` next to the report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Arch {
    Linear,
    Mlp1,
    Mlp2,
}

impl Arch {
    fn lib(self) -> experiment::Arch {
        match self {
            Arch::Linear => experiment::Arch::Linear,
            Arch::Mlp1 => experiment::Arch::Mlp1,
            Arch::Mlp2 => experiment::Arch::Mlp2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Typed,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum Labels {
    Task,
    Control,
    Random,
}

impl Labels {
    fn lib(self) -> LabelKind {
        match self {
            Labels::Task => LabelKind::Task,
            Labels::Control => LabelKind::Control,
            Labels::Random => LabelKind::Random,
        }
    }
}

/// Data and probe flags shared by the coders and the sweep.
#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Without it, `--train` and `--out` are required.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset stem: reads `<stem>.features.bin` and `<stem>.labels.bin`.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum)]
    arch: Option<Arch>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated percents, ascending, ending at 100.
    #[arg(long)]
    fractions: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    prune_threshold: Option<f64>,
    /// Monte-Carlo draws of the variational data cost.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config field, e.g. `--set probe.patience=6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    /// Take the synthetic spec from this config's `[data.synthetic]`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relabel or re-featurize an existing dataset stem instead of generating.
    #[arg(long)]
    from: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "typed")]
    task: Task,
    #[arg(long, default_value_t = 20_000)]
    n_train: usize,
    #[arg(long, default_value_t = 2_000)]
    n_dev: usize,
    #[arg(long, default_value_t = 2_000)]
    n_test: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 3_000)]
    vocab: usize,
    #[arg(long, default_value_t = 0.5)]
    context_noise: f64,
    #[arg(long, default_value_t = 0.05)]
    label_noise: f64,
    #[arg(long)]
    informative_dims: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, value_enum)]
    labels: Option<Labels>,
    #[arg(long)]
    random_features: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV instead of binary files.
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mlp2")]
    arch: Arch,
    #[arg(long, default_value_t = 1000)]
    hidden: usize,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long)]
    out: PathBuf,
}

fn usage(msg: impl Into<String>) -> MdlError {
    MdlError::Usage(msg.into())
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| usage(format!("cannot resolve {}: {e}", path.display())))
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| usage(format!("bad {what} entry {s:?} in {text:?}"))))
        .collect()
}

fn toml_path(path: &Path) -> Result<String> {
    Ok(toml::Value::String(absolute(path)?.display().to_string()).to_string())
}

/// Config plus its base directory, built from a file or from flags, with
/// every flag applied as an override.
fn build_config(args: &RunArgs, method: Option<&str>) -> Result<(ExperimentConfig, PathBuf)> {
    let (mut table, base) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            let table: toml::Table = text.parse().map_err(|e| usage(format!("config does not parse: {e}")))?;
            (table, config_base_dir(path))
        }
        None => {
            if args.train.is_none() || args.out.is_none() {
                return Err(usage("without --config, --train and --out are required"));
            }
            let mut table = toml::Table::new();
            table.insert("method".into(), toml::Value::String(method.unwrap_or("both").into()));
            table.insert("seeds".into(), toml::Value::Array(vec![toml::Value::Integer(0)]));
            (table, PathBuf::from("."))
        }
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    if let Some(m) = method {
        overrides.push(("method".into(), format!("{m:?}")));
    }
    for (key, path) in [("train", &args.train), ("dev", &args.dev), ("test", &args.test)] {
        if let Some(p) = path {
            overrides.push((format!("data.{key}"), toml_path(p)?));
        }
    }
    if let Some(out) = &args.out {
        overrides.push(("out_dir".into(), toml_path(out)?));
    }
    let section = if method == Some("variational") { "variational" } else { "probe" };
    if let Some(a) = args.arch {
        overrides.push(("probe.arch".into(), format!("{:?}", a.lib().as_str())));
    }
    if let Some(h) = args.hidden {
        overrides.push(("probe.hidden".into(), h.to_string()));
    }
    if let Some(lr) = args.lr {
        overrides.push((format!("{section}.lr"), format!("{lr:?}")));
    }
    if let Some(b) = args.batch {
        overrides.push((format!("{section}.batch"), b.to_string()));
    }
    if let Some(e) = args.epochs {
        overrides.push((format!("{section}.epochs"), e.to_string()));
    }
    if let Some(f) = &args.fractions {
        let list: Vec<f64> = parse_list(f, "fraction")?;
        overrides.push(("fractions".into(), format!("{list:?}")));
    }
    if let Some(s) = &args.seeds {
        let list: Vec<u64> = parse_list(s, "seed")?;
        overrides.push(("seeds".into(), format!("{list:?}")));
    }
    if let Some(t) = args.prune_threshold {
        overrides.push(("prune_threshold".into(), format!("{t:?}")));
    }
    if let Some(s) = args.samples {
        overrides.push(("variational.samples".into(), s.to_string()));
    }
    if let Some(j) = args.jobs {
        overrides.push(("jobs".into(), j.to_string()));
    }
    for item in &args.set {
        let (key, value) = item.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {item:?}")))?;
        overrides.push((key.trim().into(), value.trim().into()));
    }
    for (key, value) in &overrides {
        apply_override(&mut table, key, value)?;
    }
    Ok((ExperimentConfig::from_table(table)?, base))
}

fn stem_dataset(stem: &Path) -> Result<Dataset> {
    let (features, labels) = DatasetFiles::Stem(stem.to_path_buf()).resolve(Path::new("."));
    read_dataset(features, labels)
}

fn write_stem(data: &Dataset, dir: &Path, stem: &str, csv: bool) -> Result<()> {
    let ext = if csv { "csv" } else { "bin" };
    write_dataset(
        data,
        dir.join(format!("{stem}.features.{ext}")),
        dir.join(format!("{stem}.labels.{ext}")),
    )
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| MdlError::Consistency(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| MdlError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MdlError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn gen(args: GenArgs) -> Result<Vec<PathBuf>> {
    create_dir(&args.out)?;
    let seed = args.seed.unwrap_or(0);
    if let Some(stem) = &args.from {
        let mut data = stem_dataset(stem)?;
        let label_seed = derive_seed(seed, stream::LABELS);
        match args.labels {
            Some(Labels::Control) => data.labels = make_control_labels(&data, label_seed)?,
            Some(Labels::Random) => data.labels = random_labels(data.len(), data.num_classes, label_seed),
            Some(Labels::Task) | None => {}
        }
        if let Some(h) = args.random_features {
            data = random_features(&data, h, derive_seed(seed, stream::RANDOM_MAP))?;
        }
        write_stem(&data, &args.out, "data", args.csv)?;
        return Ok(vec![args.out.join("data")]);
    }

    let spec = match &args.config {
        Some(path) => {
            let config = ExperimentConfig::load(path, &[])?;
            let mut spec = config
                .data
                .synthetic
                .ok_or_else(|| usage(format!("{} has no [data.synthetic] section", path.display())))?;
            if let Some(s) = args.seed {
                spec.seed = s;
            }
            if let Some(labels) = args.labels {
                spec.labels = labels.lib();
            }
            if let Some(h) = args.random_features {
                spec.random_features = Some(h);
            }
            spec
        }
        None => SyntheticSpec {
            task: match args.task {
                Task::Typed => SyntheticTask::Typed {
                    dim: args.dim,
                    num_classes: args.classes,
                    vocab: args.vocab,
                    context_noise: args.context_noise,
                    label_noise: args.label_noise,
                    informative_dims: args.informative_dims,
                },
                Task::Gaussian => SyntheticTask::Gaussian {
                    dim: args.dim,
                    separation: args.separation,
                },
            },
            n_train: args.n_train,
            n_dev: args.n_dev,
            n_test: args.n_test,
            labels: args.labels.map_or(LabelKind::Task, Labels::lib),
            random_features: args.random_features,
            seed,
        },
    };
    let prepared = generate_synthetic(&spec)?;
    let mut written = Vec::new();
    for (stem, part) in [("train", Some(&prepared.train)), ("dev", prepared.dev.as_ref()), ("test", prepared.test.as_ref())] {
        if let Some(part) = part {
            write_stem(part, &args.out, stem, args.csv)?;
            written.push(args.out.join(stem));
        }
    }
    write_json(&args.out.join("dataset.json"), &prepared.summary())?;
    Ok(written)
}

#[derive(Serialize)]
struct ProbeRecord {
    seed: u64,
    architecture: String,
    epochs_run: usize,
    best_epoch: usize,
    train: EvalResult,
    dev: Option<EvalResult>,
    test: Option<EvalResult>,
}

fn probe(args: ProbeArgs) -> Result<Vec<PathBuf>> {
    let train = stem_dataset(&args.train)?;
    let dev = args.dev.as_deref().map(stem_dataset).transpose()?;
    let test = args.test.as_deref().map(stem_dataset).transpose()?;
    let mlp = MlpConfig::new(train.dim(), args.arch.lib().hidden_sizes(args.hidden), train.num_classes);
    let mut config = TrainConfig::new(mlp, 0);
    config.annealing_enabled = dev.is_some();
    if let Some(lr) = args.lr {
        config.lr = lr;
    }
    if let Some(b) = args.batch {
        config.batch_size = b;
    }
    if let Some(e) = args.epochs {
        config.max_epochs = e;
    }
    let empty_dev = train.subset(&[]);
    let mut records = Vec::new();
    for seed in parse_list::<u64>(&args.seeds, "seed")? {
        let train_config = config.with_seed(seed);
        let trained = train_probe(&train, dev.as_ref().unwrap_or(&empty_dev), &train_config)?;
        records.push(ProbeRecord {
            seed,
            architecture: train_config.mlp.describe(),
            epochs_run: trained.epochs_run,
            best_epoch: trained.best_epoch,
            train: evaluate(&trained, &train)?,
            dev: dev.as_ref().map(|d| evaluate(&trained, d)).transpose()?,
            test: test.as_ref().map(|t| evaluate(&trained, t)).transpose()?,
        });
    }
    create_dir(&args.out)?;
    let path = args.out.join("probe.json");
    write_json(&path, &records)?;
    Ok(vec![path])
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Gen(args) => gen(args),
        Command::Probe(args) => probe(args),
        Command::Code { coder } => {
            let (args, method) = match coder {
                CodeCommand::Online(a) => (a, "online"),
                CodeCommand::Variational(a) => (a, "variational"),
                CodeCommand::Baselines(a) => (a, "baselines"),
            };
            let (config, base) = build_config(&args, Some(method))?;
            Ok(vec![run_config(&config, &base)?])
        }
        Command::Report {
            what: ReportCommand::Curves { report, out },
        } => {
            let out = out.unwrap_or_else(|| config_base_dir(&report).join("curves"));
            emit_curves(&report, &out)
        }
        Command::Sweep(args) => {
            if args.config.is_none() {
                return Err(usage("sweep needs --config with a [sweep] section"));
            }
            let (config, base) = build_config(&args, None)?;
            Ok(vec![run_sweep(&config, &base)?])
        }
    }
}

fn report_error(class: &str, code: u8, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": { "class": class, "exit_code": code, "message": message } });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error("usage", 2, e.to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let class = err.class();
            report_error(class.as_str(), class.exit_code() as u8, err.to_string())
        }
    }
}
