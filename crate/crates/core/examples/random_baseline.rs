//! With random labels no probe can beat the uniform code by much.

use mdl_probe::codes::{make_schedule, online_code, prior_codelength, uniform_codelength, OnlineOptions, DEFAULT_FRACTIONS};
use mdl_probe::datasets::{gen_typed_task, random_labels, shuffle_split, TypedTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::TrainConfig;

fn main() -> mdl_probe::Result<()> {
    let spec = TypedTaskSpec {
        n: 2200,
        dim: 16,
        num_classes: 10,
        vocab: 300,
        context_noise: 0.5,
        label_noise: 0.0,
        informative_dims: None,
    };
    let task = gen_typed_task(&spec, 17)?;
    let data = task.with_labels("random", random_labels(task.len(), 10, 18))?;
    let (train, dev, _) = shuffle_split(&data, (2000.0 / 2200.0, 200.0 / 2200.0, 0.0), 0)?;
    let mut config = TrainConfig::new(MlpConfig::new(16, vec![32], 10), 0);
    config.max_epochs = 40;
    let schedule = make_schedule(train.len(), &DEFAULT_FRACTIONS)?;
    let options = OnlineOptions {
        dev: Some(&dev),
        test: None,
        jobs: 1,
    };
    let report = online_code(&train, &config, &schedule, options)?;
    let uniform = uniform_codelength(train.len(), 10);
    println!(
        "uniform {uniform:.0} bits, label prior {:.0} bits, online {:.0} bits ({:+.1}% vs uniform)",
        prior_codelength(&train.labels),
        report.total_bits,
        100.0 * (report.total_bits / uniform - 1.0)
    );
    Ok(())
}
