//! Online (prequential) codelength of a small task, with its learning curve.

use mdl_probe::codes::{make_schedule, online_code, uniform_codelength, OnlineOptions, DEFAULT_FRACTIONS};
use mdl_probe::datasets::{gen_typed_task, shuffle_split, TypedTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::TrainConfig;

fn main() -> mdl_probe::Result<()> {
    let spec = TypedTaskSpec {
        n: 2400,
        dim: 16,
        num_classes: 5,
        vocab: 300,
        context_noise: 0.5,
        label_noise: 0.05,
        informative_dims: None,
    };
    let data = gen_typed_task(&spec, 1)?;
    let (train, dev, test) = shuffle_split(&data, (2000.0 / 2400.0, 200.0 / 2400.0, 200.0 / 2400.0), 0)?;
    let mut config = TrainConfig::new(MlpConfig::new(16, vec![32], 5), 0);
    config.max_epochs = 40;
    let schedule = make_schedule(train.len(), &DEFAULT_FRACTIONS)?;
    let options = OnlineOptions {
        dev: Some(&dev),
        test: Some(&test),
        jobs: 1,
    };
    let report = online_code(&train, &config, &schedule, options)?;

    println!("{:>5} {:>6} {:>10} {:>9}", "step", "t_i", "bits/tgt", "test acc");
    for p in &report.learning_curve {
        println!("{:>5} {:>6} {:>10.3} {:>9.3}", p.step_index, p.train_size, p.block_bits_per_target, p.test_accuracy.unwrap_or(f64::NAN));
    }
    let uniform = uniform_codelength(train.len(), train.num_classes);
    println!(
        "online {:.0} bits vs uniform {uniform:.0} (compression {:.2}); data {:.0} + model {:.0}",
        report.total_bits,
        uniform / report.total_bits,
        report.data_bits,
        report.model_bits
    );
    Ok(())
}
