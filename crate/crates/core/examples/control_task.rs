//! Same representations, task labels against control labels: the control
//! task needs a much longer code.

use mdl_probe::codes::{make_schedule, online_code, OnlineOptions, DEFAULT_FRACTIONS};
use mdl_probe::datasets::{gen_typed_task, make_control_labels, shuffle_split, TypedTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::TrainConfig;

fn main() -> mdl_probe::Result<()> {
    let spec = TypedTaskSpec {
        n: 3000,
        dim: 32,
        num_classes: 10,
        vocab: 500,
        context_noise: 0.5,
        label_noise: 0.05,
        informative_dims: None,
    };
    let task = gen_typed_task(&spec, 11)?;
    let control = task.with_labels("control", make_control_labels(&task, 12)?)?;
    let mut config = TrainConfig::new(MlpConfig::new(32, vec![50], 10), 0);
    config.max_epochs = 60;
    for data in [&task, &control] {
        let (train, dev, _) = shuffle_split(data, (0.9, 0.1, 0.0), 0)?;
        let schedule = make_schedule(train.len(), &DEFAULT_FRACTIONS)?;
        let options = OnlineOptions {
            dev: Some(&dev),
            test: None,
            jobs: 1,
        };
        let report = online_code(&train, &config, &schedule, options)?;
        println!("{:<8} {:>7.0} bits, train accuracy {:.3}", data.name, report.total_bits, report.final_train_accuracy);
    }
    Ok(())
}
