//! Trains a standard MLP probe with early stopping and reports accuracy.

use mdl_probe::datasets::{gen_typed_task, shuffle_split, TypedTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::{evaluate, train_probe, TrainConfig};

fn main() -> mdl_probe::Result<()> {
    let spec = TypedTaskSpec {
        n: 3000,
        dim: 16,
        num_classes: 5,
        vocab: 300,
        context_noise: 0.5,
        label_noise: 0.05,
        informative_dims: None,
    };
    let data = gen_typed_task(&spec, 1)?;
    let (train, dev, test) = shuffle_split(&data, (0.8, 0.1, 0.1), 0)?;
    let mut config = TrainConfig::new(MlpConfig::new(16, vec![64], 5), 0);
    config.max_epochs = 50;
    let probe = train_probe(&train, &dev, &config)?;
    let result = evaluate(&probe, &test)?;
    println!(
        "MLP-1 h64: {} epochs (best {}), test accuracy {:.3}, test cross-entropy {:.3} bits/example",
        probe.epochs_run, probe.best_epoch, result.accuracy, result.bits_per_target
    );
    Ok(())
}
