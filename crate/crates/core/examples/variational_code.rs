//! Variational codelength with group sparsity; prints which units survive.

use mdl_probe::datasets::{gen_typed_task, TypedTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::TrainConfig;
use mdl_probe::varcode::{train_variational, variational_codelength};

fn main() -> mdl_probe::Result<()> {
    let spec = TypedTaskSpec {
        n: 2000,
        dim: 16,
        num_classes: 5,
        vocab: 300,
        context_noise: 0.25,
        label_noise: 0.0,
        informative_dims: Some(4),
    };
    let data = gen_typed_task(&spec, 1)?;
    let mut config = TrainConfig::variational(MlpConfig::new(16, vec![32, 32], 5), 0);
    config.lr = 0.01;
    config.max_epochs = 60;
    let probe = train_variational(&data, &config)?;
    let report = variational_codelength(&probe, &data, 4)?;
    println!(
        "variational {:.0} bits = data {:.0} + KL {:.0}; compression {:.2}",
        report.total_bits, report.data_bits, report.kl_bits, report.compression
    );
    println!("pruned architecture {} (from 16-32-32), accuracy {:.3}", report.pruned_architecture, report.accuracy);
    Ok(())
}
