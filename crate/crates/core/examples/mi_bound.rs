//! On a two-Gaussian task the mutual information is known, and
//! `log2 K - codelength / n` stays below it.

use mdl_probe::codes::{make_schedule, online_code, OnlineOptions, DEFAULT_FRACTIONS};
use mdl_probe::datasets::{gen_gaussian_task, shuffle_split, GaussianTaskSpec};
use mdl_probe::numerics::MlpConfig;
use mdl_probe::probe::TrainConfig;

fn main() -> mdl_probe::Result<()> {
    for separation in [0.5, 1.0, 2.0] {
        let (data, mi) = gen_gaussian_task(&GaussianTaskSpec { dim: 8, separation, n: 2500 }, 19)?;
        let (train, dev, _) = shuffle_split(&data, (0.8, 0.2, 0.0), 0)?;
        let mut config = TrainConfig::new(MlpConfig::linear(8, 2), 0);
        config.max_epochs = 50;
        let schedule = make_schedule(train.len(), &DEFAULT_FRACTIONS)?;
        let options = OnlineOptions {
            dev: Some(&dev),
            test: None,
            jobs: 1,
        };
        let report = online_code(&train, &config, &schedule, options)?;
        let gain = 1.0 - report.total_bits / train.len() as f64;
        println!("separation {separation}: I(x;y) = {mi:.3} bits, online gain {gain:.3} bits/example");
    }
    Ok(())
}
