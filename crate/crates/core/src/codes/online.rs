//! Online (prequential) codelength.
//!
//! Labels are sent in blocks along one fixed seeded ordering of the
//! training set. The first `t_1` labels go out uniformly; every later block
//! `(t_i, t_{i+1}]` is coded by a probe trained from scratch on the first
//! `t_i` examples. A final probe trained on all `n` examples gives the
//! cross-entropy used to split the code into data and model parts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::uniform_codelength;
use super::schedule::Schedule;
use crate::datasets::Dataset;
use crate::error::{MdlError, Result};
use crate::probe::{evaluate, evaluate_params, train_probe, EvalResult, TrainConfig};
use crate::rng::{derive_seed, stream, SplitMix64};

#[derive(Clone, Copy, Debug, Default)]
pub struct OnlineOptions<'a> {
    /// Early-stopping set for every sub-training; required when the train
    /// config anneals.
    pub dev: Option<&'a Dataset>,
    /// Held-out set scored after each step for learning curves.
    pub test: Option<&'a Dataset>,
    /// Worker threads for independent timesteps (0 or 1 runs serially).
    pub jobs: usize,
}

/// One learning-curve entry: the probe trained on `train_size` examples,
/// scored on the next block and optionally on the test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step_index: usize,
    pub train_size: usize,
    pub block_size: usize,
    pub block_bits: f64,
    pub block_bits_per_target: f64,
    pub block_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub test_bits_per_target: Option<f64>,
    /// First block plus every block up to and including this one.
    pub cumulative_bits: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineReport {
    pub seed: u64,
    pub n: usize,
    pub num_classes: usize,
    pub schedule: Schedule,
    pub first_block_bits: f64,
    pub per_block_bits: Vec<f64>,
    pub total_bits: f64,
    /// Cross-entropy of the probe trained on all `n` examples, over those
    /// same examples.
    pub final_ce_bits: f64,
    pub data_bits: f64,
    pub model_bits: f64,
    pub model_bits_negative: bool,
    pub final_train_accuracy: f64,
    pub final_test: Option<EvalResult>,
    pub learning_curve: Vec<CurvePoint>,
}

/// `(data_bits, model_bits)` of an online report.
pub fn decompose_online(report: &OnlineReport) -> (f64, f64) {
    (report.final_ce_bits, report.total_bits - report.final_ce_bits)
}

struct StepOutcome {
    block: Option<EvalResult>,
    test: Option<EvalResult>,
    final_train: Option<EvalResult>,
    epochs_run: usize,
}

fn tag_step(err: MdlError, step: usize) -> MdlError {
    match err {
        MdlError::Numerical { context, detail } => MdlError::Numerical {
            context: format!("online step {step}: {context}"),
            detail,
        },
        other => other,
    }
}

pub fn online_code(
    train: &Dataset,
    config: &TrainConfig,
    schedule: &Schedule,
    options: OnlineOptions<'_>,
) -> Result<OnlineReport> {
    config.validate()?;
    let n = train.len();
    if schedule.n() != n {
        return Err(MdlError::Consistency(format!(
            "schedule ends at {} but the training set has {n} examples",
            schedule.n()
        )));
    }
    let empty_dev = train.subset(&[]);
    let dev = match options.dev {
        Some(d) => d,
        None if config.annealing_enabled => {
            return Err(MdlError::Usage("online code with annealing needs a dev set for early stopping".into()))
        }
        None => &empty_dev,
    };

    let order = SplitMix64::derived(config.seed, stream::TRANSMISSION).permutation(n);
    let steps = &schedule.timesteps;
    let step_base = derive_seed(config.seed, stream::ONLINE_STEP);
    let final_step = steps.len();

    // Step i (1-based) trains on the first t_i examples; step S trains on all.
    let run_step = |step: usize| -> Result<StepOutcome> {
        let train_size = steps[step - 1];
        let prefix = train.subset(&order[..train_size]);
        let step_config = config.with_seed(derive_seed(step_base, step as u64));
        let probe = train_probe(&prefix, dev, &step_config).map_err(|e| tag_step(e, step))?;
        let test = options.test.map(|t| evaluate(&probe, t)).transpose()?;
        if step == final_step {
            return Ok(StepOutcome {
                block: None,
                test,
                final_train: Some(evaluate_params(&config.mlp, &probe.params, train)?),
                epochs_run: probe.epochs_run,
            });
        }
        let block = train.subset(&order[train_size..steps[step]]);
        Ok(StepOutcome {
            block: Some(evaluate(&probe, &block)?),
            test,
            final_train: None,
            epochs_run: probe.epochs_run,
        })
    };

    let outcomes: Vec<StepOutcome> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .map_err(|e| MdlError::Usage(format!("cannot start {} worker threads: {e}", options.jobs)))?;
        pool.install(|| (1..=final_step).into_par_iter().map(run_step).collect::<Result<Vec<_>>>())?
    } else {
        (1..=final_step).map(run_step).collect::<Result<Vec<_>>>()?
    };

    let first_block_bits = uniform_codelength(steps[0], train.num_classes);
    let mut total_bits = first_block_bits;
    let mut per_block_bits = Vec::with_capacity(schedule.num_blocks());
    let mut learning_curve = Vec::with_capacity(schedule.num_blocks());
    for (index, outcome) in outcomes[..final_step - 1].iter().enumerate() {
        let block = outcome.block.expect("every non-final step scores a block");
        total_bits += block.total_bits;
        per_block_bits.push(block.total_bits);
        learning_curve.push(CurvePoint {
            step_index: index + 1,
            train_size: steps[index],
            block_size: block.n,
            block_bits: block.total_bits,
            block_bits_per_target: block.bits_per_target,
            block_accuracy: block.accuracy,
            test_accuracy: outcome.test.map(|t| t.accuracy),
            test_bits_per_target: outcome.test.map(|t| t.bits_per_target),
            cumulative_bits: total_bits,
            epochs_run: outcome.epochs_run,
        });
    }
    let last = &outcomes[final_step - 1];
    let final_train = last.final_train.expect("the final step scores the full set");
    let final_ce_bits = final_train.total_bits;
    let model_bits = total_bits - final_ce_bits;
    Ok(OnlineReport {
        seed: config.seed,
        n,
        num_classes: train.num_classes,
        schedule: schedule.clone(),
        first_block_bits,
        per_block_bits,
        total_bits,
        final_ce_bits,
        data_bits: final_ce_bits,
        model_bits,
        model_bits_negative: model_bits < 0.0,
        final_train_accuracy: final_train.accuracy,
        final_test: last.test,
        learning_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{make_schedule, DEFAULT_FRACTIONS};
    use crate::datasets::{gen_gaussian_task, GaussianTaskSpec};
    use crate::numerics::{Matrix, MlpConfig};

    fn linear_task(n: usize, seed: u64) -> Dataset {
        let mut rng = SplitMix64::new(seed);
        let x = Matrix::filled_with(n, 4, |_, _| rng.normal());
        let y = (0..n).map(|i| u32::from(x[(i, 0)] + 0.5 * x[(i, 1)] > 0.0)).collect();
        Dataset::new("lin", x, y, 2, None).unwrap()
    }

    fn small_config(seed: u64) -> TrainConfig {
        let mut config = TrainConfig::new(MlpConfig::linear(4, 2), seed);
        config.lr = 0.02;
        config.max_epochs = 60;
        config
    }

    #[test]
    fn accounting_identity_and_first_block() {
        let train = linear_task(1000, 1);
        let dev = linear_task(200, 2);
        let schedule = make_schedule(1000, &DEFAULT_FRACTIONS).unwrap();
        let report = online_code(&train, &small_config(0), &schedule, OnlineOptions { dev: Some(&dev), ..Default::default() }).unwrap();
        assert_eq!(report.first_block_bits, 1.0);
        let sum = report.first_block_bits + report.per_block_bits.iter().sum::<f64>();
        assert!((report.total_bits - sum).abs() <= 1e-9 * report.total_bits);
        assert!(report.total_bits < 0.5 * uniform_codelength(1000, 2), "{}", report.total_bits);
        let (data, model) = decompose_online(&report);
        assert_eq!(data + model, report.total_bits);
        assert_eq!(report.learning_curve.len(), 10);
        assert_eq!(report.learning_curve.last().unwrap().cumulative_bits, report.total_bits);
    }

    #[test]
    fn single_block_is_uniform_code() {
        let train = linear_task(50, 3);
        let schedule = make_schedule(50, &[100.0]).unwrap();
        let report = online_code(&train, &small_config(0), &schedule, OnlineOptions { dev: Some(&train), ..Default::default() }).unwrap();
        assert_eq!(report.total_bits, uniform_codelength(50, 2));
        assert!(report.per_block_bits.is_empty());
        let (_, model) = decompose_online(&report);
        assert_eq!(model, 50.0 - report.final_ce_bits);
    }

    #[test]
    fn serial_and_parallel_agree_bitwise() {
        let (train, _) = gen_gaussian_task(&GaussianTaskSpec { dim: 4, separation: 1.0, n: 300 }, 1).unwrap();
        let (dev, _) = gen_gaussian_task(&GaussianTaskSpec { dim: 4, separation: 1.0, n: 100 }, 2).unwrap();
        let schedule = make_schedule(300, &DEFAULT_FRACTIONS).unwrap();
        let run = |jobs| {
            online_code(&train, &small_config(5), &schedule, OnlineOptions { dev: Some(&dev), test: Some(&dev), jobs }).unwrap()
        };
        let serial = run(1);
        let parallel = run(3);
        assert_eq!(serial.total_bits.to_bits(), parallel.total_bits.to_bits());
        assert_eq!(serial, parallel);
        assert!(serial.learning_curve.iter().all(|p| p.test_accuracy.is_some()));
    }

    #[test]
    fn annealing_without_dev_is_rejected() {
        let train = linear_task(20, 3);
        let schedule = make_schedule(20, &DEFAULT_FRACTIONS).unwrap();
        assert!(matches!(
            online_code(&train, &small_config(0), &schedule, OnlineOptions::default()),
            Err(MdlError::Usage(_))
        ));
    }

    #[test]
    fn schedule_length_must_match() {
        let train = linear_task(20, 3);
        let schedule = make_schedule(30, &DEFAULT_FRACTIONS).unwrap();
        assert!(online_code(&train, &small_config(0), &schedule, OnlineOptions { dev: Some(&train), ..Default::default() }).is_err());
    }

    #[test]
    fn divergence_is_tagged_with_step() {
        let mut train = linear_task(40, 3);
        let schedule = make_schedule(40, &DEFAULT_FRACTIONS).unwrap();
        let order = SplitMix64::derived(0, stream::TRANSMISSION).permutation(40);
        train.features[(order[0], 0)] = f64::INFINITY;
        let err = online_code(&train, &small_config(0), &schedule, OnlineOptions { dev: Some(&linear_task(10, 1)), ..Default::default() })
            .unwrap_err();
        assert!(err.to_string().contains("online step 1"), "{err}");
    }
}
