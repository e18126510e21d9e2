//! Standard probe training with dev-based learning-rate annealing and early
//! stopping, and evaluation in accuracy and bits.

use serde::{Deserialize, Serialize};

use crate::datasets::Dataset;
use crate::error::{MdlError, Result};
use crate::numerics::{
    count_correct, mlp_backward, mlp_forward, mlp_logits, nll_bits, softmax_nll, AdamState, Matrix, MlpConfig,
    MlpParams, ParamTensors,
};
use crate::rng::{stream, SplitMix64};

/// Rows per forward pass when scoring a whole dataset.
const EVAL_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mlp: MlpConfig,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub anneal_factor: f64,
    pub patience: usize,
    pub seed: u64,
    pub annealing_enabled: bool,
    pub lr_floor: f64,
}

impl TrainConfig {
    pub fn new(mlp: MlpConfig, seed: u64) -> Self {
        Self {
            mlp,
            lr: 0.001,
            batch_size: 64,
            max_epochs: 1000,
            anneal_factor: 0.5,
            patience: 4,
            seed,
            annealing_enabled: true,
            lr_floor: 1e-6,
        }
    }

    /// The variational regime: flat learning rate, fixed epoch budget.
    pub fn variational(mlp: MlpConfig, seed: u64) -> Self {
        Self {
            max_epochs: 200,
            annealing_enabled: false,
            ..Self::new(mlp, seed)
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        if !(self.anneal_factor > 0.0 && self.anneal_factor < 1.0) {
            return Err(MdlError::Usage(format!("anneal_factor must lie in (0, 1), got {}", self.anneal_factor)));
        }
        if self.patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(MdlError::Usage("patience, batch_size and max_epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) || !(self.lr_floor > 0.0) {
            return Err(MdlError::Usage(format!("learning rates must be positive, got {} / {}", self.lr, self.lr_floor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedProbe {
    pub config: TrainConfig,
    /// Best-on-dev snapshot (final epoch when there is no dev set).
    pub params: MlpParams,
    pub epochs_run: usize,
    /// Dev bits per target after each epoch.
    pub dev_history: Vec<f64>,
    /// Learning rate used during each epoch.
    pub lr_history: Vec<f64>,
    pub best_epoch: usize,
}

impl TrainedProbe {
    pub fn best_dev_loss(&self) -> Option<f64> {
        self.dev_history.get(self.best_epoch.checked_sub(1)?).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub total_bits: f64,
    pub bits_per_target: f64,
    pub n: usize,
}

pub(crate) fn check_compatible(config: &MlpConfig, data: &Dataset, role: &str) -> Result<()> {
    if data.dim() != config.input_dim && !data.is_empty() {
        return Err(MdlError::dimension(
            0,
            format!("{} input columns", config.input_dim),
            format!("{} in {role} set", data.dim()),
        ));
    }
    if data.num_classes != config.num_classes {
        return Err(MdlError::Consistency(format!(
            "{role} set has K={} but the probe predicts {} classes",
            data.num_classes, config.num_classes
        )));
    }
    Ok(())
}

/// Codelength and accuracy of fixed parameters on `data`.
pub fn evaluate_params(config: &MlpConfig, params: &MlpParams, data: &Dataset) -> Result<EvalResult> {
    check_compatible(config, data, "evaluation")?;
    let n = data.len();
    let mut total_bits = 0.0;
    let mut correct = 0;
    let indices: Vec<usize> = (0..n).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = data.features.select_rows(chunk);
        let labels: Vec<u32> = chunk.iter().map(|&i| data.labels[i]).collect();
        let logits = mlp_logits(config, params, &x)?;
        total_bits += nll_bits(&logits, &labels)?;
        correct += count_correct(&logits, &labels);
    }
    let (accuracy, bits_per_target) = if n == 0 {
        (0.0, 0.0)
    } else {
        (correct as f64 / n as f64, total_bits / n as f64)
    };
    Ok(EvalResult {
        accuracy,
        total_bits,
        bits_per_target,
        n,
    })
}

pub fn evaluate(probe: &TrainedProbe, data: &Dataset) -> Result<EvalResult> {
    evaluate_params(&probe.config.mlp, &probe.params, data)
}

fn with_epoch(err: MdlError, epoch: usize) -> MdlError {
    match err {
        MdlError::Numerical { context, detail } => MdlError::Numerical {
            context: format!("{context} (epoch {epoch})"),
            detail,
        },
        other => other,
    }
}

/// One pass over `train` in `order`, minibatch mean cross-entropy in nats.
fn run_epoch(
    config: &MlpConfig,
    params: &mut MlpParams,
    adam: &mut AdamState,
    train: &Dataset,
    order: &[usize],
    batch_size: usize,
) -> Result<()> {
    for batch in order.chunks(batch_size) {
        let x: Matrix = train.features.select_rows(batch);
        let labels: Vec<u32> = batch.iter().map(|&i| train.labels[i]).collect();
        let (logits, cache) = mlp_forward(config, params, &x)?;
        let (_, mut grad) = softmax_nll(&logits, &labels)?;
        let scale = 1.0 / batch.len() as f64;
        grad.as_mut_slice().iter_mut().for_each(|g| *g *= scale);
        let grads = mlp_backward(config, params, &cache, &grad)?;
        adam.step(params, &grads.tensors())?;
    }
    Ok(())
}

pub fn train_probe(train: &Dataset, dev: &Dataset, config: &TrainConfig) -> Result<TrainedProbe> {
    config.validate()?;
    if train.is_empty() {
        return Err(MdlError::Size("cannot train a probe on an empty training set".into()));
    }
    check_compatible(&config.mlp, train, "train")?;
    check_compatible(&config.mlp, dev, "dev")?;
    if dev.is_empty() && config.annealing_enabled {
        return Err(MdlError::Usage("learning-rate annealing needs a non-empty dev set".into()));
    }

    let mlp = &config.mlp;
    let mut params = MlpParams::glorot(mlp, &mut SplitMix64::derived(config.seed, stream::INIT));
    let mut adam = AdamState::new(&params, config.lr);
    let mut shuffle_rng = SplitMix64::derived(config.seed, stream::SHUFFLE);

    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut bad_epochs = 0;
    let mut dev_history = Vec::new();
    let mut lr_history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=config.max_epochs {
        let order = shuffle_rng.permutation(train.len());
        lr_history.push(adam.lr);
        run_epoch(mlp, &mut params, &mut adam, train, &order, config.batch_size).map_err(|e| with_epoch(e, epoch))?;
        epochs_run = epoch;

        if dev.is_empty() {
            best_epoch = epoch;
            continue;
        }
        let dev_loss = evaluate_params(mlp, &params, dev)
            .map_err(|e| with_epoch(e, epoch))?
            .bits_per_target;
        if !dev_loss.is_finite() {
            return Err(MdlError::numerical(format!("train_probe (epoch {epoch})"), "non-finite dev loss"));
        }
        dev_history.push(dev_loss);
        if dev_loss < best_loss {
            best_loss = dev_loss;
            best.clone_from(&params);
            best_epoch = epoch;
            bad_epochs = 0;
        } else if config.annealing_enabled {
            adam.lr = (adam.lr * config.anneal_factor).max(config.lr_floor);
            bad_epochs += 1;
            if bad_epochs >= config.patience {
                break;
            }
        }
    }
    if dev.is_empty() {
        best = params;
    }
    Ok(TrainedProbe {
        config: config.clone(),
        params: best,
        epochs_run,
        dev_history,
        lr_history,
        best_epoch,
    })
}
