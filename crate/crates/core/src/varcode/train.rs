use super::kl::nats_to_bits;
use super::probe::{objective_and_grad, VarProbe};
use crate::datasets::Dataset;
use crate::error::{MdlError, Result};
use super::probe::VarParams;
use crate::numerics::{AdamState, ParamTensors};
use crate::probe::{check_compatible, TrainConfig};
use crate::rng::{stream, SplitMix64};

fn with_epoch(err: MdlError, epoch: usize) -> MdlError {
    match err {
        MdlError::Numerical { context, detail } => MdlError::Numerical {
            context: format!("{context} (epoch {epoch})"),
            detail,
        },
        other => other,
    }
}

/// Adam runs on `ln μ_z` rather than `μ_z`. The sign of a scale can be
/// folded into its weights, so nothing is lost; in log coordinates the mean
/// of an unused group shrinks geometrically instead of jittering around zero
/// at the step size, and that jitter would otherwise cap `log α` near the
/// pruning threshold.
fn into_log_scale(params: &mut VarParams, grads: &mut VarParams) -> Result<()> {
    for (layer, grad) in params.layers.iter_mut().zip(&mut grads.layers) {
        for (mu, g) in layer.z_mu.iter_mut().zip(&mut grad.z_mu) {
            if !(*mu > 0.0) {
                return Err(MdlError::numerical("train_variational", format!("group scale mean {mu} is not positive")));
            }
            *g *= *mu;
            *mu = mu.ln();
        }
    }
    Ok(())
}

fn from_log_scale(params: &mut VarParams) {
    for layer in &mut params.layers {
        for mu in &mut layer.z_mu {
            *mu = mu.exp();
        }
    }
}

/// Minimizes the variational codelength with Adam for `max_epochs` epochs
/// at a constant learning rate and returns the last-epoch posterior.
pub fn train_variational(train: &Dataset, config: &TrainConfig) -> Result<VarProbe> {
    config.validate()?;
    if config.annealing_enabled {
        return Err(MdlError::Usage("variational training runs at a constant learning rate; disable annealing".into()));
    }
    if train.is_empty() {
        return Err(MdlError::Size("cannot train a probe on an empty training set".into()));
    }
    check_compatible(&config.mlp, train, "train")?;

    let mut probe = VarProbe::new(config.mlp.clone(), config.seed)?;
    let mut adam = AdamState::new(&probe.params, config.lr);
    let mut shuffle_rng = SplitMix64::derived(config.seed, stream::SHUFFLE);
    let mut noise_rng = SplitMix64::derived(config.seed, stream::NOISE);
    let n = train.len();

    for epoch in 1..=config.max_epochs {
        let order = shuffle_rng.permutation(n);
        let mut objective_sum = 0.0;
        let mut steps = 0usize;
        for batch in order.chunks(config.batch_size) {
            let x = train.features.select_rows(batch);
            let labels: Vec<u32> = batch.iter().map(|&i| train.labels[i]).collect();
            let (value, grads) =
                objective_and_grad(&probe.params, &x, &labels, n, &mut noise_rng).map_err(|e| with_epoch(e, epoch))?;
            if !value.is_finite() {
                return Err(MdlError::numerical(format!("train_variational (epoch {epoch})"), "non-finite objective"));
            }
            let mut grads = grads;
            into_log_scale(&mut probe.params, &mut grads)?;
            let stepped = adam.step(&mut probe.params, &grads.tensors());
            from_log_scale(&mut probe.params);
            stepped.map_err(|e| with_epoch(e, epoch))?;
            objective_sum += value;
            steps += 1;
        }
        probe.history.push(nats_to_bits(objective_sum / steps as f64));
        probe.epochs_run = epoch;
    }
    Ok(probe)
}
