//! Variational probe: a stack of [`VarLayer`]s with ReLU in between.

use super::kl::nats_to_bits;
use super::layer::{SampleCache, VarLayer};
use crate::error::{MdlError, Result};
use crate::numerics::{softmax_nll, Dense, Matrix, MlpConfig, MlpParams, ParamTensors};
use crate::numerics::mlp::relu;
use crate::rng::SplitMix64;

pub const DEFAULT_PRUNE_THRESHOLD: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct VarParams {
    pub layers: Vec<VarLayer>,
}

impl VarParams {
    pub fn init(config: &MlpConfig, rng: &mut SplitMix64) -> Self {
        Self {
            layers: config
                .layer_dims()
                .into_iter()
                .map(|(fan_in, fan_out)| VarLayer::init(fan_in, fan_out, rng))
                .collect(),
        }
    }

    pub fn zeros(config: &MlpConfig) -> Self {
        Self {
            layers: config
                .layer_dims()
                .into_iter()
                .map(|(fan_in, fan_out)| VarLayer::zeros(fan_in, fan_out))
                .collect(),
        }
    }

    pub fn check_against(&self, config: &MlpConfig) -> Result<()> {
        let dims = config.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(MdlError::dimension(0, format!("{} layers", dims.len()), self.layers.len()));
        }
        for (index, (layer, (fan_in, fan_out))) in self.layers.iter().zip(dims).enumerate() {
            if layer.w_mu.shape() != (fan_in, fan_out) {
                return Err(MdlError::dimension(
                    index,
                    format!("{fan_in}x{fan_out} weight"),
                    format!("{}x{}", layer.fan_in(), layer.fan_out()),
                ));
            }
            layer.check(index)?;
        }
        Ok(())
    }

    pub fn kl_nats(&self) -> Result<f64> {
        self.layers.iter().map(VarLayer::kl_nats).sum()
    }
}

impl ParamTensors for VarParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

/// A trained (or freshly initialized) variational probe.
#[derive(Clone, Debug, PartialEq)]
pub struct VarProbe {
    pub config: MlpConfig,
    pub params: VarParams,
    pub seed: u64,
    pub epochs_run: usize,
    /// Mean per-step objective of each epoch, in bits.
    pub history: Vec<f64>,
    /// Groups with `log α` at or above this are pruned.
    pub prune_threshold: f64,
}

impl VarProbe {
    pub fn new(config: MlpConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = VarParams::init(&config, &mut SplitMix64::derived(seed, crate::rng::stream::INIT));
        Ok(Self {
            config,
            params,
            seed,
            epochs_run: 0,
            history: Vec::new(),
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        })
    }

    /// Pruning flags per layer: `true` where the group is removed.
    pub fn prune_masks(&self, threshold: f64) -> Vec<Vec<bool>> {
        self.params
            .layers
            .iter()
            .map(|l| l.log_alpha().into_iter().map(|la| !(la < threshold)).collect())
            .collect()
    }

    /// Deterministic network with effective weights `μ_z,i · μ_W,ij`,
    /// optionally with pruned groups zeroed.
    pub fn mean_params(&self, prune_threshold: Option<f64>) -> MlpParams {
        let masks = prune_threshold.map(|t| self.prune_masks(t));
        let layers = self
            .params
            .layers
            .iter()
            .enumerate()
            .map(|(index, l)| {
                let weight = Matrix::filled_with(l.fan_in(), l.fan_out(), |i, j| {
                    let pruned = masks.as_ref().is_some_and(|m| m[index][i]);
                    if pruned {
                        0.0
                    } else {
                        l.z_mu[i] * l.w_mu[(i, j)]
                    }
                });
                Dense {
                    weight,
                    bias: l.b_mu.clone(),
                }
            })
            .collect();
        MlpParams { layers }
    }
}

/// How [`var_forward`] treats the posterior.
pub enum ForwardMode<'a> {
    /// One posterior draw per example.
    Sample(&'a mut SplitMix64),
    /// Posterior means, with groups at or above the threshold zeroed.
    Mean { prune_threshold: Option<f64> },
}

fn check_input(probe: &VarProbe, x: &Matrix) -> Result<()> {
    probe.params.check_against(&probe.config)?;
    if x.cols() != probe.config.input_dim {
        return Err(MdlError::dimension(0, format!("{} input columns", probe.config.input_dim), x.cols()));
    }
    Ok(())
}

pub fn var_forward(probe: &VarProbe, x: &Matrix, mode: ForwardMode<'_>) -> Result<Matrix> {
    check_input(probe, x)?;
    let layers = &probe.params.layers;
    let logits = match mode {
        ForwardMode::Sample(rng) => sample_pass(layers, x, rng).0,
        ForwardMode::Mean { prune_threshold } => {
            let masks = prune_threshold.map(|t| probe.prune_masks(t));
            let mut current = x.clone();
            for (index, layer) in layers.iter().enumerate() {
                if index > 0 {
                    current = current.map(relu);
                }
                current = layer.forward_mean(&current, masks.as_ref().map(|m| m[index].as_slice()));
            }
            current
        }
    };
    if !logits.is_finite() {
        return Err(MdlError::numerical("var_forward", "non-finite logits"));
    }
    Ok(logits)
}

pub(crate) struct PassCache {
    layers: Vec<SampleCache>,
    pre_activations: Vec<Matrix>,
}

pub(crate) fn sample_pass(layers: &[VarLayer], x: &Matrix, rng: &mut SplitMix64) -> (Matrix, PassCache) {
    let mut caches = Vec::with_capacity(layers.len());
    let mut pre_activations = Vec::with_capacity(layers.len() - 1);
    let mut current = x.clone();
    for (index, layer) in layers.iter().enumerate() {
        if index > 0 {
            let activated = current.map(relu);
            pre_activations.push(current);
            current = activated;
        }
        let (out, cache) = layer.forward_sample(&current, rng);
        caches.push(cache);
        current = out;
    }
    (
        current,
        PassCache {
            layers: caches,
            pre_activations,
        },
    )
}

pub(crate) fn sample_backward(layers: &[VarLayer], cache: &PassCache, grad_logits: &Matrix) -> VarParams {
    let mut grads = Vec::with_capacity(layers.len());
    let mut upstream = grad_logits.clone();
    for index in (0..layers.len()).rev() {
        let (g, mut da) = layers[index].backward_sample(&cache.layers[index], &upstream);
        grads.push(g);
        if index > 0 {
            for (d, &z) in da.as_mut_slice().iter_mut().zip(cache.pre_activations[index - 1].as_slice()) {
                if z <= 0.0 {
                    *d = 0.0;
                }
            }
            upstream = da;
        }
    }
    grads.reverse();
    VarParams { layers: grads }
}

/// Minibatch estimate of the codelength objective in nats:
/// `(n_total / |batch|) · batch NLL + KL`, with its gradient.
pub(crate) fn objective_and_grad(
    params: &VarParams,
    x: &Matrix,
    labels: &[u32],
    n_total: usize,
    rng: &mut SplitMix64,
) -> Result<(f64, VarParams)> {
    let (logits, cache) = sample_pass(&params.layers, x, rng);
    if !logits.is_finite() {
        return Err(MdlError::numerical("variational forward", "non-finite logits"));
    }
    let (nll, mut grad_logits) = softmax_nll(&logits, labels)?;
    let scale = n_total as f64 / labels.len() as f64;
    for g in grad_logits.as_mut_slice() {
        *g *= scale;
    }
    let mut grads = sample_backward(&params.layers, &cache, &grad_logits);
    for (layer, g) in params.layers.iter().zip(&mut grads.layers) {
        layer.add_kl_grad(g);
    }
    let value = scale * nll + params.kl_nats()?;
    Ok((value, grads))
}

/// Model cost of the posterior, in bits.
pub fn kl_bits(probe: &VarProbe) -> Result<f64> {
    probe.params.check_against(&probe.config)?;
    Ok(nats_to_bits(probe.params.kl_nats()?))
}

/// `"in-h1-h2"`: surviving input groups of every layer, input width first.
pub fn prune_architecture(probe: &VarProbe, log_alpha_threshold: f64) -> String {
    probe
        .prune_masks(log_alpha_threshold)
        .iter()
        .map(|mask| mask.iter().filter(|&&pruned| !pruned).count().to_string())
        .collect::<Vec<_>>()
        .join("-")
}
