use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{MdlError, Result};
use crate::rng::SplitMix64;

/// Probe shape: `[]` hidden sizes is a linear probe, `[h]` is MLP-1 and
/// `[h1, h2]` is MLP-2.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub num_classes: usize,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>, num_classes: usize) -> Self {
        Self {
            input_dim,
            hidden_sizes,
            num_classes,
        }
    }

    pub fn linear(input_dim: usize, num_classes: usize) -> Self {
        Self::new(input_dim, Vec::new(), num_classes)
    }

    /// `(fan_in, fan_out)` of every dense layer, input layer first.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden_sizes.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden_sizes);
        widths.push(self.num_classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_sizes.len() + 1
    }

    pub fn num_params(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(MdlError::Usage(format!("all probe widths must be >= 1, got {self:?}")));
        }
        if self.num_classes < 2 {
            return Err(MdlError::Usage(format!(
                "probe needs at least 2 classes, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// Architecture string in `in-h1-h2` form.
    pub fn describe(&self) -> String {
        std::iter::once(self.input_dim)
            .chain(self.hidden_sizes.iter().copied())
            .map(|w| w.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// One affine layer; `weight` is `fan_in × fan_out` so that `y = x·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

impl MlpParams {
    pub fn zeros(config: &MlpConfig) -> Self {
        Self {
            layers: config
                .layer_dims()
                .into_iter()
                .map(|(fan_in, fan_out)| Dense {
                    weight: Matrix::zeros(fan_in, fan_out),
                    bias: vec![0.0; fan_out],
                })
                .collect(),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(config: &MlpConfig, rng: &mut SplitMix64) -> Self {
        let mut params = Self::zeros(config);
        for layer in &mut params.layers {
            let (fan_in, fan_out) = layer.weight.shape();
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = rng.uniform(-limit, limit);
            }
        }
        params
    }

    pub fn check_against(&self, config: &MlpConfig) -> Result<()> {
        let dims = config.layer_dims();
        if dims.len() != self.layers.len() {
            return Err(MdlError::dimension(
                self.layers.len().min(dims.len()),
                format!("{} layers", dims.len()),
                self.layers.len(),
            ));
        }
        for (index, (layer, (fan_in, fan_out))) in self.layers.iter().zip(dims).enumerate() {
            if layer.weight.shape() != (fan_in, fan_out) || layer.bias.len() != fan_out {
                return Err(MdlError::dimension(
                    index,
                    format!("{fan_in}x{fan_out} weight"),
                    format!("{}x{} weight, {} bias", layer.weight.rows(), layer.weight.cols(), layer.bias.len()),
                ));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

/// Flat view onto a set of parameter tensors, used by the optimizer and the
/// gradient checker.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;
}

impl ParamTensors for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }
}

/// Activations kept by [`mlp_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input of every layer (post-ReLU for hidden layers).
    pub inputs: Vec<Matrix>,
    /// Pre-activations of the hidden layers.
    pub pre_activations: Vec<Matrix>,
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn affine(input: &Matrix, layer: &Dense) -> Matrix {
    let mut out = input.matmul(&layer.weight);
    out.add_row_vector(&layer.bias);
    out
}

pub fn mlp_forward(config: &MlpConfig, params: &MlpParams, x: &Matrix) -> Result<(Matrix, ForwardCache)> {
    params.check_against(config)?;
    if x.cols() != config.input_dim {
        return Err(MdlError::dimension(0, format!("{} input columns", config.input_dim), x.cols()));
    }
    let last = params.layers.len() - 1;
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre_activations = Vec::with_capacity(last);
    let mut current = x.clone();
    for (index, layer) in params.layers.iter().enumerate() {
        let z = affine(&current, layer);
        inputs.push(current);
        if index == last {
            if !z.is_finite() {
                return Err(MdlError::numerical("mlp_forward", "non-finite logits"));
            }
            return Ok((
                z,
                ForwardCache {
                    inputs,
                    pre_activations,
                },
            ));
        }
        current = z.map(relu);
        pre_activations.push(z);
    }
    unreachable!("an MLP always has an output layer")
}

/// Logits only.
pub fn mlp_logits(config: &MlpConfig, params: &MlpParams, x: &Matrix) -> Result<Matrix> {
    params.check_against(config)?;
    if x.cols() != config.input_dim {
        return Err(MdlError::dimension(0, format!("{} input columns", config.input_dim), x.cols()));
    }
    let mut current = affine(x, &params.layers[0]);
    for layer in &params.layers[1..] {
        current = affine(&current.map(relu), layer);
    }
    if current.is_finite() {
        Ok(current)
    } else {
        Err(MdlError::numerical("mlp_forward", "non-finite logits"))
    }
}

pub fn mlp_backward(
    config: &MlpConfig,
    params: &MlpParams,
    cache: &ForwardCache,
    grad_logits: &Matrix,
) -> Result<MlpParams> {
    params.check_against(config)?;
    let num_layers = params.layers.len();
    if cache.inputs.len() != num_layers || cache.pre_activations.len() + 1 != num_layers {
        return Err(MdlError::dimension(
            0,
            format!("cache for {num_layers} layers"),
            format!("{} cached inputs", cache.inputs.len()),
        ));
    }
    let n = cache.inputs[0].rows();
    if grad_logits.shape() != (n, config.num_classes) {
        return Err(MdlError::dimension(
            num_layers - 1,
            format!("{n}x{} upstream gradient", config.num_classes),
            format!("{}x{}", grad_logits.rows(), grad_logits.cols()),
        ));
    }
    for (index, (input, layer)) in cache.inputs.iter().zip(&params.layers).enumerate() {
        if input.shape() != (n, layer.weight.rows()) {
            return Err(MdlError::dimension(
                index,
                format!("{n}x{} cached input", layer.weight.rows()),
                format!("{}x{}", input.rows(), input.cols()),
            ));
        }
    }

    let mut grads: Vec<Dense> = Vec::with_capacity(num_layers);
    let mut upstream = grad_logits.clone();
    for index in (0..num_layers).rev() {
        let layer = &params.layers[index];
        let grad_weight = cache.inputs[index].t_matmul(&upstream);
        let grad_bias = upstream.sum_rows();
        if index > 0 {
            let mut grad_input = upstream.matmul_t(&layer.weight);
            let pre = &cache.pre_activations[index - 1];
            for (g, &z) in grad_input.as_mut_slice().iter_mut().zip(pre.as_slice()) {
                if z <= 0.0 {
                    *g = 0.0;
                }
            }
            upstream = grad_input;
        }
        grads.push(Dense {
            weight: grad_weight,
            bias: grad_bias,
        });
    }
    grads.reverse();
    let grads = MlpParams { layers: grads };
    if !grads.is_finite() {
        return Err(MdlError::numerical("mlp_backward", "non-finite gradient"));
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_loop_forward(config: &MlpConfig, params: &MlpParams, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), config.num_classes);
        for r in 0..x.rows() {
            let mut act: Vec<f64> = x.row(r).to_vec();
            for (li, layer) in params.layers.iter().enumerate() {
                let (fan_in, fan_out) = layer.weight.shape();
                let mut next = vec![0.0; fan_out];
                for j in 0..fan_out {
                    let mut s = layer.bias[j];
                    for i in 0..fan_in {
                        s += act[i] * layer.weight[(i, j)];
                    }
                    next[j] = if li + 1 < params.layers.len() { s.max(0.0) } else { s };
                }
                act = next;
            }
            out.row_mut(r).copy_from_slice(&act);
        }
        out
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let config = MlpConfig::new(5, vec![4, 3], 3);
        let params = MlpParams::zeros(&config);
        let mut rng = SplitMix64::new(3);
        let x = Matrix::filled_with(6, 5, |_, _| rng.normal());
        let (logits, _) = mlp_forward(&config, &params, &x).unwrap();
        assert!(logits.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_linear_probe() {
        let config = MlpConfig::linear(3, 3);
        let mut params = MlpParams::zeros(&config);
        params.layers[0].weight = Matrix::identity(3);
        let x = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let (logits, _) = mlp_forward(&config, &params, &x).unwrap();
        assert_eq!(logits.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let config = MlpConfig::new(2, vec![3], 2);
        let mut rng = SplitMix64::new(11);
        let mut params = MlpParams::glorot(&config, &mut rng);
        for b in &mut params.layers[0].bias {
            *b = rng.normal();
        }
        let x = Matrix::filled_with(3, 2, |_, _| rng.normal());
        let (logits, _) = mlp_forward(&config, &params, &x).unwrap();
        assert!(logits.max_abs_diff(&scalar_loop_forward(&config, &params, &x)) < 1e-12);

        let deep = MlpConfig::new(7, vec![6, 5], 4);
        let params = MlpParams::glorot(&deep, &mut rng);
        let x = Matrix::filled_with(9, 7, |_, _| rng.normal());
        let (logits, _) = mlp_forward(&deep, &params, &x).unwrap();
        assert!(logits.max_abs_diff(&scalar_loop_forward(&deep, &params, &x)) < 1e-12);
        assert_eq!(logits, mlp_logits(&deep, &params, &x).unwrap());
    }

    #[test]
    fn forward_is_bit_identical_across_calls() {
        let config = MlpConfig::new(8, vec![16, 16], 5);
        let mut rng = SplitMix64::new(5);
        let params = MlpParams::glorot(&config, &mut rng);
        let x = Matrix::filled_with(20, 8, |_, _| rng.normal());
        let a = mlp_forward(&config, &params, &x).unwrap().0;
        let b = mlp_forward(&config, &params, &x).unwrap().0;
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let config = MlpConfig::new(4, vec![3], 2);
        let params = MlpParams::zeros(&config);
        let x = Matrix::zeros(2, 5);
        assert!(matches!(mlp_forward(&config, &params, &x), Err(MdlError::Dimension { layer: 0, .. })));

        let mut broken = params.clone();
        broken.layers[1].weight = Matrix::zeros(2, 2);
        let x = Matrix::zeros(2, 4);
        assert!(matches!(mlp_forward(&config, &broken, &x), Err(MdlError::Dimension { layer: 1, .. })));
    }

    #[test]
    fn zero_upstream_gradient() {
        let config = MlpConfig::new(4, vec![3, 3], 2);
        let mut rng = SplitMix64::new(1);
        let params = MlpParams::glorot(&config, &mut rng);
        let x = Matrix::filled_with(5, 4, |_, _| rng.normal());
        let (_, cache) = mlp_forward(&config, &params, &x).unwrap();
        let grads = mlp_backward(&config, &params, &cache, &Matrix::zeros(5, 2)).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn linear_probe_weight_gradient_is_xt_g() {
        let config = MlpConfig::linear(3, 2);
        let mut rng = SplitMix64::new(2);
        let params = MlpParams::glorot(&config, &mut rng);
        let x = Matrix::filled_with(4, 3, |_, _| rng.normal());
        let g = Matrix::filled_with(4, 2, |_, _| rng.normal());
        let (_, cache) = mlp_forward(&config, &params, &x).unwrap();
        let grads = mlp_backward(&config, &params, &cache, &g).unwrap();
        assert_eq!(grads.layers[0].weight, x.t_matmul(&g));
        assert_eq!(grads.layers[0].bias, g.sum_rows());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let config = MlpConfig::new(4, vec![3], 2);
        let other = MlpConfig::new(4, vec![3, 3], 2);
        let mut rng = SplitMix64::new(2);
        let params = MlpParams::glorot(&config, &mut rng);
        let other_params = MlpParams::glorot(&other, &mut rng);
        let x = Matrix::filled_with(2, 4, |_, _| rng.normal());
        let (_, cache) = mlp_forward(&other, &other_params, &x).unwrap();
        assert!(mlp_backward(&config, &params, &cache, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let config = MlpConfig::new(10, vec![20], 3);
        let params = MlpParams::glorot(&config, &mut SplitMix64::new(9));
        let limit = (6.0f64 / 30.0).sqrt();
        assert!(params.layers[0].weight.as_slice().iter().all(|w| w.abs() <= limit));
        assert!(params.layers[0].bias.iter().all(|&b| b == 0.0));
    }
}
