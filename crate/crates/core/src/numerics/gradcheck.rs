//! Central-difference verification of the analytic MLP gradient.
//!
//! Perturbing one weight of layer `l` only moves one column of that layer's
//! pre-activations, so each probe evaluation patches that column and
//! re-runs the network from there instead of starting over. The loss at
//! every perturbed point is still computed exactly.

use super::loss::{nll_bits, softmax_nll_bits};
use super::matrix::Matrix;
use super::mlp::{affine, mlp_backward, mlp_forward, relu, MlpConfig, MlpParams};
use crate::error::{MdlError, Result};

/// Coordinates whose analytic plus numeric magnitude falls below this are
/// compared by absolute rather than relative error.
const ABSOLUTE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates skipped because a perturbation moved a ReLU across its
    /// kink, where the central difference does not estimate the gradient.
    pub skipped_kinks: usize,
}

struct Probe<'a> {
    params: &'a MlpParams,
    labels: &'a [u32],
    /// `inputs[l]` is the input of layer `l`.
    inputs: Vec<Matrix>,
    /// `pre[l]` is the pre-activation of layer `l`; the last entry are logits.
    pre: Vec<Matrix>,
}

impl Probe<'_> {
    /// Loss with column `col` of `pre[layer]` replaced, plus whether any ReLU
    /// changed its active side.
    fn loss_with_column(&self, layer: usize, col: usize, column: &[f64]) -> Result<(f64, bool)> {
        let last = self.pre.len() - 1;
        let base = &self.pre[layer];
        let n = base.rows();
        if layer == last {
            let mut logits = base.clone();
            for r in 0..n {
                logits[(r, col)] = column[r];
            }
            return Ok((nll_bits(&logits, self.labels)?, false));
        }

        let mut crossed = false;
        let next_layer = &self.params.layers[layer + 1];
        let mut next = self.pre[layer + 1].clone();
        let next_input = &self.inputs[layer + 1];
        let weight_row = next_layer.weight.row(col);
        for r in 0..n {
            crossed |= (column[r] > 0.0) != (base[(r, col)] > 0.0);
            let delta = relu(column[r]) - next_input[(r, col)];
            if delta != 0.0 {
                for (z, w) in next.row_mut(r).iter_mut().zip(weight_row) {
                    *z += delta * w;
                }
            }
        }
        let mut current = next;
        for index in layer + 1..last {
            let reference = &self.pre[index];
            crossed |= current
                .as_slice()
                .iter()
                .zip(reference.as_slice())
                .any(|(a, b)| (*a > 0.0) != (*b > 0.0));
            current = affine(&current.map(relu), &self.params.layers[index + 1]);
        }
        Ok((nll_bits(&current, self.labels)?, crossed))
    }
}

fn compare(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs() + numeric.abs();
    if scale < ABSOLUTE_FLOOR {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale.max(1e-12)
    }
}

pub fn finite_diff_report(
    config: &MlpConfig,
    params: &MlpParams,
    x: &Matrix,
    labels: &[u32],
    eps: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-2).contains(&eps) {
        return Err(MdlError::Domain(format!("finite-difference step {eps} outside [1e-7, 1e-2]")));
    }
    if x.rows() == 0 {
        return Err(MdlError::Size("finite-difference batch is empty".into()));
    }
    let (logits, cache) = mlp_forward(config, params, x)?;
    let (_, grad_logits) = softmax_nll_bits(&logits, labels)?;
    let grads = mlp_backward(config, params, &cache, &grad_logits)?;

    let mut pre = cache.pre_activations.clone();
    pre.push(logits);
    let probe = Probe {
        params,
        labels,
        inputs: cache.inputs,
        pre,
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        checked: 0,
        skipped_kinks: 0,
    };
    let n = x.rows();
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for (layer, grad) in grads.layers.iter().enumerate() {
        let (fan_in, fan_out) = grad.weight.shape();
        let base = &probe.pre[layer];
        let input = &probe.inputs[layer];
        for j in 0..fan_out {
            // Rows 0..fan_in are weights feeding unit j; row fan_in is its bias.
            for i in 0..=fan_in {
                for r in 0..n {
                    let step = if i == fan_in { eps } else { eps * input[(r, i)] };
                    plus[r] = base[(r, j)] + step;
                    minus[r] = base[(r, j)] - step;
                }
                let (up, crossed_up) = probe.loss_with_column(layer, j, &plus)?;
                let (down, crossed_down) = probe.loss_with_column(layer, j, &minus)?;
                if crossed_up || crossed_down {
                    report.skipped_kinks += 1;
                    continue;
                }
                let numeric = (up - down) / (2.0 * eps);
                let analytic = if i == fan_in { grad.bias[j] } else { grad.weight[(i, j)] };
                report.max_rel_err = report.max_rel_err.max(compare(analytic, numeric));
                report.checked += 1;
            }
        }
    }
    Ok(report)
}

/// Largest relative disagreement between analytic and central-difference
/// gradients of the batch codelength, over every parameter.
pub fn finite_diff_check(config: &MlpConfig, params: &MlpParams, x: &Matrix, labels: &[u32], eps: f64) -> Result<f64> {
    finite_diff_report(config, params, x, labels, eps).map(|r| r.max_rel_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_case(config: &MlpConfig, n: usize, seed: u64) -> (MlpParams, Matrix, Vec<u32>) {
        let mut rng = SplitMix64::new(seed);
        let mut params = MlpParams::glorot(config, &mut rng);
        for layer in &mut params.layers {
            for b in &mut layer.bias {
                *b = 0.1 * rng.normal();
            }
        }
        let x = Matrix::filled_with(n, config.input_dim, |_, _| rng.normal());
        let labels = (0..n).map(|_| rng.below(config.num_classes as u64) as u32).collect();
        (params, x, labels)
    }

    /// Plain central differences by full re-evaluation, used to validate the
    /// incremental evaluator itself.
    fn brute_force(config: &MlpConfig, params: &MlpParams, x: &Matrix, labels: &[u32], eps: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for (li, layer) in params.layers.iter().enumerate() {
            let (fan_in, fan_out) = layer.weight.shape();
            for j in 0..fan_out {
                for i in 0..=fan_in {
                    let eval = |delta: f64| {
                        let mut p = params.clone();
                        if i == fan_in {
                            p.layers[li].bias[j] += delta;
                        } else {
                            p.layers[li].weight[(i, j)] += delta;
                        }
                        let (logits, _) = mlp_forward(config, &p, x).unwrap();
                        nll_bits(&logits, labels).unwrap()
                    };
                    out.push((eval(eps) - eval(-eps)) / (2.0 * eps));
                }
            }
        }
        out
    }

    #[test]
    fn incremental_matches_brute_force() {
        let config = MlpConfig::new(5, vec![4, 3], 3);
        let (params, x, labels) = random_case(&config, 6, 21);
        let (logits, cache) = mlp_forward(&config, &params, &x).unwrap();
        let (_, g) = softmax_nll_bits(&logits, &labels).unwrap();
        let grads = mlp_backward(&config, &params, &cache, &g).unwrap();
        let numeric = brute_force(&config, &params, &x, &labels, 1e-5);
        let mut analytic = Vec::new();
        for layer in &grads.layers {
            let (fan_in, fan_out) = layer.weight.shape();
            for j in 0..fan_out {
                for i in 0..=fan_in {
                    analytic.push(if i == fan_in { layer.bias[j] } else { layer.weight[(i, j)] });
                }
            }
        }
        let worst = analytic.iter().zip(&numeric).map(|(a, b)| compare(*a, *b)).fold(0.0, f64::max);
        let report = finite_diff_report(&config, &params, &x, &labels, 1e-5).unwrap();
        assert!(worst < 1e-4, "brute force disagreement {worst}");
        assert!(report.max_rel_err < 1e-4);
        assert_eq!(report.checked + report.skipped_kinks, config.num_params());
    }

    #[test]
    fn linear_probe_passes() {
        let config = MlpConfig::linear(16, 5);
        let (params, x, labels) = random_case(&config, 8, 3);
        assert!(finite_diff_check(&config, &params, &x, &labels, 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn zero_everything_is_finite() {
        let config = MlpConfig::new(4, vec![3], 2);
        let params = MlpParams::zeros(&config);
        let x = Matrix::zeros(3, 4);
        let err = finite_diff_check(&config, &params, &x, &[0, 1, 1], 1e-5).unwrap();
        assert!(err.is_finite());
    }

    #[test]
    fn large_step_is_less_accurate() {
        let config = MlpConfig::new(6, vec![5], 3);
        let (params, x, labels) = random_case(&config, 5, 8);
        let coarse = finite_diff_check(&config, &params, &x, &labels, 1e-2).unwrap();
        let fine = finite_diff_check(&config, &params, &x, &labels, 1e-5).unwrap();
        assert!(coarse > fine, "coarse {coarse} fine {fine}");
    }

    #[test]
    fn step_outside_range_rejected() {
        let config = MlpConfig::linear(2, 2);
        let params = MlpParams::zeros(&config);
        let x = Matrix::zeros(1, 2);
        assert!(finite_diff_check(&config, &params, &x, &[0], 0.5).is_err());
    }

    #[test]
    fn settings_grid() {
        // Every probe shape of the settings grid on random 64-dim data.
        for hidden in [50, 100, 250, 500, 1000] {
            for config in [
                MlpConfig::new(64, vec![hidden], 10),
                MlpConfig::new(64, vec![hidden, hidden], 10),
            ] {
                let (params, x, labels) = random_case(&config, 2, hidden as u64);
                let report = finite_diff_report(&config, &params, &x, &labels, 1e-5).unwrap();
                assert!(report.max_rel_err < 1e-4, "{} -> {report:?}", config.describe());
            }
        }
    }
}
