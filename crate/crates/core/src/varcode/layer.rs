//! One variational affine layer with per-input-neuron scales.

use super::kl::{gaussian_kl_grad, gaussian_kl_nats, group_kl_grad, group_kl_nats};
use crate::error::{MdlError, Result};
use crate::numerics::Matrix;
use crate::rng::SplitMix64;

/// Posterior of a `fan_in × fan_out` layer. The effective weight is
/// `z_i · w_ij` with `z_i ~ N(z_mu_i, e^{z_logvar_i})` and
/// `w_ij ~ N(w_mu_ij, e^{w_logvar_ij})`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarLayer {
    pub w_mu: Matrix,
    pub w_logvar: Matrix,
    pub b_mu: Vec<f64>,
    pub b_logvar: Vec<f64>,
    pub z_mu: Vec<f64>,
    pub z_logvar: Vec<f64>,
}

pub(crate) const INIT_LOGVAR: f64 = -9.0;

impl VarLayer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            w_mu: Matrix::zeros(fan_in, fan_out),
            w_logvar: Matrix::zeros(fan_in, fan_out),
            b_mu: vec![0.0; fan_out],
            b_logvar: vec![0.0; fan_out],
            z_mu: vec![0.0; fan_in],
            z_logvar: vec![0.0; fan_in],
        }
    }

    /// Glorot means, near-deterministic weights and unit scales.
    pub fn init(fan_in: usize, fan_out: usize, rng: &mut SplitMix64) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut layer = Self::zeros(fan_in, fan_out);
        for w in layer.w_mu.as_mut_slice() {
            *w = rng.uniform(-limit, limit);
        }
        layer.w_logvar = Matrix::filled_with(fan_in, fan_out, |_, _| INIT_LOGVAR);
        layer.b_logvar = vec![INIT_LOGVAR; fan_out];
        for (mu, lv) in layer.z_mu.iter_mut().zip(&mut layer.z_logvar) {
            *mu = 1.0 + 0.01 * rng.normal();
            *lv = INIT_LOGVAR + 0.01 * rng.normal();
        }
        layer
    }

    pub fn fan_in(&self) -> usize {
        self.w_mu.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.w_mu.cols()
    }

    /// `log(σ_z² / μ_z²)` per input neuron.
    pub fn log_alpha(&self) -> Vec<f64> {
        self.z_mu
            .iter()
            .zip(&self.z_logvar)
            .map(|(&mu, &lv)| lv - (mu * mu).ln())
            .collect()
    }

    pub(crate) fn check(&self, index: usize) -> Result<()> {
        let (fan_in, fan_out) = self.w_mu.shape();
        if self.w_logvar.shape() != (fan_in, fan_out)
            || self.b_mu.len() != fan_out
            || self.b_logvar.len() != fan_out
            || self.z_mu.len() != fan_in
            || self.z_logvar.len() != fan_in
        {
            return Err(MdlError::dimension(index, format!("consistent {fan_in}x{fan_out} posterior"), "mismatched tensors"));
        }
        let finite = self.w_logvar.is_finite()
            && self.b_logvar.iter().chain(&self.z_logvar).all(|v| v.is_finite());
        if !finite {
            return Err(MdlError::numerical(format!("variational layer {index}"), "non-finite log-variance"));
        }
        Ok(())
    }

    /// Total KL of this layer in nats.
    pub fn kl_nats(&self) -> Result<f64> {
        let mut total = 0.0;
        for (i, la) in self.log_alpha().into_iter().enumerate() {
            if !la.is_finite() {
                return Err(MdlError::numerical("kl_bits", format!("non-finite log alpha for group {i}")));
            }
            total += group_kl_nats(la);
        }
        for (&mu, &lv) in self.w_mu.as_slice().iter().zip(self.w_logvar.as_slice()) {
            total += gaussian_kl_nats(mu, lv);
        }
        for (&mu, &lv) in self.b_mu.iter().zip(&self.b_logvar) {
            total += gaussian_kl_nats(mu, lv);
        }
        Ok(total)
    }

    /// Adds the KL gradient into `grads`.
    pub(crate) fn add_kl_grad(&self, grads: &mut VarLayer) {
        for i in 0..self.z_mu.len() {
            let mu = self.z_mu[i];
            let g = group_kl_grad(self.z_logvar[i] - (mu * mu).ln());
            grads.z_logvar[i] += g;
            grads.z_mu[i] += g * (-2.0 / mu);
        }
        let pairs = self.w_mu.as_slice().iter().zip(self.w_logvar.as_slice());
        let grad_pairs = grads.w_mu.as_mut_slice().iter_mut().zip(grads.w_logvar.as_mut_slice());
        for ((&mu, &lv), (gm, gv)) in pairs.zip(grad_pairs) {
            let (dm, dv) = gaussian_kl_grad(mu, lv);
            *gm += dm;
            *gv += dv;
        }
        for j in 0..self.b_mu.len() {
            let (dm, dv) = gaussian_kl_grad(self.b_mu[j], self.b_logvar[j]);
            grads.b_mu[j] += dm;
            grads.b_logvar[j] += dv;
        }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w_mu.as_slice(),
            self.w_logvar.as_slice(),
            &self.b_mu,
            &self.b_logvar,
            &self.z_mu,
            &self.z_logvar,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w_mu.as_mut_slice(),
            self.w_logvar.as_mut_slice(),
            &mut self.b_mu,
            &mut self.b_logvar,
            &mut self.z_mu,
            &mut self.z_logvar,
        ]
    }

    /// Posterior-mean pre-activations `(a ⊙ μ_z)·μ_W + μ_b`; groups flagged in
    /// `mask` are zeroed.
    pub(crate) fn forward_mean(&self, a: &Matrix, mask: Option<&[bool]>) -> Matrix {
        let fan_in = self.fan_in();
        let mut u = a.clone();
        for row in u.as_mut_slice().chunks_exact_mut(fan_in) {
            for (i, v) in row.iter_mut().enumerate() {
                let keep = mask.map_or(true, |m| !m[i]);
                *v = if keep { *v * self.z_mu[i] } else { 0.0 };
            }
        }
        let mut out = u.matmul(&self.w_mu);
        out.add_row_vector(&self.b_mu);
        out
    }

    /// Local-reparameterization sample: one scale draw per example and input
    /// neuron, then one Gaussian draw per pre-activation.
    pub(crate) fn forward_sample(&self, a: &Matrix, rng: &mut SplitMix64) -> (Matrix, SampleCache) {
        let (n, fan_in) = a.shape();
        let fan_out = self.fan_out();
        let z_sd: Vec<f64> = self.z_logvar.iter().map(|&lv| (0.5 * lv).exp()).collect();
        let eps_z = Matrix::filled_with(n, fan_in, |_, _| rng.fast_normal());
        let mut z = Matrix::zeros(n, fan_in);
        let mut u = Matrix::zeros(n, fan_in);
        for r in 0..n {
            for i in 0..fan_in {
                let zi = self.z_mu[i] + z_sd[i] * eps_z[(r, i)];
                z[(r, i)] = zi;
                u[(r, i)] = a[(r, i)] * zi;
            }
        }
        let w_var = self.w_logvar.map(f64::exp);
        let b_var: Vec<f64> = self.b_logvar.iter().map(|&lv| lv.exp()).collect();
        let mut mean = u.matmul(&self.w_mu);
        mean.add_row_vector(&self.b_mu);
        let mut var = u.map(|v| v * v).matmul(&w_var);
        var.add_row_vector(&b_var);
        let sd = var.map(f64::sqrt);
        let eps = Matrix::filled_with(n, fan_out, |_, _| rng.fast_normal());
        let mut out = mean;
        for ((o, &s), &e) in out.as_mut_slice().iter_mut().zip(sd.as_slice()).zip(eps.as_slice()) {
            *o += s * e;
        }
        let cache = SampleCache {
            input: a.clone(),
            eps_z,
            z,
            u,
            sd,
            eps,
            w_var,
            b_var,
            z_sd,
        };
        (out, cache)
    }

    /// Gradients of a sampled forward pass given `g = ∂L/∂h`; returns the
    /// layer gradients and `∂L/∂a`.
    pub(crate) fn backward_sample(&self, cache: &SampleCache, g: &Matrix) -> (VarLayer, Matrix) {
        let (n, fan_in) = cache.input.shape();
        let mut d_var = g.clone();
        for ((dv, &s), &e) in d_var.as_mut_slice().iter_mut().zip(cache.sd.as_slice()).zip(cache.eps.as_slice()) {
            *dv *= e / (2.0 * s);
        }
        let u_sq = cache.u.map(|v| v * v);
        let mut grads = VarLayer::zeros(fan_in, self.fan_out());
        grads.w_mu = cache.u.t_matmul(g);
        grads.b_mu = g.sum_rows();
        let mut d_w_logvar = u_sq.t_matmul(&d_var);
        for (d, &v) in d_w_logvar.as_mut_slice().iter_mut().zip(cache.w_var.as_slice()) {
            *d *= v;
        }
        grads.w_logvar = d_w_logvar;
        grads.b_logvar = d_var.sum_rows().into_iter().zip(&cache.b_var).map(|(d, &v)| d * v).collect();

        let mut du = g.matmul_t(&self.w_mu);
        let du_var = d_var.matmul_t(&cache.w_var);
        for ((d, &dv), &u) in du.as_mut_slice().iter_mut().zip(du_var.as_slice()).zip(cache.u.as_slice()) {
            *d += 2.0 * u * dv;
        }
        let mut da = Matrix::zeros(n, fan_in);
        for r in 0..n {
            for i in 0..fan_in {
                let d = du[(r, i)];
                da[(r, i)] = d * cache.z[(r, i)];
                let dz = d * cache.input[(r, i)];
                grads.z_mu[i] += dz;
                grads.z_logvar[i] += dz * cache.eps_z[(r, i)] * 0.5 * cache.z_sd[i];
            }
        }
        (grads, da)
    }
}

/// Noise and intermediates of one sampled layer pass.
#[derive(Clone, Debug)]
pub(crate) struct SampleCache {
    input: Matrix,
    eps_z: Matrix,
    z: Matrix,
    u: Matrix,
    sd: Matrix,
    eps: Matrix,
    w_var: Matrix,
    b_var: Vec<f64>,
    z_sd: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(seed: u64) -> VarLayer {
        let mut rng = SplitMix64::new(seed);
        let mut l = VarLayer::init(3, 2, &mut rng);
        for v in l.w_logvar.as_mut_slice() {
            *v = -1.0 + 0.5 * rng.normal();
        }
        for v in &mut l.b_logvar {
            *v = -2.0;
        }
        for v in &mut l.z_logvar {
            *v = -1.5 + 0.3 * rng.normal();
        }
        l
    }

    /// Closed-form marginal moments of one pre-activation for a fixed input,
    /// integrating over both the scales and the weights.
    fn moments(l: &VarLayer, a: &[f64], j: usize) -> (f64, f64) {
        let mut mean = l.b_mu[j];
        let mut var = l.b_logvar[j].exp();
        for i in 0..a.len() {
            let (zm, zv) = (l.z_mu[i], l.z_logvar[i].exp());
            let (wm, wv) = (l.w_mu[(i, j)], l.w_logvar[(i, j)].exp());
            mean += a[i] * zm * wm;
            var += a[i] * a[i] * ((zm * zm + zv) * wv + zv * wm * wm);
        }
        (mean, var)
    }

    #[test]
    fn sampled_moments_match_closed_form() {
        let l = layer(4);
        let row = [0.7, -1.2, 2.0];
        let draws = 100_000;
        let a = Matrix::filled_with(draws, 3, |_, i| row[i]);
        let (h, _) = l.forward_sample(&a, &mut SplitMix64::new(11));
        for j in 0..2 {
            let (mean, var) = moments(&l, &row, j);
            let col: Vec<f64> = (0..draws).map(|r| h[(r, j)]).collect();
            let m = col.iter().sum::<f64>() / draws as f64;
            let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (draws - 1) as f64;
            let fourth = col.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
            let se_mean = (var / draws as f64).sqrt();
            let se_var = ((fourth - v * v) / draws as f64).sqrt();
            assert!((m - mean).abs() < 3.0 * se_mean, "mean {m} vs {mean}");
            assert!((v - var).abs() < 3.0 * se_var, "var {v} vs {var}");
        }
    }

    #[test]
    fn sample_with_vanishing_noise_is_mean() {
        let mut l = layer(2);
        for v in l.w_logvar.as_mut_slice().iter_mut().chain(&mut l.b_logvar).chain(&mut l.z_logvar) {
            *v = -50.0;
        }
        let a = Matrix::filled_with(5, 3, |r, i| (r as f64 - i as f64) * 0.3);
        let (h, _) = l.forward_sample(&a, &mut SplitMix64::new(0));
        assert!(h.max_abs_diff(&l.forward_mean(&a, None)) < 1e-6);
    }

    #[test]
    fn log_alpha_from_posterior() {
        let mut l = VarLayer::zeros(2, 1);
        l.z_mu = vec![2.0, -0.5];
        l.z_logvar = vec![0.0, 1.0];
        let la = l.log_alpha();
        assert!((la[0] + 4f64.ln()).abs() < 1e-15);
        assert!((la[1] - (1.0 + 4f64.ln())).abs() < 1e-15);
    }
}
