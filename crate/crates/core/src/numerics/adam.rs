use super::mlp::ParamTensors;
use crate::error::{MdlError, Result};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &impl ParamTensors, lr: f64) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update. Gradients are checked before anything is written,
    /// so a rejected step leaves both the parameters and the moments intact.
    pub fn step(&mut self, params: &mut impl ParamTensors, grads: &[&[f64]]) -> Result<()> {
        let mut tensors = params.tensors_mut();
        if tensors.len() != grads.len() || tensors.len() != self.first.len() {
            return Err(MdlError::dimension(
                0,
                format!("{} parameter tensors", self.first.len()),
                format!("{} params / {} grads", tensors.len(), grads.len()),
            ));
        }
        for (index, ((p, g), m)) in tensors.iter().zip(grads).zip(&self.first).enumerate() {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(MdlError::dimension(index, m.len(), format!("{} params / {} grads", p.len(), g.len())));
            }
            if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                return Err(MdlError::numerical(
                    "adam_step",
                    format!("non-finite gradient in tensor {index} at entry {bad}"),
                ));
            }
        }
        if !(self.lr > 0.0) {
            return Err(MdlError::Domain(format!("learning rate must be positive, got {}", self.lr)));
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, g), (m, v)) in tensors
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
