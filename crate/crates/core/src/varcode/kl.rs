//! KL terms of the variational code.
//!
//! Each input neuron of a layer owns a scale `z ~ N(μ_z, σ_z²)` under a
//! log-uniform prior; its KL has no closed form and uses the three-constant
//! sigmoid approximation. Weights given their scale are `N(z·μ, z²·σ²)`
//! against a `N(0, z²)` prior, so that KL is a plain Gaussian one that does
//! not depend on `z`. Biases are `N(μ, σ²)` against `N(0, 1)`.

use std::f64::consts::LN_2;

pub const K1: f64 = 0.63576;
pub const K2: f64 = 1.87320;
pub const K3: f64 = 1.48695;

#[inline]
fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^v)` without overflow.
#[inline]
fn softplus(v: f64) -> f64 {
    if v > 30.0 {
        v + (-v).exp()
    } else {
        v.exp().ln_1p()
    }
}

/// Group-scale KL in nats as a function of `log α = log σ_z² − log μ_z²`,
/// clipped below at zero.
pub fn group_kl_nats(log_alpha: f64) -> f64 {
    let value = K1 - K1 * sigmoid(K2 + K3 * log_alpha) + 0.5 * softplus(-log_alpha);
    value.max(0.0)
}

/// Derivative of [`group_kl_nats`] with respect to `log α`.
pub fn group_kl_grad(log_alpha: f64) -> f64 {
    let raw = K1 - K1 * sigmoid(K2 + K3 * log_alpha) + 0.5 * softplus(-log_alpha);
    if raw <= 0.0 {
        return 0.0;
    }
    let s = sigmoid(K2 + K3 * log_alpha);
    -K1 * K3 * s * (1.0 - s) - 0.5 * sigmoid(-log_alpha)
}

/// `KL(N(μ, e^{logvar}) ‖ N(0, 1))` in nats.
#[inline]
pub fn gaussian_kl_nats(mu: f64, log_var: f64) -> f64 {
    0.5 * (log_var.exp() + mu * mu - 1.0 - log_var)
}

/// Partial derivatives of [`gaussian_kl_nats`] in `(μ, logvar)`.
#[inline]
pub fn gaussian_kl_grad(mu: f64, log_var: f64) -> (f64, f64) {
    (mu, 0.5 * (log_var.exp() - 1.0))
}

#[inline]
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / LN_2
}
