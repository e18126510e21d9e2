use serde::{Deserialize, Serialize};

use super::{round_to_f32, Dataset};
use crate::error::{MdlError, Result};
use crate::numerics::{argmax, Matrix};
use crate::rng::{stream, SplitMix64};

/// Two Gaussian classes with means `±separation·e_1` and identity covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianTaskSpec {
    pub dim: usize,
    pub separation: f64,
    pub n: usize,
}

impl GaussianTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(MdlError::Usage("gaussian task needs dim >= 1".into()));
        }
        if !(self.separation >= 0.0) || !self.separation.is_finite() {
            return Err(MdlError::Usage(format!("separation must be finite and >= 0, got {}", self.separation)));
        }
        Ok(())
    }
}

/// Nodes and weights of `count`-point Gauss–Hermite quadrature
/// (`∫ e^{-t²} f(t) dt ≈ Σ w_i f(t_i)`), by Newton iteration on the
/// orthonormal Hermite recurrence.
pub fn gauss_hermite(count: usize) -> (Vec<f64>, Vec<f64>) {
    let pi_quarter = std::f64::consts::PI.powf(-0.25);
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    let mut z = 0.0;
    for i in 0..count.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..100 {
            let mut p1 = pi_quarter;
            let mut p2 = 0.0;
            for j in 0..count {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            derivative = (2.0 * nf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[count - 1 - i] = -z;
        weights[i] = 2.0 / (derivative * derivative);
        weights[count - 1 - i] = weights[i];
    }
    (nodes, weights)
}

#[inline]
fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// Binary entropy in bits of `sigmoid(a)`.
fn binary_entropy_of_logit(a: f64) -> f64 {
    let p = 1.0 / (1.0 + (-a).exp());
    (p * softplus(-a) + (1.0 - p) * softplus(a)) / std::f64::consts::LN_2
}

/// `I(x; y)` in bits for the two-Gaussian task.
///
/// The posterior is `p(y=1|x) = sigmoid(2μ·x_1)`, so only the first
/// coordinate matters and by symmetry
/// `I = 1 − E_{s~N(μ,1)} H_b(sigmoid(2μ s))`.
pub fn gaussian_task_mi_bits(separation: f64) -> f64 {
    if separation == 0.0 {
        return 0.0;
    }
    let (nodes, weights) = gauss_hermite(120);
    let expected: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| {
            let s = separation + std::f64::consts::SQRT_2 * t;
            w * binary_entropy_of_logit(2.0 * separation * s)
        })
        .sum::<f64>()
        / std::f64::consts::PI.sqrt();
    (1.0 - expected).clamp(0.0, 1.0)
}

pub fn gen_gaussian_task(spec: &GaussianTaskSpec, seed: u64) -> Result<(Dataset, f64)> {
    spec.validate()?;
    let mut rng = SplitMix64::derived(seed, stream::NOISE);
    let labels: Vec<u32> = (0..spec.n).map(|i| (i % 2) as u32).collect();
    let mut features = Matrix::filled_with(spec.n, spec.dim, |_, _| rng.normal());
    for (i, &y) in labels.iter().enumerate() {
        let sign = if y == 1 { 1.0 } else { -1.0 };
        features[(i, 0)] += sign * spec.separation;
    }
    round_to_f32(&mut features);
    let dataset = Dataset::new(format!("gaussian-mu{}", spec.separation), features, labels, 2, None)?;
    Ok((dataset, gaussian_task_mi_bits(spec.separation)))
}

/// Token-level task with word types.
///
/// Each of `vocab` types has a Gaussian prototype; a token's representation
/// is its type's prototype plus `context_noise`-scaled Gaussian noise. The
/// label is the argmax of a fixed random linear map of the representation
/// (restricted to the first `informative_dims` coordinates when set), with a
/// `label_noise` fraction of labels replaced by uniform draws. Type ids
/// are a hash of the quantized prototype, so all tokens of a type share one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypedTaskSpec {
    pub n: usize,
    pub dim: usize,
    pub num_classes: usize,
    pub vocab: usize,
    pub context_noise: f64,
    pub label_noise: f64,
    #[serde(default)]
    pub informative_dims: Option<usize>,
}

impl TypedTaskSpec {
    pub fn validate(&self) -> Result<()> {
        let informative = self.informative_dims.unwrap_or(self.dim);
        if self.dim == 0 || self.vocab == 0 || self.num_classes < 2 {
            return Err(MdlError::Usage(format!("invalid typed task {self:?}")));
        }
        if informative == 0 || informative > self.dim {
            return Err(MdlError::Usage(format!(
                "informative_dims must be in 1..={}, got {informative}",
                self.dim
            )));
        }
        if !(0.0..=1.0).contains(&self.label_noise) || !(self.context_noise >= 0.0) {
            return Err(MdlError::Usage(format!("invalid noise levels in {self:?}")));
        }
        Ok(())
    }
}

fn prototype_hash(prototype: &[f64]) -> u32 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &v in prototype {
        let q = (v * 256.0).round() as i64 as u64;
        h = crate::rng::derive_seed(h, q);
    }
    (h >> 32) as u32
}

pub fn gen_typed_task(spec: &TypedTaskSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let informative = spec.informative_dims.unwrap_or(spec.dim);
    let mut proto_rng = SplitMix64::derived(seed, stream::PROTOTYPES);
    let prototypes = Matrix::filled_with(spec.vocab, spec.dim, |_, _| proto_rng.normal());
    let readout = Matrix::filled_with(informative, spec.num_classes, |_, _| proto_rng.normal());
    let type_hashes: Vec<u32> = (0..spec.vocab).map(|v| prototype_hash(prototypes.row(v))).collect();

    let mut rng = SplitMix64::derived(seed, stream::NOISE);
    let mut features = Matrix::zeros(spec.n, spec.dim);
    let mut labels = Vec::with_capacity(spec.n);
    let mut type_ids = Vec::with_capacity(spec.n);
    let mut scores = vec![0.0; spec.num_classes];
    for i in 0..spec.n {
        let v = rng.below(spec.vocab as u64) as usize;
        type_ids.push(type_hashes[v]);
        let row = features.row_mut(i);
        for (x, p) in row.iter_mut().zip(prototypes.row(v)) {
            *x = ((p + spec.context_noise * rng.normal()) as f32) as f64;
        }
        scores.iter_mut().for_each(|s| *s = 0.0);
        for (j, &x) in row[..informative].iter().enumerate() {
            for (s, w) in scores.iter_mut().zip(readout.row(j)) {
                *s += x * w;
            }
        }
        let flip = rng.next_f64() < spec.label_noise;
        let noisy = rng.below(spec.num_classes as u64) as u32;
        labels.push(if flip { noisy } else { argmax(&scores) as u32 });
    }
    Dataset::new("typed", features, labels, spec.num_classes, Some(type_ids))
}
