use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kl::nats_to_bits;
use super::probe::{kl_bits, prune_architecture, sample_pass, var_forward, ForwardMode, VarProbe};
use crate::codes::uniform_codelength;
use crate::datasets::Dataset;
use crate::error::{MdlError, Result};
use crate::numerics::{count_correct, nll_bits, Matrix};
use crate::probe::check_compatible;
use crate::rng::{derive_seed, stream, SplitMix64};

const EVAL_CHUNK: usize = 2048;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarReport {
    pub kl_bits: f64,
    pub data_bits: f64,
    pub total_bits: f64,
    /// Posterior-mean accuracy with pruned groups zeroed.
    pub accuracy: f64,
    pub pruned_architecture: String,
    pub compression: f64,
    pub samples: usize,
}

/// Ordered pairwise sum, so the result only depends on the input order.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn sample_seed(probe: &VarProbe, sample: usize) -> u64 {
    derive_seed(derive_seed(probe.seed, stream::MONTE_CARLO), sample as u64)
}

/// One posterior draw per example, visiting the data in chunks with a single
/// noise stream.
fn chunked_samples(probe: &VarProbe, data: &Dataset, seed: u64, mut f: impl FnMut(&Matrix, &[u32]) -> Result<()>) -> Result<()> {
    let mut rng = SplitMix64::new(seed);
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = data.features.select_rows(chunk);
        let labels: Vec<u32> = chunk.iter().map(|&i| data.labels[i]).collect();
        let (logits, _) = sample_pass(&probe.params.layers, &x, &mut rng);
        if !logits.is_finite() {
            return Err(MdlError::numerical("variational_codelength", "non-finite logits"));
        }
        f(&logits, &labels)?;
    }
    Ok(())
}

fn sampled_data_bits(probe: &VarProbe, data: &Dataset, samples: usize) -> Result<Vec<f64>> {
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut bits = 0.0;
            chunked_samples(probe, data, sample_seed(probe, s), |logits, labels| {
                bits += nll_bits(logits, labels)?;
                Ok(())
            })?;
            Ok(bits)
        })
        .collect()
}

fn check(probe: &VarProbe, data: &Dataset, samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(MdlError::Domain("at least one posterior sample is needed".into()));
    }
    probe.params.check_against(&probe.config)?;
    check_compatible(&probe.config, data, "evaluation")
}

/// Accuracy of the posterior-mean probe with groups above the probe's prune
/// threshold zeroed.
pub fn pruned_accuracy(probe: &VarProbe, data: &Dataset) -> Result<f64> {
    check_compatible(&probe.config, data, "evaluation")?;
    let mut correct = 0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let x = data.features.select_rows(chunk);
        let labels: Vec<u32> = chunk.iter().map(|&i| data.labels[i]).collect();
        let logits = var_forward(probe, &x, ForwardMode::Mean { prune_threshold: Some(probe.prune_threshold) })?;
        correct += count_correct(&logits, &labels);
    }
    Ok(if data.is_empty() { 0.0 } else { correct as f64 / data.len() as f64 })
}

/// KL plus the Monte-Carlo expected data cost over `samples` draws.
pub fn variational_codelength(probe: &VarProbe, data: &Dataset, samples: usize) -> Result<VarReport> {
    check(probe, data, samples)?;
    let kl = kl_bits(probe)?;
    let per_sample = sampled_data_bits(probe, data, samples)?;
    let data_bits = pairwise_sum(&per_sample) / samples as f64;
    let total_bits = kl + data_bits;
    let n = data.len();
    Ok(VarReport {
        kl_bits: kl,
        data_bits,
        total_bits,
        accuracy: pruned_accuracy(probe, data)?,
        pruned_architecture: prune_architecture(probe, probe.prune_threshold),
        compression: if total_bits > 0.0 { uniform_codelength(n, data.num_classes) / total_bits } else { f64::INFINITY },
        samples,
    })
}

/// Evidence lower bound in bits, accumulated from log-probabilities rather
/// than codelengths; equals the negated total of [`variational_codelength`]
/// with the same draws.
pub fn elbo_bits(probe: &VarProbe, data: &Dataset, samples: usize) -> Result<f64> {
    check(probe, data, samples)?;
    let per_sample: Vec<f64> = (0..samples)
        .map(|s| {
            let mut log_lik = 0.0;
            chunked_samples(probe, data, sample_seed(probe, s), |logits, labels| {
                for (row, &y) in logits.as_slice().chunks_exact(logits.cols()).zip(labels) {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let log_norm = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    log_lik += row[y as usize] - log_norm;
                }
                Ok(())
            })?;
            Ok(nats_to_bits(log_lik))
        })
        .collect::<Result<_>>()?;
    let expected_log_lik = pairwise_sum(&per_sample) / samples as f64;
    Ok(expected_log_lik - nats_to_bits(probe.params.kl_nats()?))
}
