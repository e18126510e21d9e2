use crate::error::{MdlError, Result};

/// `n·log₂K`: every label sent with probability `1/K`.
pub fn uniform_codelength(n: usize, num_classes: usize) -> f64 {
    if num_classes <= 1 {
        return 0.0;
    }
    n as f64 * (num_classes as f64).log2()
}

/// `n·H(ŷ)`: labels sent with their empirical class frequencies, ignoring
/// the inputs.
pub fn prior_codelength(labels: &[u32]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 0.0;
    }
    // Ordered map: the float sum must not depend on hash order.
    let mut counts = std::collections::BTreeMap::<u32, usize>::new();
    for &y in labels {
        *counts.entry(y).or_default() += 1;
    }
    let n_f = n as f64;
    let bits: f64 = counts
        .values()
        .map(|&c| {
            let c = c as f64;
            c * (n_f / c).log2()
        })
        .sum();
    bits.max(0.0)
}

/// `baseline_bits / code_bits`.
pub fn compression_ratio(baseline_bits: f64, code_bits: f64) -> Result<f64> {
    if !(code_bits > 0.0) {
        return Err(MdlError::Domain(format!("compression ratio needs a positive codelength, got {code_bits}")));
    }
    Ok(baseline_bits / code_bits)
}
