use std::f64::consts::LN_2;

use super::matrix::Matrix;
use crate::error::{MdlError, Result};

fn check_labels(logits: &Matrix, labels: &[u32]) -> Result<()> {
    if labels.len() != logits.rows() {
        return Err(MdlError::dimension(
            0,
            format!("{} labels", logits.rows()),
            labels.len(),
        ));
    }
    let k = logits.cols();
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y as usize >= k) {
        return Err(MdlError::Index(format!("label {y} at row {i} is not below {k}")));
    }
    Ok(())
}

/// Log-sum-exp of one row.
#[inline]
fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Summed cross-entropy in nats and its gradient with respect to the logits.
pub fn softmax_nll(logits: &Matrix, labels: &[u32]) -> Result<(f64, Matrix)> {
    check_labels(logits, labels)?;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let lse = log_sum_exp(row);
        total += lse - row[y as usize];
        let g = grad.row_mut(i);
        for (gj, &zj) in g.iter_mut().zip(row) {
            *gj = (zj - lse).exp();
        }
        g[y as usize] -= 1.0;
    }
    if !total.is_finite() {
        return Err(MdlError::numerical("softmax_nll", "non-finite loss"));
    }
    Ok((total, grad))
}

/// Summed cross-entropy (Shannon–Huffman codelength) in bits.
///
/// The gradient is that of the natural-log loss divided by `ln 2`, i.e. the
/// exact gradient of the returned bit count.
pub fn softmax_nll_bits(logits: &Matrix, labels: &[u32]) -> Result<(f64, Matrix)> {
    let (nats, mut grad) = softmax_nll(logits, labels)?;
    for g in grad.as_mut_slice() {
        *g /= LN_2;
    }
    Ok((nats / LN_2, grad))
}

/// Codelength in bits without the gradient.
pub fn nll_bits(logits: &Matrix, labels: &[u32]) -> Result<f64> {
    check_labels(logits, labels)?;
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = logits.row(i);
            log_sum_exp(row) - row[y as usize]
        })
        .sum();
    if !total.is_finite() {
        return Err(MdlError::numerical("nll_bits", "non-finite loss"));
    }
    Ok(total / LN_2)
}

/// Index of the largest logit; ties go to the lowest class index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn count_correct(logits: &Matrix, labels: &[u32]) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|(i, &y)| argmax(logits.row(*i)) == y as usize)
        .count()
}
