use super::{round_to_f32, Dataset};
use crate::error::Result;
use crate::numerics::Matrix;
use crate::rng::{stream, SplitMix64};

/// Modified Gram–Schmidt with one re-orthogonalization pass, applied to the
/// rows of `m` in place.
fn orthonormalize_rows(m: &mut Matrix) {
    let cols = m.cols();
    for i in 0..m.rows() {
        for _pass in 0..2 {
            for j in 0..i {
                let dot: f64 = m.row(i).iter().zip(m.row(j)).map(|(a, b)| a * b).sum();
                let (head, tail) = m.as_mut_slice().split_at_mut(i * cols);
                let prev = &head[j * cols..(j + 1) * cols];
                for (v, p) in tail[..cols].iter_mut().zip(prev) {
                    *v -= dot * p;
                }
            }
        }
        let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in m.row_mut(i) {
            *v /= norm;
        }
    }
}

/// Random `hidden × dim` map from a seeded Gaussian matrix.
///
/// With `hidden <= dim` the rows are orthonormal (`Q·Qᵀ = I`); otherwise
/// the columns are (`Qᵀ·Q = I`), since at most `dim` rows can be.
pub fn orthonormal_map(hidden: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::derived(seed, stream::INIT);
    if hidden <= dim {
        let mut q = Matrix::filled_with(hidden, dim, |_, _| rng.normal());
        orthonormalize_rows(&mut q);
        q
    } else {
        let mut qt = Matrix::filled_with(dim, hidden, |_, _| rng.normal());
        orthonormalize_rows(&mut qt);
        qt.transpose()
    }
}

/// Replaces every representation `x` by `ReLU(Q·x)`; labels and types are
/// kept.
pub fn random_features(dataset: &Dataset, hidden: usize, seed: u64) -> Result<Dataset> {
    let q = orthonormal_map(hidden, dataset.dim(), seed);
    let mut features = dataset.features.matmul_t(&q).map(|v| v.max(0.0));
    round_to_f32(&mut features);
    Dataset::new(
        format!("{}-random{hidden}", dataset.name),
        features,
        dataset.labels.clone(),
        dataset.num_classes,
        dataset.type_ids.clone(),
    )
}
