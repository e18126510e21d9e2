use super::Dataset;
use crate::error::{MdlError, Result};
use crate::rng::{stream, SplitMix64};

/// Seeded `(train, dev, test)` split.
///
/// The permutation is a Fisher–Yates shuffle driven by integer draws, so a
/// given seed splits identically on every platform.
pub fn shuffle_split(dataset: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let parts = [fractions.0, fractions.1, fractions.2];
    if parts.iter().any(|f| !(*f >= 0.0)) || !parts.iter().any(|&f| f > 0.0) {
        return Err(MdlError::Usage(format!("split fractions must be non-negative, got {parts:?}")));
    }
    if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(MdlError::Usage(format!("split fractions must sum to 1, got {parts:?}")));
    }
    let n = dataset.len();
    let n_train = (n as f64 * parts[0]).round() as usize;
    let n_dev = ((n as f64 * parts[1]).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let n_test = n - n_train - n_dev;
    for (fraction, size, name) in [(parts[0], n_train, "train"), (parts[1], n_dev, "dev"), (parts[2], n_test, "test")] {
        if fraction > 0.0 && size == 0 {
            return Err(MdlError::Size(format!(
                "{n} examples are too few for a non-empty {name} split at fraction {fraction}"
            )));
        }
    }
    let order = SplitMix64::derived(seed, stream::SHUFFLE).permutation(n);
    let take = |range: std::ops::Range<usize>, suffix: &str| {
        let mut part = dataset.subset(&order[range]);
        part.name = format!("{}-{suffix}", dataset.name);
        part
    };
    Ok((
        take(0..n_train, "train"),
        take(n_train..n_train + n_dev, "dev"),
        take(n_train + n_dev..n, "test"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn indexed(n: usize) -> Dataset {
        let x = Matrix::filled_with(n, 1, |i, _| i as f64);
        Dataset::new("idx", x, (0..n).map(|i| (i % 4) as u32).collect(), 4, None).unwrap()
    }

    fn rows(d: &Dataset) -> Vec<usize> {
        d.features.as_slice().iter().map(|&v| v as usize).collect()
    }

    #[test]
    fn whole_dataset_to_train_is_permutation() {
        let data = indexed(100);
        let (train, dev, test) = shuffle_split(&data, (1.0, 0.0, 0.0), 3).unwrap();
        assert!(dev.is_empty() && test.is_empty());
        let mut seen = rows(&train);
        assert_ne!(seen, (0..100).collect::<Vec<_>>());
        seen.sort_unstable();
        assert_eq!(seen, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn disjoint_cover_and_label_conservation() {
        let data = indexed(1001);
        let (a, b, c) = shuffle_split(&data, (0.8, 0.1, 0.1), 9).unwrap();
        assert_eq!(a.len() + b.len() + c.len(), 1001);
        let mut all: Vec<usize> = [rows(&a), rows(&b), rows(&c)].concat();
        all.sort_unstable();
        assert_eq!(all, (0..1001).collect::<Vec<_>>());
        let mut counts = vec![0; 4];
        for part in [&a, &b, &c] {
            for (k, c) in part.label_counts().into_iter().enumerate() {
                counts[k] += c;
            }
        }
        assert_eq!(counts, data.label_counts());
    }

    #[test]
    fn fixed_seed_split_is_frozen() {
        // Integer-only path: this order must never change across platforms.
        let data = indexed(10);
        let (train, dev, test) = shuffle_split(&data, (0.6, 0.2, 0.2), 2024).unwrap();
        let frozen = [rows(&train), rows(&dev), rows(&test)];
        let again = shuffle_split(&data, (0.6, 0.2, 0.2), 2024).unwrap();
        assert_eq!(frozen, [rows(&again.0), rows(&again.1), rows(&again.2)]);
        assert_eq!(frozen[0].len(), 6);
        assert_eq!(frozen[1].len(), 2);
    }

    #[test]
    fn too_small_for_splits() {
        let data = indexed(3);
        assert!(matches!(shuffle_split(&data, (0.8, 0.1, 0.1), 1), Err(MdlError::Size(_))));
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let data = indexed(30);
        assert!(shuffle_split(&data, (0.5, 0.2, 0.2), 1).is_err());
    }
}
