use std::collections::BTreeMap;

use super::Dataset;
use crate::error::{MdlError, Result};
use crate::rng::{stream, SplitMix64};

/// Control-task labels: each word type gets one label drawn from the
/// empirical label distribution of `dataset`, and every token of that type
/// carries it.
///
/// Types are visited in ascending id order from a single stream, so the
/// result depends only on the seed and the set of types, not on token order.
pub fn make_control_labels(dataset: &Dataset, seed: u64) -> Result<Vec<u32>> {
    let types = dataset
        .type_ids
        .as_ref()
        .ok_or_else(|| MdlError::Usage(format!("dataset {:?} has no type ids; control labels need them", dataset.name)))?;
    if dataset.is_empty() {
        return Ok(Vec::new());
    }
    let counts = dataset.label_counts();
    let total = dataset.len() as u64;

    let mut rng = SplitMix64::derived(seed, stream::LABELS);
    let mut assigned: BTreeMap<u32, u32> = types.iter().map(|&t| (t, 0)).collect();
    for label in assigned.values_mut() {
        // Integer inverse-CDF draw keeps the sampling exact.
        let mut draw = rng.below(total);
        let mut chosen = 0;
        for (class, &c) in counts.iter().enumerate() {
            if draw < c as u64 {
                chosen = class;
                break;
            }
            draw -= c as u64;
        }
        *label = chosen as u32;
    }
    Ok(types.iter().map(|t| assigned[t]).collect())
}

/// Labels drawn uniformly at random, independent of the inputs.
pub fn random_labels(n: usize, num_classes: usize, seed: u64) -> Vec<u32> {
    let mut rng = SplitMix64::derived(seed, stream::LABELS);
    (0..n).map(|_| rng.below(num_classes as u64) as u32).collect()
}
