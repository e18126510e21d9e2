//! Labelled representation datasets: storage, splits, control labels and
//! synthetic generators.

mod control;
mod format;
mod random_features;
mod split;
mod synthetic;

pub use control::{make_control_labels, random_labels};
pub use format::{read_dataset, write_dataset, FEATURE_MAGIC, FORMAT_VERSION, LABEL_MAGIC};
pub(crate) use format::write_atomic;
pub use random_features::{orthonormal_map, random_features};
pub use split::shuffle_split;
pub use synthetic::{
    gauss_hermite, gaussian_task_mi_bits, gen_gaussian_task, gen_typed_task, GaussianTaskSpec, TypedTaskSpec,
};

use crate::error::{MdlError, Result};
use crate::numerics::Matrix;

/// `n` feature vectors with one label each, plus optional word-type ids.
///
/// Feature values are stored widened to `f64` but are always exactly
/// representable as `f32`, which is the on-disk precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    pub type_ids: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Vec<u32>,
        num_classes: usize,
        type_ids: Option<Vec<u32>>,
    ) -> Result<Self> {
        let dataset = Self {
            name: name.into(),
            features,
            labels,
            num_classes,
            type_ids,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.rows();
        if self.labels.len() != n {
            return Err(MdlError::Consistency(format!(
                "{} feature rows but {} labels",
                n,
                self.labels.len()
            )));
        }
        if let Some((i, &y)) = self.labels.iter().enumerate().find(|(_, &y)| y as usize >= self.num_classes) {
            return Err(MdlError::Range(format!(
                "label {y} at row {i} is not below K={}",
                self.num_classes
            )));
        }
        if let Some(types) = &self.type_ids {
            if types.len() != n {
                return Err(MdlError::Consistency(format!("{n} rows but {} type ids", types.len())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            type_ids: self
                .type_ids
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Same inputs and types under a different label vector.
    pub fn with_labels(&self, name: impl Into<String>, labels: Vec<u32>) -> Result<Dataset> {
        Dataset::new(name, self.features.clone(), labels, self.num_classes, self.type_ids.clone())
    }

    /// Per-class counts.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y as usize] += 1;
        }
        counts
    }
}

/// Rounds every entry to the nearest `f32`.
pub(crate) fn round_to_f32(m: &mut Matrix) {
    for v in m.as_mut_slice() {
        *v = *v as f32 as f64;
    }
}
