//! Datasets, loaders and preprocessing.

mod augment;
mod cifar;
mod idx;
mod synth;
mod zca;

pub use augment::{augment, center_crop};
pub use cifar::{load_cifar10, parse_cifar10, CIFAR_RECORD_LEN};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use synth::synth_blobs;
pub use zca::{apply_zca, fit_zca, ZcaTransform};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Labeled samples, `[N, ...feature shape]`, plus the ordered list of
/// transforms that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
    pub provenance: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Tensor, labels: Vec<usize>, classes: usize, split: Split, source: impl Into<String>) -> Result<Self> {
        if samples.rows() != labels.len() {
            return Err(Error::shape(format!("{} samples but {} labels", samples.rows(), labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Label { label: bad, classes });
        }
        Ok(Dataset {
            samples,
            labels,
            classes,
            split,
            provenance: vec![source.into()],
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    pub fn feature_len(&self) -> usize {
        self.samples.row_len()
    }

    /// Samples and labels at `indices`, in that order.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        (self.samples.select_rows(indices), indices.iter().map(|&i| self.labels[i]).collect())
    }

    pub fn select(&self, indices: &[usize], note: impl Into<String>) -> Dataset {
        let (samples, labels) = self.batch(indices);
        let mut provenance = self.provenance.clone();
        provenance.push(note.into());
        Dataset {
            samples,
            labels,
            classes: self.classes,
            split: self.split,
            provenance,
        }
    }

    /// The first `n` samples (desk-scale truncation); a no-op when `n >= len`.
    pub fn truncate(&self, n: usize) -> Dataset {
        if n >= self.len() {
            return self.clone();
        }
        let idx: Vec<usize> = (0..n).collect();
        self.select(&idx, format!("subset(first {n})"))
    }

    pub fn with_samples(&self, samples: Tensor, note: impl Into<String>) -> Result<Dataset> {
        if samples.rows() != self.len() {
            return Err(Error::shape("transformed sample count differs"));
        }
        let mut out = self.clone();
        out.samples = samples;
        out.provenance.push(note.into());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_must_agree() {
        assert!(Dataset::new(Tensor::zeros(&[3, 2]), vec![0, 1], 2, Split::Train, "x").is_err());
        assert!(Dataset::new(Tensor::zeros(&[2, 2]), vec![0, 5], 2, Split::Train, "x").is_err());
        let d = Dataset::new(Tensor::zeros(&[3, 2]), vec![0, 1, 1], 2, Split::Train, "x").unwrap();
        let t = d.truncate(2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.provenance, vec!["x".to_string(), "subset(first 2)".to_string()]);
    }
}
