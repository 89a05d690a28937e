//! Dataset ingestion, normalization, light augmentation, and a synthetic
//! dataset for fast tests.

mod cifar;
mod mnist;
mod synthetic;
mod transform;

pub use cifar::load_cifar10_bin;
pub use mnist::{load_mnist_idx, write_mnist_idx};
pub use synthetic::synthetic_blobs;
pub use transform::{augment, zscore_normalize, NormStats};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Which half of a dataset this is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Images as `[N, H, W, C]` plus integer labels. Immutable after load.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Tensor<f32>,
    pub labels: Vec<u32>,
    pub split: Split,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(
        images: Tensor<f32>,
        labels: Vec<u32>,
        split: Split,
        num_classes: usize,
    ) -> Result<Self> {
        if images.rank() != 4 {
            return Err(Error::Dimension(format!(
                "dataset images must be [N,H,W,C], got {:?}",
                images.shape()
            )));
        }
        if images.shape()[0] != labels.len() {
            return Err(Error::Data(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            images,
            labels,
            split,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Per-sample shape `[H, W, C]`.
    pub fn sample_shape(&self) -> Vec<usize> {
        self.images.shape()[1..].to_vec()
    }

    /// The first `n` samples, used for deterministic subset experiments.
    pub fn take(&self, n: usize) -> Result<Dataset> {
        if n > self.len() {
            return Err(Error::Parameter(format!(
                "subset of {n} from a dataset of {}",
                self.len()
            )));
        }
        let row: usize = self.sample_shape().iter().product();
        let mut shape = self.images.shape().to_vec();
        shape[0] = n;
        Ok(Dataset {
            images: Tensor::from_vec(&shape, self.images.as_slice()[..n * row].to_vec())?,
            labels: self.labels[..n].to_vec(),
            split: self.split,
            num_classes: self.num_classes,
        })
    }

    /// Copy the given samples into a batch tensor and label vector.
    pub fn gather(&self, indices: &[usize]) -> (Tensor<f32>, Vec<u32>) {
        let row: usize = self.sample_shape().iter().product();
        let src = self.images.as_slice();
        let mut data = Vec::with_capacity(indices.len() * row);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&src[i * row..(i + 1) * row]);
            labels.push(self.labels[i]);
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = indices.len();
        (
            Tensor::from_vec(&shape, data).expect("gather builds a consistent batch"),
            labels,
        )
    }
}

/// Root directory for datasets: `$RECONNECT_DATA_DIR`, or `./data` relative
/// to the workspace when unset.
pub fn data_dir() -> std::path::PathBuf {
    if let Ok(dir) = std::env::var("RECONNECT_DATA_DIR") {
        return std::path::PathBuf::from(dir);
    }
    // Tests run with the crate as cwd; the CLI from the workspace root.
    let mut here = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    here.pop();
    here.pop();
    here.push("data");
    here
}

/// Standard MNIST file-name pairs under `<data_dir>/mnist`.
pub fn mnist_paths(dir: &std::path::Path, split: Split) -> (std::path::PathBuf, std::path::PathBuf) {
    let (images, labels) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    (dir.join(images), dir.join(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_validates_labels() {
        let images = Tensor::zeros(&[2, 1, 1, 3]);
        assert!(Dataset::new(images.clone(), vec![0, 9], Split::Train, 10).is_ok());
        assert!(Dataset::new(images, vec![0, 10], Split::Train, 10).is_err());
    }

    #[test]
    fn gather_copies_rows() {
        let images = Tensor::from_vec(&[3, 1, 1, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let ds = Dataset::new(images, vec![7, 8, 9], Split::Train, 10).unwrap();
        let (batch, labels) = ds.gather(&[2, 0]);
        assert_eq!(batch.as_slice(), &[4.0, 5.0, 0.0, 1.0]);
        assert_eq!(labels, vec![9, 7]);
    }
}
