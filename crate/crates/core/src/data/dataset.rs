use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Samples observed through `M` modalities, each with its own feature matrix,
/// sharing one label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalDataset {
    features: Vec<Tensor>,
    labels: Vec<usize>,
    num_classes: usize,
    class_names: Option<Vec<String>>,
}

/// A gathered set of rows, not required to contain every class.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Vec<Tensor>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl MultimodalDataset {
    pub fn new(features: Vec<Tensor>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("dataset needs at least one modality".into()));
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        for (m, f) in features.iter().enumerate() {
            if f.shape().len() != 2 || f.rows() != labels.len() {
                return Err(Error::shape(
                    "MultimodalDataset::new",
                    format!("modality {} with {} rows", m + 1, labels.len()),
                    format!("shape {:?}", f.shape()),
                ));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad,
                classes: num_classes,
            });
        }
        let counts = class_counts(&labels, num_classes);
        if let Some(k) = counts.iter().position(|&c| c == 0) {
            return Err(Error::invalid(format!("class {k} has no samples")));
        }
        Ok(MultimodalDataset {
            features,
            labels,
            num_classes,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::shape("with_class_names", self.num_classes, names.len()));
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_modalities(&self) -> usize {
        self.features.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dims(&self) -> Vec<usize> {
        self.features.iter().map(Tensor::cols).collect()
    }

    pub fn features(&self, modality: usize) -> &Tensor {
        &self.features[modality]
    }

    pub fn all_features(&self) -> &[Tensor] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.num_classes)
    }

    pub fn gather(&self, indices: &[usize]) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::Empty("cannot gather zero rows".into()));
        }
        let features = self
            .features
            .iter()
            .map(|f| f.select_rows(indices))
            .collect::<Result<Vec<_>>>()?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Batch { features, labels })
    }

    pub fn as_batch(&self) -> Batch {
        Batch {
            features: self.features.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Rows `indices` as a dataset; fails if a class goes missing.
    pub fn subset(&self, indices: &[usize]) -> Result<MultimodalDataset> {
        let b = self.gather(indices)?;
        let mut ds = MultimodalDataset::new(b.features, b.labels, self.num_classes)?;
        ds.class_names = self.class_names.clone();
        Ok(ds)
    }
}

pub(crate) fn class_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}
