//! Seeded class-conditional Gaussian-mixture data.
//!
//! Modality `m` draws each class from `components_per_class` isotropic
//! Gaussians whose centres lie at distance `separation · informativeness[m]`
//! from the origin along random directions. With informativeness 0 every
//! centre collapses onto the origin and the modality carries no label signal.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::MultimodalDataset;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub num_classes: usize,
    /// Feature dimension per modality; its length is `M`.
    pub dims: Vec<usize>,
    pub samples: usize,
    pub informativeness: Vec<f64>,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_components")]
    pub components_per_class: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    3.0
}
fn default_components() -> usize {
    1
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::invalid(format!(
                "modality dims must be non-empty and positive: {:?}",
                self.dims
            )));
        }
        if self.informativeness.len() != self.dims.len() {
            return Err(Error::invalid(format!(
                "{} informativeness values for {} modalities",
                self.informativeness.len(),
                self.dims.len()
            )));
        }
        if let Some(v) = self.informativeness.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("informativeness {v} outside [0, 1]")));
        }
        if self.num_classes < 1 || self.samples < self.num_classes {
            return Err(Error::invalid(format!(
                "need at least one sample per class: {} samples, {} classes",
                self.samples, self.num_classes
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.separation >= 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid("noise and separation must be finite and non-negative"));
        }
        if self.components_per_class == 0 {
            return Err(Error::invalid("components_per_class must be positive"));
        }
        Ok(())
    }

    /// Mixture centres, indexed `[modality][class][component]`.
    pub fn component_means(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let mut rng = stream(self.seed, "synth-means", &[]);
        self.dims
            .iter()
            .zip(&self.informativeness)
            .map(|(&dim, &info)| {
                (0..self.num_classes)
                    .map(|_| {
                        (0..self.components_per_class)
                            .map(|_| {
                                let dir = random_unit(dim, &mut rng);
                                dir.into_iter().map(|v| v * self.separation * info).collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Population mean of each class, indexed `[modality][class]`.
    pub fn class_means(&self) -> Vec<Vec<Vec<f64>>> {
        self.component_means()
            .into_iter()
            .map(|classes| {
                classes
                    .into_iter()
                    .map(|comps| {
                        let n = comps.len() as f64;
                        let dim = comps[0].len();
                        (0..dim).map(|j| comps.iter().map(|c| c[j]).sum::<f64>() / n).collect()
                    })
                    .collect()
            })
            .collect()
    }
}

fn random_unit(dim: usize, rng: &mut SimRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

pub fn synthesize(config: &SynthConfig) -> Result<MultimodalDataset> {
    config.validate()?;
    let means = config.component_means();
    let k = config.num_classes;
    let mut rng = stream(config.seed, "synth-samples", &[]);

    let mut labels: Vec<usize> = (0..config.samples).map(|i| i % k).collect();
    labels.shuffle(&mut rng);
    let components: Vec<usize> = labels
        .iter()
        .map(|_| rng.random_range(0..config.components_per_class))
        .collect();

    let features = config
        .dims
        .iter()
        .enumerate()
        .map(|(m, &dim)| {
            let mut values = Vec::with_capacity(config.samples * dim);
            for (&y, &c) in labels.iter().zip(&components) {
                let centre = &means[m][y][c];
                for &mu in centre {
                    let eps: f64 = rng.sample(StandardNormal);
                    values.push(mu + config.noise * eps);
                }
            }
            Tensor::matrix(config.samples, dim, values)
        })
        .collect::<Result<Vec<_>>>()?;

    MultimodalDataset::new(features, labels, k)
}
