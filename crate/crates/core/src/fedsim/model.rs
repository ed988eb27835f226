use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Batch;
use crate::error::{Error, Result};
use crate::nn::{forward_mlp, Activation, BoundMlp, DenseLayer, Graph, MlpParams, Tensor, Var};
use crate::scheduler::Combination;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Shared encoder output length `d`.
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    /// Hidden widths of each modality encoder; one list per modality.
    /// Missing entries fall back to `[2·d]`.
    #[serde(default)]
    pub encoder_hidden: Vec<Vec<usize>>,
    #[serde(default = "default_header_hidden")]
    pub header_hidden: Vec<usize>,
}

fn default_feature_dim() -> usize {
    16
}
fn default_header_hidden() -> Vec<usize> {
    vec![32]
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: default_feature_dim(),
            encoder_hidden: Vec::new(),
            header_hidden: default_header_hidden(),
        }
    }
}

impl ModelConfig {
    pub fn encoder_widths(&self, modality: usize) -> Vec<usize> {
        self.encoder_hidden
            .get(modality)
            .cloned()
            .unwrap_or_else(|| vec![2 * self.feature_dim])
    }
}

/// Header `θ⁰` over the concatenated features of encoders `θ¹…θᴹ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    pub header: MlpParams,
    pub encoders: Vec<MlpParams>,
    feature_dim: usize,
}

/// Graph handles for one recorded forward pass of a [`GlobalModel`].
#[derive(Debug)]
pub struct RecordedPass {
    pub logits: Var,
    pub header: BoundMlp,
    /// `Some` for encoders recorded as trainable.
    pub encoders: Vec<Option<BoundMlp>>,
}

impl GlobalModel {
    pub fn new(header: MlpParams, encoders: Vec<MlpParams>) -> Result<Self> {
        let d = encoders
            .first()
            .ok_or_else(|| Error::Empty("model needs at least one encoder".into()))?
            .output_dim();
        if let Some((m, e)) = encoders.iter().enumerate().find(|(_, e)| e.output_dim() != d) {
            return Err(Error::shape(
                "GlobalModel::new",
                format!("feature length {d}"),
                format!("encoder {} emits {}", m + 1, e.output_dim()),
            ));
        }
        if header.input_dim() != d * encoders.len() {
            return Err(Error::shape(
                "GlobalModel::new",
                format!("header input {}", d * encoders.len()),
                header.input_dim(),
            ));
        }
        Ok(GlobalModel {
            header,
            encoders,
            feature_dim: d,
        })
    }

    pub fn init<R: Rng + ?Sized>(
        config: &ModelConfig,
        input_dims: &[usize],
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = config.feature_dim;
        if d == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        let encoders = input_dims
            .iter()
            .enumerate()
            .map(|(m, &input)| {
                let mut sizes = vec![input];
                sizes.extend(config.encoder_widths(m));
                sizes.push(d);
                let acts = vec![Activation::Relu; sizes.len() - 1];
                MlpParams::init(&sizes, &acts, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sizes = vec![d * input_dims.len()];
        sizes.extend(&config.header_hidden);
        sizes.push(num_classes);
        let mut acts = vec![Activation::Relu; sizes.len() - 1];
        *acts.last_mut().expect("header has a layer") = Activation::Identity;
        let header = MlpParams::init(&sizes, &acts, rng)?;
        GlobalModel::new(header, encoders)
    }

    pub fn num_modalities(&self) -> usize {
        self.encoders.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.header.output_dim()
    }

    pub fn same_structure(&self, other: &GlobalModel) -> bool {
        self.encoders.len() == other.encoders.len()
            && self.header.same_structure(&other.header)
            && self
                .encoders
                .iter()
                .zip(&other.encoders)
                .all(|(a, b)| a.same_structure(b))
    }

    fn check_batch(&self, features: &[Tensor]) -> Result<()> {
        if features.len() != self.encoders.len() {
            return Err(Error::shape(
                "forward_full",
                format!("{} modalities", self.encoders.len()),
                features.len(),
            ));
        }
        for (m, (x, e)) in features.iter().zip(&self.encoders).enumerate() {
            if x.cols() != e.input_dim() {
                return Err(Error::shape(
                    "forward_full",
                    format!("modality {} input dim {}", m + 1, e.input_dim()),
                    x.cols(),
                ));
            }
        }
        Ok(())
    }

    /// Per-modality features `Zᵐ = θᵐ(Xᵐ)`.
    pub fn encode(&self, features: &[Tensor]) -> Result<Vec<Tensor>> {
        self.check_batch(features)?;
        self.encoders
            .iter()
            .zip(features)
            .map(|(e, x)| forward_mlp(e, x))
            .collect()
    }

    /// Header logits from per-modality features; modalities outside `present`
    /// are replaced by zero vectors of length `d`.
    pub fn head(&self, encoded: &[Tensor], present: Combination) -> Result<Tensor> {
        let rows = encoded.first().map_or(0, Tensor::rows);
        let d = self.feature_dim;
        let m = encoded.len();
        let mut input = vec![0.0; rows * d * m];
        for (j, z) in encoded.iter().enumerate() {
            if !present.contains(j) {
                continue;
            }
            for r in 0..rows {
                input[r * d * m + j * d..r * d * m + (j + 1) * d].copy_from_slice(z.row(r));
            }
        }
        forward_mlp(&self.header, &Tensor::matrix(rows, d * m, input)?)
    }

    /// Records the full forward pass on `g`. Every encoder runs; only those in
    /// `trainable` (and the header) are recorded as differentiable.
    pub fn record(&self, g: &mut Graph, features: &[Tensor], trainable: Combination) -> Result<RecordedPass> {
        self.check_batch(features)?;
        let mut encoders = Vec::with_capacity(self.encoders.len());
        let mut zs = Vec::with_capacity(self.encoders.len());
        for (m, (enc, x)) in self.encoders.iter().zip(features).enumerate() {
            let train = trainable.contains(m);
            let bound = enc.bind(g, train);
            let xin = g.leaf_tracked(x, false);
            zs.push(bound.forward(g, xin)?);
            encoders.push(train.then_some(bound));
        }
        let fused = g.concat_cols(&zs)?;
        let header = self.header.bind(g, true);
        let logits = header.forward(g, fused)?;
        Ok(RecordedPass {
            logits,
            header,
            encoders,
        })
    }
}

/// Logits `θ⁰(concat(θ¹(X¹), …, θᴹ(Xᴹ)))`.
pub fn forward_full(model: &GlobalModel, batch: &Batch) -> Result<Tensor> {
    let encoded = model.encode(&batch.features)?;
    model.head(&encoded, Combination::full(model.num_modalities()))
}

/// Versioned JSON dump of a [`GlobalModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub version: u32,
    pub model: GlobalModel,
}

impl ModelCheckpoint {
    pub const VERSION: u32 = 1;

    pub fn to_json(model: &GlobalModel) -> Result<String> {
        serde_json::to_string(&ModelCheckpoint {
            version: Self::VERSION,
            model: model.clone(),
        })
        .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<GlobalModel> {
        let ck: ModelCheckpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ck.version != Self::VERSION {
            return Err(Error::Checkpoint(format!(
                "model checkpoint version {} is not supported (expected {})",
                ck.version,
                Self::VERSION
            )));
        }
        let rebuild = |p: &MlpParams| -> Result<MlpParams> {
            let layers = p
                .layers()
                .iter()
                .map(|l| {
                    let w = Tensor::new(l.weight.shape().to_vec(), l.weight.values().to_vec())?;
                    let b = Tensor::new(l.bias.shape().to_vec(), l.bias.values().to_vec())?;
                    DenseLayer::new(w.with_requires_grad(true), b.with_requires_grad(true), l.activation)
                })
                .collect::<Result<Vec<_>>>()?;
            MlpParams::new(layers)
        };
        let encoders = ck.model.encoders.iter().map(rebuild).collect::<Result<Vec<_>>>()?;
        GlobalModel::new(rebuild(&ck.model.header)?, encoders)
    }
}
