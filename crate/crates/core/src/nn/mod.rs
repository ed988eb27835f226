//! Dense tensors, reverse-mode differentiation, MLPs and optimizers.

mod graph;
mod mlp;
mod optim;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use mlp::{forward_mlp, BoundMlp, DenseLayer, MlpParams};
pub use optim::{sgd_step, Adam, AdamConfig, SgdConfig};
pub use tensor::Tensor;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    pub(crate) fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean softmax cross-entropy of `logits` `[batch×K]` against `labels`,
/// evaluated without recording gradients.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> crate::Result<Tensor> {
    let mut g = Graph::new();
    let l = g.leaf(logits);
    let loss = g.cross_entropy(l, labels)?;
    Ok(g.to_tensor(loss))
}
