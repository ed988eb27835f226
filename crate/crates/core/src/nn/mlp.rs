use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Gradients, Graph, Var};
use super::tensor::Tensor;
use super::Activation;
use crate::error::{Error, Result};

/// Affine map `y = act(x · Wᵀ + b)` with `W` stored as `[out×in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.shape().len() != 2 {
            return Err(Error::shape(
                "DenseLayer",
                "2-d weight",
                format!("{:?}", weight.shape()),
            ));
        }
        if bias.numel() != weight.rows() {
            return Err(Error::shape(
                "DenseLayer",
                format!("bias of length {}", weight.rows()),
                bias.numel(),
            ));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layers: Vec<DenseLayer>,
}

/// Graph handles of an [`MlpParams`] recorded on a [`Graph`].
#[derive(Debug, Clone)]
pub struct BoundMlp {
    vars: Vec<(Var, Var)>,
    activations: Vec<Activation>,
}

impl MlpParams {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("an MLP needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::shape(
                    "MlpParams::new",
                    format!("next layer input dim {}", pair[0].out_dim()),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(MlpParams { layers })
    }

    /// Layer widths `sizes[0] → sizes[1] → … → sizes[n]`, with `activations[i]`
    /// applied after layer `i`. Weights and biases are drawn uniformly from
    /// `[-1/√fan_in, 1/√fan_in]`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return Err(Error::invalid(format!(
                "{} layer sizes need {} activations, got {}",
                sizes.len(),
                sizes.len().saturating_sub(1),
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::invalid(format!("layer sizes must be positive: {sizes:?}")));
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let weight: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                let bias: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
                DenseLayer::new(
                    Tensor::matrix(fan_out, fan_in, weight)?.with_requires_grad(true),
                    Tensor::vector(bias)?.with_requires_grad(true),
                    act,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        MlpParams::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| [&mut l.weight, &mut l.bias])
    }

    pub fn num_params(&self) -> usize {
        self.parameters().map(Tensor::numel).sum()
    }

    /// Same layer count, shapes and activations.
    pub fn same_structure(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape() && a.activation == b.activation
            })
    }

    pub fn set_requires_grad(&mut self, flag: bool) {
        self.parameters_mut().for_each(|t| t.set_requires_grad(flag));
    }

    pub fn zero_grads(&mut self) {
        self.parameters_mut().for_each(Tensor::clear_grad);
    }

    /// Records the parameters on `g`. With `trainable == false` they enter as
    /// constants and receive no gradient.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundMlp {
        let vars = self
            .layers
            .iter()
            .map(|l| {
                (
                    g.leaf_tracked(&l.weight, trainable && l.weight.requires_grad()),
                    g.leaf_tracked(&l.bias, trainable && l.bias.requires_grad()),
                )
            })
            .collect();
        BoundMlp {
            vars,
            activations: self.layers.iter().map(|l| l.activation).collect(),
        }
    }

    /// Copies gradients for the bound parameters into their tensors.
    pub fn store_grads(&mut self, bound: &BoundMlp, grads: &mut Gradients) -> Result<()> {
        for (layer, &(w, b)) in self.layers.iter_mut().zip(&bound.vars) {
            if let Some(gw) = grads.take(w) {
                layer.weight.set_grad(gw)?;
            }
            if let Some(gb) = grads.take(b) {
                layer.bias.set_grad(gb)?;
            }
        }
        Ok(())
    }
}

impl BoundMlp {
    pub fn forward(&self, g: &mut Graph, input: Var) -> Result<Var> {
        let mut h = input;
        for (&(w, b), &act) in self.vars.iter().zip(&self.activations) {
            let z = g.matmul_t(h, w)?;
            let z = g.add_row(z, b)?;
            h = g.activation(act, z);
        }
        Ok(h)
    }

    pub fn weight_var(&self, layer: usize) -> Var {
        self.vars[layer].0
    }

    pub fn bias_var(&self, layer: usize) -> Var {
        self.vars[layer].1
    }
}

/// Evaluates the network on a `[batch×in]` input without recording gradients.
pub fn forward_mlp(params: &MlpParams, input: &Tensor) -> Result<Tensor> {
    if input.cols() != params.input_dim() {
        return Err(Error::shape(
            "forward_mlp",
            format!("input dim {}", params.input_dim()),
            format!("input dim {}", input.cols()),
        ));
    }
    let mut g = Graph::new();
    let bound = params.bind(&mut g, false);
    let x = g.leaf_tracked(input, false);
    let y = bound.forward(&mut g, x)?;
    Ok(g.to_tensor_matrix(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_layer_is_identity() {
        let eye = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let mlp = MlpParams::new(vec![
            DenseLayer::new(eye, Tensor::zeros(vec![3]), Activation::Identity).unwrap()
        ])
        .unwrap();
        let x = Tensor::from_rows(&[vec![1.0, -2.0, 3.5], vec![0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(forward_mlp(&mlp, &x).unwrap().values(), x.values());
    }

    #[test]
    fn zero_relu_net_outputs_zeros() {
        let mut mlp = MlpParams::init(&[4, 5, 2], &[Activation::Relu, Activation::Relu], &mut seeded(1)).unwrap();
        mlp.parameters_mut().for_each(|t| t.values_mut().fill(0.0));
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let y = forward_mlp(&mlp, &x).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn input_dim_mismatch_is_reported() {
        let mlp = MlpParams::init(&[4, 2], &[Activation::Identity], &mut seeded(1)).unwrap();
        let x = Tensor::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let msg = forward_mlp(&mlp, &x).unwrap_err().to_string();
        assert!(msg.contains("input dim 4") && msg.contains("input dim 3"), "{msg}");
    }

    #[test]
    fn layers_must_chain() {
        let a = DenseLayer::new(Tensor::zeros(vec![3, 2]), Tensor::zeros(vec![3]), Activation::Relu).unwrap();
        let b = DenseLayer::new(Tensor::zeros(vec![1, 4]), Tensor::zeros(vec![1]), Activation::Relu).unwrap();
        assert!(MlpParams::new(vec![a, b]).is_err());
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mlp = MlpParams::init(&[16, 8], &[Activation::Tanh], &mut seeded(3)).unwrap();
        assert!(mlp.parameters().flat_map(|t| t.values()).all(|v| v.abs() <= 0.25));
    }
}
