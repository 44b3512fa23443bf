use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Negative-side slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    LeakyRelu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
        }
    }
}

/// Fully-connected layer `y = act(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out × in`
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform fan-in initialization in `±1/√fan_in`.
    pub fn new_seeded<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        let mut draw = || (rng.random::<f64>() * 2.0 - 1.0) * bound;
        let weight = DMatrix::from_fn(output, input, |_, _| draw());
        let bias = DVector::from_fn(output, |_, _| draw());
        Self { weight, bias, activation }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// A stack of dense layers; hidden layers use a leaky rectifier and the last
/// layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
}

/// Activations kept by [`DenseNet::forward`] for the backward pass. Samples
/// are stored as columns.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<DMatrix<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<DMatrix<f64>>,
    /// Network output, `output_dim × batch`.
    pub output: DMatrix<f64>,
}

/// Parameter gradients, layer by layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub weight: Vec<DMatrix<f64>>,
    pub bias: Vec<DVector<f64>>,
}

impl DenseNet {
    pub fn new_seeded<R: Rng + ?Sized>(input: usize, hidden: &[usize], output: usize, rng: &mut R) -> Result<Self> {
        if input == 0 || output == 0 || hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(output);
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { Activation::Identity } else { Activation::LeakyRelu };
                Dense::new_seeded(dims[i], dims[i + 1], act, rng)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyInput("network has no layers"));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].output_dim(),
                    got: pair[1].input_dim(),
                });
            }
        }
        for l in &layers {
            if l.bias.len() != l.output_dim() {
                return Err(Error::DimensionMismatch { expected: l.output_dim(), got: l.bias.len() });
            }
            if !l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("network parameters"));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn last_layer(&self) -> &Dense {
        &self.layers[self.layers.len() - 1]
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Forward pass over a batch stored column-wise (`input_dim × batch`).
    pub fn forward(&self, x: &DMatrix<f64>) -> Result<ForwardCache> {
        if x.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.nrows(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            let mut z = &layer.weight * &h;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            let act = z.map(|v| layer.activation.apply(v));
            inputs.push(h);
            pre.push(z);
            h = act;
        }
        Ok(ForwardCache { inputs, pre, output: h })
    }

    /// Hidden features `γ(x)` feeding the last layer, one column per sample.
    pub fn features<'a>(&self, cache: &'a ForwardCache) -> &'a DMatrix<f64> {
        &cache.inputs[cache.inputs.len() - 1]
    }

    /// Backward pass given `∂L/∂output` (`output_dim × batch`).
    pub fn backward(&self, cache: &ForwardCache, grad_out: &DMatrix<f64>) -> Result<NetGrads> {
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::DimensionMismatch {
                expected: cache.output.nrows(),
                got: grad_out.nrows(),
            });
        }
        let n = self.layers.len();
        let mut weight = vec![DMatrix::zeros(0, 0); n];
        let mut bias = vec![DVector::zeros(0); n];
        let mut g = grad_out.clone();
        for i in (0..n).rev() {
            let layer = &self.layers[i];
            let gz = g.zip_map(&cache.pre[i], |gv, z| gv * layer.activation.derivative(z));
            weight[i] = &gz * cache.inputs[i].transpose();
            bias[i] = gz.column_sum();
            if i > 0 {
                g = layer.weight.transpose() * &gz;
            }
        }
        Ok(NetGrads { weight, bias })
    }

    /// Mutable views of every parameter tensor, in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for l in &mut self.layers {
            out.push(l.weight.as_mut_slice());
            out.push(l.bias.as_mut_slice());
        }
        out
    }
}

impl NetGrads {
    /// Views in the same order as [`DenseNet::params_mut`].
    pub fn as_slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weight.len());
        for (w, b) in self.weight.iter().zip(&self.bias) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn tiny_net() -> DenseNet {
        let mut rng = seeded(81, 0);
        DenseNet::new_seeded(5, &[7, 4], 3, &mut rng).unwrap()
    }

    #[test]
    fn zero_weights_propagate_bias() {
        let mut net = tiny_net();
        for l in &mut net.layers {
            l.weight.fill(0.0);
        }
        let x = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let out = net.forward(&x).unwrap().output;
        // hidden biases pass through the activations but do not reach the output through zero weights
        for j in 0..2 {
            assert_eq!(out.column(j), net.last_layer().bias.column(0));
        }
        let cache = net.forward(&x).unwrap();
        let expected: DVector<f64> = net.layers[0].bias.map(|b| Activation::LeakyRelu.apply(b));
        assert_eq!(cache.inputs[1].column(0), expected.column(0));
    }

    #[test]
    fn linear_net_equals_matrix_product() {
        let mut net = tiny_net();
        for l in &mut net.layers {
            l.activation = Activation::Identity;
        }
        let x = DMatrix::from_fn(5, 3, |i, j| (i as f64 - 2.0) * 0.3 + j as f64);
        let w = &net.layers[2].weight * &net.layers[1].weight * &net.layers[0].weight;
        let b = &net.layers[2].weight * (&net.layers[1].weight * &net.layers[0].bias + &net.layers[1].bias)
            + &net.layers[2].bias;
        let mut expected = &w * &x;
        for mut c in expected.column_iter_mut() {
            c += &b;
        }
        assert!((net.forward(&x).unwrap().output - expected).norm() < 1e-12);
    }

    #[test]
    fn batch_columns_are_independent() {
        let net = tiny_net();
        let x = DMatrix::from_fn(5, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let full = net.forward(&x).unwrap().output;
        for j in 0..6 {
            let single = net.forward(&x.columns(j, 1).into_owned()).unwrap().output;
            assert!((single.column(0) - full.column(j)).norm() < 1e-14);
        }
    }

    #[test]
    fn dimension_errors() {
        let net = tiny_net();
        assert!(matches!(net.forward(&DMatrix::zeros(4, 1)), Err(Error::DimensionMismatch { .. })));
        let bad = vec![net.layers[0].clone(), net.layers[2].clone()];
        assert!(DenseNet::from_layers(bad).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut net = tiny_net();
        let x = DMatrix::from_fn(5, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 * 0.3 - 1.0);
        let g = DMatrix::from_fn(3, 4, |i, j| ((i + 2 * j) % 3) as f64 - 1.0);
        let loss = |net: &DenseNet| net.forward(&x).unwrap().output.component_mul(&g).sum();
        let cache = net.forward(&x).unwrap();
        let grads = net.backward(&cache, &g).unwrap();
        let analytic: Vec<f64> = grads.as_slices().concat();
        let mut idx = 0;
        let n_tensors = net.params_mut().len();
        for t in 0..n_tensors {
            let len = net.params_mut()[t].len();
            for k in 0..len {
                let h = 1e-6;
                let orig = net.params_mut()[t][k];
                net.params_mut()[t][k] = orig + h;
                let lp = loss(&net);
                net.params_mut()[t][k] = orig - h;
                let lm = loss(&net);
                net.params_mut()[t][k] = orig;
                let fd = (lp - lm) / (2.0 * h);
                assert!((fd - analytic[idx]).abs() < 1e-6 * (1.0 + fd.abs()));
                idx += 1;
            }
        }
    }
}
