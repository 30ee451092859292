//! Context encoders: small tanh MLPs with hand-written backpropagation.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Layer<T: Real> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`.
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> Layer<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            biases: vec![T::zero(); outputs],
        }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                row.iter().zip(x).fold(self.biases[o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }
}

/// MLP mapping a context feature vector into the embedding space.
///
/// Inputs are divided element-wise by `input_scale`; hidden layers use tanh,
/// the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ContextEncoder<T: Real> {
    pub input_scale: Vec<T>,
    pub layers: Vec<Layer<T>>,
}

/// Activations kept from a forward pass: the scaled input, then each layer output.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    activations: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("at least the input")
    }
}

impl<T: Real> ContextEncoder<T> {
    /// Uniform fan-in initialization `U(-1/√fan_in, 1/√fan_in)`, zero biases.
    pub fn new(sizes: &[usize], input_scale: Vec<T>, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "encoder needs input and output sizes");
        assert_eq!(input_scale.len(), sizes[0]);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let mut layer = Layer::zeros(w[0], w[1]);
                let bound = 1.0 / (w[0] as f64).sqrt();
                for v in &mut layer.weights {
                    *v = T::lit(rng.random_range(-bound..bound));
                }
                layer
            })
            .collect();
        Self {
            input_scale,
            layers,
        }
    }

    /// Same shape, all parameters zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            input_scale: self.input_scale.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn forward_cached(&self, x: &[T]) -> ForwardCache<T> {
        let input: Vec<T> = x.iter().zip(&self.input_scale).map(|(&v, &s)| v / s).collect();
        let mut activations = vec![input];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.apply(activations.last().expect("input present"));
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        ForwardCache { activations }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.forward_cached(x).activations.pop().expect("output")
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂output`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &[T], grad: &mut Self) {
        let mut delta = grad_out.to_vec();
        let last = self.layers.len() - 1;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.activations[i];
            let g = &mut grad.layers[i];
            for o in 0..layer.outputs {
                let d = delta[o];
                g.biases[o] = g.biases[o] + d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &x) in row.iter_mut().zip(input) {
                    *gw = *gw + d * x;
                }
            }
            if i == 0 {
                break;
            }
            let mut prev = vec![T::zero(); layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p = *p + d * w;
                }
            }
            // input to layer i is tanh output of layer i-1
            debug_assert!(i - 1 < last);
            for (p, &a) in prev.iter_mut().zip(input) {
                *p = *p * (T::one() - a * a);
            }
            delta = prev;
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &T> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    /// `self += alpha · other`, parameter-wise.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (p, &g) in self.params_mut().zip(other.params()) {
            *p = *p + alpha * g;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }
}
