use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Linear => v,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, out: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - out * out,
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

/// Encoder `p → 64 → 16 → d` and mirrored decoder `d → 16 → 64 → p`, hidden
/// layers tanh, output layers linear. Hidden widths are clipped to at most `p`.
pub fn default_architecture(p: usize, d: usize) -> (Vec<LayerSpec>, Vec<LayerSpec>) {
    let h1 = 64.min(p).max(1);
    let h2 = 16.min(p).max(1);
    let chain = |dims: [usize; 4]| -> Vec<LayerSpec> {
        (0..3)
            .map(|l| LayerSpec {
                in_dim: dims[l],
                out_dim: dims[l + 1],
                activation: if l < 2 {
                    Activation::Tanh
                } else {
                    Activation::Linear
                },
            })
            .collect()
    };
    (chain([p, h1, h2, d]), chain([d, h2, h1, p]))
}

/// Weights are `out_dim × in_dim`, so a layer maps `h ↦ a(W h + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub specs: Vec<LayerSpec>,
    pub layers: Vec<Layer>,
}

/// Per-layer outputs of a batch forward pass; `activations[0]` is the input.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("input is always cached")
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Shape("network needs at least one layer".into()));
    }
    for (l, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::Shape(format!("layer {l} has a zero dimension")));
        }
        if l > 0 && specs[l - 1].out_dim != s.in_dim {
            return Err(Error::Shape(format!(
                "layer {l} expects {} inputs, previous layer emits {}",
                s.in_dim,
                specs[l - 1].out_dim
            )));
        }
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases, drawn from `rng` in layer order.
pub fn init_params_with_rng(specs: &[LayerSpec], rng: &mut impl Rng) -> Result<MlpParams> {
    validate_specs(specs)?;
    let layers = specs
        .iter()
        .map(|s| {
            let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
            Layer {
                weights: Array2::from_shape_fn((s.out_dim, s.in_dim), |_| {
                    rng.random_range(-limit..limit)
                }),
                bias: Array1::zeros(s.out_dim),
            }
        })
        .collect();
    Ok(MlpParams {
        specs: specs.to_vec(),
        layers,
    })
}

pub fn init_params(specs: &[LayerSpec], seed: u64) -> Result<MlpParams> {
    init_params_with_rng(specs, &mut ChaCha8Rng::seed_from_u64(seed))
}

impl MlpParams {
    pub fn from_layers(specs: Vec<LayerSpec>, layers: Vec<Layer>) -> Result<Self> {
        validate_specs(&specs)?;
        if specs.len() != layers.len() {
            return Err(Error::Shape("one parameter block per layer spec".into()));
        }
        for (l, (s, p)) in specs.iter().zip(&layers).enumerate() {
            if p.weights.dim() != (s.out_dim, s.in_dim) || p.bias.len() != s.out_dim {
                return Err(Error::Shape(format!("layer {l} parameters do not match spec")));
            }
        }
        Ok(MlpParams { specs, layers })
    }

    pub fn in_dim(&self) -> usize {
        self.specs[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.specs.last().expect("validated nonempty").out_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Same architecture, every parameter zero.
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            specs: self.specs.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
        }
    }

    /// Parameters in layer order, weights row-major then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`MlpParams::to_flat`]; returns the number of values consumed.
    pub fn assign_flat(&mut self, flat: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = flat[k];
                k += 1;
            }
            for b in l.bias.iter_mut() {
                *b = flat[k];
                k += 1;
            }
        }
        k
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.activations.pop().expect("nonempty"))
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.in_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_owned());
        for (spec, layer) in self.specs.iter().zip(&self.layers) {
            let prev = activations.last().expect("input pushed");
            let mut h = prev.dot(&layer.weights.t()) + &layer.bias;
            let act = spec.activation;
            h.mapv_inplace(|v| act.apply(v));
            activations.push(h);
        }
        Ok(ForwardCache { activations })
    }

    /// Reverse pass: given `∂L/∂output`, returns parameter gradients and `∂L/∂input`.
    pub fn backward(&self, cache: &ForwardCache, d_output: ArrayView2<f64>) -> (MlpParams, Array2<f64>) {
        let mut grads = self.zeros_like();
        let mut delta = d_output.to_owned();
        for l in (0..self.layers.len()).rev() {
            let act = self.specs[l].activation;
            let out = &cache.activations[l + 1];
            if act != Activation::Linear {
                ndarray::Zip::from(&mut delta)
                    .and(out)
                    .for_each(|d, &o| *d *= act.derivative_from_output(o));
            }
            let input = &cache.activations[l];
            grads.layers[l].weights = delta.t().dot(input);
            grads.layers[l].bias = delta.sum_axis(Axis(0));
            delta = delta.dot(&self.layers[l].weights);
        }
        (grads, delta)
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
