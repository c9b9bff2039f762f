use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::config::{lstm_name, ModelConfig, DENSE_HIDDEN, DENSE_OUTPUT};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor};

/// Gate blocks inside the `4·h` axis, in this order.
pub const GATE_ORDER: [&str; 4] = ["input", "forget", "cell", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams<T> {
    /// `[4h, d]`
    pub w_input: Tensor<T>,
    /// `[4h, h]`
    pub w_recurrent: Tensor<T>,
    /// `[4h]`
    pub bias: Tensor<T>,
    pub hidden_size: usize,
    pub input_size: usize,
}

impl<T: Real> LstmLayerParams<T> {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = 4 * hidden_size;
        Self {
            w_input: Tensor::zeros(&[g, input_size]),
            w_recurrent: Tensor::zeros(&[g, hidden_size]),
            bias: Tensor::zeros(&[g]),
            hidden_size,
            input_size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Softmax,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayerParams<T> {
    /// `[out, in]`
    pub weights: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Real> DenseLayerParams<T> {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            weights: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Lstm(LstmLayerParams<T>),
    Dense(DenseLayerParams<T>),
}

/// Every learnable tensor of the network, in forward order.
///
/// Gradients use the same type so optimizer and checkpoint code can walk
/// parameters and gradients in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    config: ModelConfig,
    layers: Vec<(String, Layer<T>)>,
}

impl<T: Real> ModelParams<T> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.lstm_sizes.len() + 2);
        let mut d = config.input_features;
        for (i, &h) in config.lstm_sizes.iter().enumerate() {
            layers.push((lstm_name(i), Layer::Lstm(LstmLayerParams::zeros(d, h))));
            d = h;
        }
        layers.push((
            DENSE_HIDDEN.to_string(),
            Layer::Dense(DenseLayerParams::zeros(d, config.dense_hidden, Activation::Sigmoid)),
        ));
        layers.push((
            DENSE_OUTPUT.to_string(),
            Layer::Dense(DenseLayerParams::zeros(
                config.dense_hidden,
                config.num_classes,
                Activation::Softmax,
            )),
        ));
        Ok(Self {
            config: config.clone(),
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[(String, Layer<T>)] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [(String, Layer<T>)] {
        &mut self.layers
    }

    pub(crate) fn lstm_layers(&self) -> impl Iterator<Item = &LstmLayerParams<T>> {
        self.layers.iter().filter_map(|(_, l)| match l {
            Layer::Lstm(p) => Some(p),
            Layer::Dense(_) => None,
        })
    }

    pub(crate) fn dense(&self, name: &str) -> &DenseLayerParams<T> {
        self.layers
            .iter()
            .find_map(|(n, l)| match l {
                Layer::Dense(p) if n == name => Some(p),
                _ => None,
            })
            .expect("dense layer present by construction")
    }

    /// Flat view: `("lstm1.w_input", tensor)`, ... in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (name, layer) in &self.layers {
            match layer {
                Layer::Lstm(p) => {
                    out.push((format!("{name}.w_input"), &p.w_input));
                    out.push((format!("{name}.w_recurrent"), &p.w_recurrent));
                    out.push((format!("{name}.bias"), &p.bias));
                }
                Layer::Dense(p) => {
                    out.push((format!("{name}.weights"), &p.weights));
                    out.push((format!("{name}.bias"), &p.bias));
                }
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for (_, layer) in &mut self.layers {
            match layer {
                Layer::Lstm(p) => {
                    out.push(&mut p.w_input);
                    out.push(&mut p.w_recurrent);
                    out.push(&mut p.bias);
                }
                Layer::Dense(p) => {
                    out.push(&mut p.weights);
                    out.push(&mut p.bias);
                }
            }
        }
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let layers = self
            .layers
            .iter()
            .map(|(n, l)| {
                let l = match l {
                    Layer::Lstm(p) => Layer::Lstm(LstmLayerParams {
                        w_input: p.w_input.cast(),
                        w_recurrent: p.w_recurrent.cast(),
                        bias: p.bias.cast(),
                        hidden_size: p.hidden_size,
                        input_size: p.input_size,
                    }),
                    Layer::Dense(p) => Layer::Dense(DenseLayerParams {
                        weights: p.weights.cast(),
                        bias: p.bias.cast(),
                        activation: p.activation,
                    }),
                };
                (n.clone(), l)
            })
            .collect();
        ModelParams {
            config: self.config.clone(),
            layers,
        }
    }

    /// Replace tensor contents from `(name, shape, data)` triples, which must
    /// cover every tensor exactly once in [`Self::tensors`] order.
    pub fn load_tensors(&mut self, table: Vec<(String, Vec<usize>, Vec<T>)>) -> Result<()> {
        let names: Vec<(String, Vec<usize>)> = self
            .tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if names.len() != table.len() {
            return Err(Error::ConfigMismatch(format!(
                "expected {} tensors, found {}",
                names.len(),
                table.len()
            )));
        }
        for ((want_name, want_shape), (name, shape, _)) in names.iter().zip(&table) {
            if want_name != name || want_shape != shape {
                return Err(Error::ConfigMismatch(format!(
                    "tensor `{name}` {shape:?} does not match expected `{want_name}` {want_shape:?}"
                )));
            }
        }
        for (dst, (_, _, data)) in self.tensors_mut().into_iter().zip(table) {
            dst.data_mut().copy_from_slice(&data);
        }
        Ok(())
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn glorot_fill<T: Real>(t: &mut Tensor<T>, fan_in: usize, fan_out: usize, rng: &mut Rng) {
    let b = glorot_bound(fan_in, fan_out);
    let dist = Uniform::new(-b, b).expect("positive Glorot bound");
    for v in t.data_mut() {
        *v = T::from_f64(dist.sample(rng));
    }
}

/// Glorot-uniform weights (input, recurrent and dense), zero biases except the
/// LSTM forget-gate slots, which start at 1.
pub fn init_params<T: Real>(config: &ModelConfig, rng: &mut Rng) -> Result<ModelParams<T>> {
    let mut params = ModelParams::zeros(config)?;
    for (_, layer) in params.layers_mut() {
        match layer {
            Layer::Lstm(p) => {
                let (d, h) = (p.input_size, p.hidden_size);
                glorot_fill(&mut p.w_input, d, 4 * h, rng);
                glorot_fill(&mut p.w_recurrent, h, 4 * h, rng);
                p.bias.data_mut()[h..2 * h].fill(T::one());
            }
            Layer::Dense(p) => {
                let (i, o) = (p.inputs(), p.outputs());
                glorot_fill(&mut p.weights, i, o, rng);
            }
        }
    }
    Ok(params)
}
