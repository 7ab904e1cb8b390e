use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Sigmoid => crate::neuron::sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if a > 0.0 { 1.0 } else { 0.0 }
            }
            Self::Tanh => 1.0 - a * a,
            Self::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Dense layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub layers: Vec<Layer>,
}

/// Parameters of a fully connected network: `Σ (in·out + out)`.
pub fn parameter_count_for(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpModel {
    /// All parameters zero.
    pub fn zeros(layer_sizes: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {layer_sizes:?}")));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation: hidden,
            output_activation: output,
            layers,
        })
    }

    /// Weights and biases drawn from `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new(layer_sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes, hidden, output)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = bound * (2.0 * rng.uniform() - 1.0);
            }
        }
        Ok(model)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("model expects {} inputs, got {}", self.input_dim(), x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("model input is not finite".into()));
        }
        let mut acts = Activations::for_model(self);
        self.forward_into(x, &mut acts);
        Ok(acts.output().to_vec())
    }

    pub(crate) fn forward_into(&self, x: &[f64], acts: &mut Activations) {
        acts.values[0].copy_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(l);
            let (head, tail) = acts.values.split_at_mut(l + 1);
            let input = &head[l];
            let out = &mut tail[0];
            for o in 0..layer.outputs {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let z: f64 = row.iter().zip(input.iter()).map(|(w, v)| w * v).sum::<f64>() + layer.biases[o];
                out[o] = act.apply(z);
            }
        }
    }

    /// Adds `∂(d_out · output)/∂θ` to `grad`, laid out as [`MlpModel::params`].
    pub(crate) fn backward_into(&self, acts: &Activations, d_out: &[f64], grad: &mut [f64], scratch: &mut Activations) {
        let n_layers = self.layers.len();
        scratch.values[n_layers].copy_from_slice(d_out);
        let mut offset = self.parameter_count();
        for l in (0..n_layers).rev() {
            let layer = &self.layers[l];
            let act = self.activation_of(l);
            offset -= layer.parameter_count();
            let (head, tail) = scratch.values.split_at_mut(l + 1);
            let delta_out = &mut tail[0];
            for (d, &a) in delta_out.iter_mut().zip(&acts.values[l + 1]) {
                *d *= act.derivative_from_output(a);
            }
            let input = &acts.values[l];
            let (gw, gb) = grad[offset..offset + layer.parameter_count()].split_at_mut(layer.weights.len());
            for o in 0..layer.outputs {
                let d = delta_out[o];
                if d == 0.0 {
                    continue;
                }
                gb[o] += d;
                for (g, v) in gw[o * layer.inputs..(o + 1) * layer.inputs].iter_mut().zip(input) {
                    *g += d * v;
                }
            }
            if l > 0 {
                let delta_in = &mut head[l];
                delta_in.iter_mut().for_each(|v| *v = 0.0);
                for o in 0..layer.outputs {
                    let d = delta_out[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (di, w) in delta_in.iter_mut().zip(&layer.weights[o * layer.inputs..(o + 1) * layer.inputs]) {
                        *di += d * w;
                    }
                }
            }
        }
    }

    /// Flattened parameters: per layer, weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = it.next().unwrap();
            }
        }
        Ok(())
    }
}

/// Per-layer activation buffers reused across samples.
pub(crate) struct Activations {
    pub(crate) values: Vec<Vec<f64>>,
}

impl Activations {
    pub(crate) fn for_model(model: &MlpModel) -> Self {
        Self { values: model.layer_sizes.iter().map(|&n| vec![0.0; n]).collect() }
    }

    pub(crate) fn output(&self) -> &[f64] {
        self.values.last().unwrap()
    }
}

const CHECKPOINT_FORMAT: &str = "pim-mlp";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: MlpModel,
}

impl MlpModel {
    /// JSON checkpoint: `{"format": "pim-mlp", "version": 1, "model": {...}}`.
    pub fn to_checkpoint_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&ck).map_err(|e| Error::Domain(format!("checkpoint encoding failed: {e}")))
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| Error::Domain(format!("invalid checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Domain(format!(
                "unsupported checkpoint {} v{} (expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION})",
                ck.format, ck.version
            )));
        }
        let model = ck.model;
        let expected = MlpModel::zeros(&model.layer_sizes, model.hidden_activation, model.output_activation)?;
        let shapes_match = expected.layers.iter().zip(&model.layers).all(|(a, b)| {
            a.inputs == b.inputs
                && a.outputs == b.outputs
                && a.weights.len() == b.weights.len()
                && a.biases.len() == b.biases.len()
        });
        if expected.layers.len() != model.layers.len() || !shapes_match {
            return Err(Error::Shape("checkpoint layers do not match layer_sizes".into()));
        }
        Ok(model)
    }
}
