//! Layer topology, shape checking, and parameter initialization.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("layer {index} ({layer}) cannot follow a {reason}")]
    BadLayerChain { index: usize, layer: String, reason: String },
    #[error("spatial dims collapse to zero at layer {index}")]
    DimsExhausted { index: usize },
    #[error("model must end with Dense followed by Softmax")]
    MissingHead,
    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
}

/// One layer. Convolutions are stride 1 without padding; pooling is 2x2
/// stride 2 with truncation of odd edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv { filters: usize, kh: usize, kw: usize },
    Relu,
    MaxPool2,
    Flatten,
    Dense { units: usize },
    Softmax,
}

impl std::fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerSpec::Conv { filters, kh, kw } => write!(f, "conv({filters}@{kh}x{kw})"),
            LayerSpec::Relu => write!(f, "relu"),
            LayerSpec::MaxPool2 => write!(f, "maxpool2"),
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Dense { units } => write!(f, "dense({units})"),
            LayerSpec::Softmax => write!(f, "softmax"),
        }
    }
}

/// Ordered layer list plus the expected input shape (c, h, w).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// The 28x28 digit classifier: two convolutional layers (128 filters at
    /// 5x5 and 3x3), each followed by ReLU and 2x2 max-pooling, then a single
    /// 128-unit hidden dense layer and a 10-way softmax.
    pub fn image_cnn() -> ModelSpec {
        ModelSpec {
            input: (1, 28, 28),
            layers: vec![
                LayerSpec::Conv { filters: 128, kh: 5, kw: 5 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Conv { filters: 128, kh: 3, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 10 },
                LayerSpec::Softmax,
            ],
        }
    }

    /// The 98x50 spectrogram classifier: four 16-filter convolutional layers
    /// (5x5 then three 3x3) with pooling after the first and third, a 128-unit
    /// hidden dense layer, and a 10-way softmax.
    pub fn speech_cnn() -> ModelSpec {
        ModelSpec {
            input: (1, 98, 50),
            layers: vec![
                LayerSpec::Conv { filters: 16, kh: 5, kw: 5 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Conv { filters: 16, kh: 3, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Conv { filters: 16, kh: 3, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Conv { filters: 16, kh: 3, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 128 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: 10 },
                LayerSpec::Softmax,
            ],
        }
    }

    /// Output shape (c, h, w) after every layer; flattened shapes use
    /// (features, 1, 1). Fails if the chain is inconsistent.
    pub fn shapes(&self) -> Result<Vec<(usize, usize, usize)>, ModelError> {
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        let mut flat = false;
        for (index, layer) in self.layers.iter().enumerate() {
            let chain_err = |reason: &str| ModelError::BadLayerChain {
                index,
                layer: layer.to_string(),
                reason: reason.to_string(),
            };
            cur = match *layer {
                LayerSpec::Conv { filters, kh, kw } => {
                    if flat {
                        return Err(chain_err("flattened input"));
                    }
                    if cur.1 < kh || cur.2 < kw {
                        return Err(ModelError::DimsExhausted { index });
                    }
                    (filters, cur.1 - kh + 1, cur.2 - kw + 1)
                }
                LayerSpec::Relu => cur,
                LayerSpec::MaxPool2 => {
                    if flat {
                        return Err(chain_err("flattened input"));
                    }
                    if cur.1 < 2 || cur.2 < 2 {
                        return Err(ModelError::DimsExhausted { index });
                    }
                    (cur.0, cur.1 / 2, cur.2 / 2)
                }
                LayerSpec::Flatten => {
                    flat = true;
                    (cur.0 * cur.1 * cur.2, 1, 1)
                }
                LayerSpec::Dense { units } => {
                    if !flat {
                        return Err(chain_err("unflattened input"));
                    }
                    (units, 1, 1)
                }
                LayerSpec::Softmax => cur,
            };
            shapes.push(cur);
        }
        let n = self.layers.len();
        let head_ok = n >= 2
            && matches!(self.layers[n - 1], LayerSpec::Softmax)
            && matches!(self.layers[n - 2], LayerSpec::Dense { .. });
        if !head_ok {
            return Err(ModelError::MissingHead);
        }
        Ok(shapes)
    }

    /// Number of output classes (units of the final dense layer).
    pub fn n_classes(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                LayerSpec::Dense { units } => Some(*units),
                _ => None,
            })
            .unwrap_or(0)
    }

    /// Total trainable parameter count implied by the shape chain.
    pub fn param_count(&self) -> Result<usize, ModelError> {
        let shapes = self.shapes()?;
        let mut count = 0;
        let mut prev = self.input;
        for (layer, &shape) in self.layers.iter().zip(&shapes) {
            match *layer {
                LayerSpec::Conv { filters, kh, kw } => count += filters * (prev.0 * kh * kw + 1),
                LayerSpec::Dense { units } => count += units * (prev.0 + 1),
                _ => {}
            }
            prev = shape;
        }
        Ok(count)
    }
}

/// A spec plus its trainable parameters. Parameter tensors are stored in
/// layer order, weights then bias for each parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<Vec<f32>>,
}

impl Model {
    /// Kaiming-style fan-in initialization for weights, zero biases, all
    /// draws from a ChaCha stream derived from `init_seed`.
    pub fn init(spec: ModelSpec, init_seed: u64) -> Result<Model, ModelError> {
        spec.shapes()?;
        let mut rng = seed::rng_from(seed::derive(init_seed, &[seed::NS_INIT]));
        let mut params = Vec::new();
        let mut prev = spec.input;
        let shapes = spec.shapes()?;
        for (layer, &shape) in spec.layers.iter().zip(&shapes) {
            match *layer {
                LayerSpec::Conv { filters, kh, kw } => {
                    let fan_in = prev.0 * kh * kw;
                    let std = (2.0 / fan_in as f64).sqrt();
                    params.push(gaussian_vec(&mut rng, filters * fan_in, std));
                    params.push(vec![0.0; filters]);
                }
                LayerSpec::Dense { units } => {
                    let fan_in = prev.0;
                    let std = (2.0 / fan_in as f64).sqrt();
                    params.push(gaussian_vec(&mut rng, units * fan_in, std));
                    params.push(vec![0.0; units]);
                }
                _ => {}
            }
            prev = shape;
        }
        Ok(Model { spec, params })
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Gradient (or optimizer-state) buffers matching the parameter layout.
    pub fn zeroed_like_params(&self) -> Vec<Vec<f32>> {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }
}

fn gaussian_vec(rng: &mut rand_chacha::ChaCha8Rng, n: usize, std: f64) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            (g * std) as f32
        })
        .collect()
}
