//! Contiguous 32-bit tensors, at most 4-dimensional (batch, channels,
//! height, width).

use super::model::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    /// (n, c, h, w)
    pub shape: [usize; 4],
    /// Row-major contiguous values; length equals the shape product.
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(n: usize, c: usize, h: usize, w: usize) -> Tensor {
        Tensor { shape: [n, c, h, w], data: vec![0.0; n * c * h * w] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f32>) -> Result<Tensor, ModelError> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(ModelError::ShapeMismatch {
                what: "tensor data length",
                expected: numel,
                got: data.len(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Per-sample element count (c * h * w).
    pub fn sample_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    /// Borrow one sample's values.
    pub fn sample(&self, i: usize) -> &[f32] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    /// Errors on the first non-finite value, reporting its flat index.
    pub fn check_finite(&self) -> Result<(), ModelError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(ModelError::NonFinite { index: i }),
        }
    }
}
