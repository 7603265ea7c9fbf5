//! Slow scalar reference forward pass in f64.
//!
//! Used by the verification suites: forward outputs are checked against this
//! implementation, and gradient checks difference the [`loss`] function. The
//! code here deliberately shares nothing with the optimized kernels — plain
//! nested loops, f64 throughout.

use super::model::{LayerSpec, Model, ModelSpec};

/// Model parameters widened to f64 for differencing.
pub fn params_to_f64(model: &Model) -> Vec<Vec<f64>> {
    model.params.iter().map(|t| t.iter().map(|&v| v as f64).collect()).collect()
}

/// Forward one sample, returning class probabilities.
pub fn forward_probs(spec: &ModelSpec, params: &[Vec<f64>], input: &[f64]) -> Vec<f64> {
    let mut cur: Vec<f64> = input.to_vec();
    let mut shape = spec.input;
    let mut slot = 0usize;
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Conv { filters, kh, kw } => {
                let (ic, ih, iw) = shape;
                let (oh, ow) = (ih - kh + 1, iw - kw + 1);
                let w = &params[slot];
                let b = &params[slot + 1];
                slot += 2;
                let mut out = vec![0.0f64; filters * oh * ow];
                for o in 0..filters {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = b[o];
                            for i in 0..ic {
                                for ky in 0..kh {
                                    for kx in 0..kw {
                                        acc += w[((o * ic + i) * kh + ky) * kw + kx]
                                            * cur[(i * ih + oy + ky) * iw + ox + kx];
                                    }
                                }
                            }
                            out[(o * oh + oy) * ow + ox] = acc;
                        }
                    }
                }
                cur = out;
                shape = (filters, oh, ow);
            }
            LayerSpec::Relu => {
                for v in &mut cur {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            LayerSpec::MaxPool2 => {
                let (c, ih, iw) = shape;
                let (oh, ow) = (ih / 2, iw / 2);
                let mut out = vec![0.0f64; c * oh * ow];
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = f64::NEG_INFINITY;
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    let v = cur[(ch * ih + 2 * oy + dy) * iw + 2 * ox + dx];
                                    if v > best {
                                        best = v;
                                    }
                                }
                            }
                            out[(ch * oh + oy) * ow + ox] = best;
                        }
                    }
                }
                cur = out;
                shape = (c, oh, ow);
            }
            LayerSpec::Flatten => {
                shape = (shape.0 * shape.1 * shape.2, 1, 1);
            }
            LayerSpec::Dense { units } => {
                let in_features = shape.0;
                let w = &params[slot];
                let b = &params[slot + 1];
                slot += 2;
                let mut out = vec![0.0f64; units];
                for (u, o) in out.iter_mut().enumerate() {
                    let mut acc = b[u];
                    for (i, &x) in cur.iter().enumerate() {
                        acc += w[u * in_features + i] * x;
                    }
                    *o = acc;
                }
                cur = out;
                shape = (units, 1, 1);
            }
            LayerSpec::Softmax => {
                let max = cur.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in &mut cur {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in &mut cur {
                    *v /= sum;
                }
            }
        }
    }
    cur
}

/// Mean cross-entropy of a batch under the reference forward pass.
pub fn loss(spec: &ModelSpec, params: &[Vec<f64>], inputs: &[f64], labels: &[u8]) -> f64 {
    let sample_len = spec.input.0 * spec.input.1 * spec.input.2;
    let n = labels.len();
    let mut total = 0.0;
    for (s, &label) in labels.iter().enumerate() {
        let probs = forward_probs(spec, params, &inputs[s * sample_len..(s + 1) * sample_len]);
        total -= probs[label as usize].max(1e-300).ln();
    }
    total / n as f64
}
