//! Forward/backward kernels and the per-sample workspace.
//!
//! All kernels run on one sample; batch parallelism happens a level up. The
//! inner loops are written as contiguous-row AXPY/dot operations so the
//! autovectorizer can use the full SIMD width.

use super::model::{LayerSpec, Model, ModelError, ModelSpec};

/// Per-sample scratch: one activation buffer per layer, matching gradient
/// buffers, and argmax codes for the pooling layers.
pub(crate) struct Workspace {
    pub shapes: Vec<(usize, usize, usize)>,
    pub acts: Vec<Vec<f32>>,
    pub grads: Vec<Vec<f32>>,
    pub pool_idx: Vec<Vec<u8>>,
    /// Weight-tensor slot per layer (bias is slot + 1), None for
    /// parameterless layers.
    pub param_slot: Vec<Option<usize>>,
}

impl Workspace {
    pub fn new(spec: &ModelSpec) -> Result<Workspace, ModelError> {
        let shapes = spec.shapes()?;
        let mut acts = Vec::with_capacity(shapes.len());
        let mut pool_idx = Vec::with_capacity(shapes.len());
        let mut param_slot = Vec::with_capacity(shapes.len());
        let mut slot = 0usize;
        for (layer, &(c, h, w)) in spec.layers.iter().zip(&shapes) {
            acts.push(vec![0.0; c * h * w]);
            pool_idx.push(match layer {
                LayerSpec::MaxPool2 => vec![0u8; c * h * w],
                _ => Vec::new(),
            });
            param_slot.push(match layer {
                LayerSpec::Conv { .. } | LayerSpec::Dense { .. } => {
                    let s = slot;
                    slot += 2;
                    Some(s)
                }
                _ => None,
            });
        }
        let grads = acts.clone();
        Ok(Workspace { shapes, acts, grads, pool_idx, param_slot })
    }
}

/// Run one sample forward; class probabilities end up in the last activation
/// buffer.
pub(crate) fn forward_sample(model: &Model, x: &[f32], ws: &mut Workspace) {
    let mut prev_shape = model.spec.input;
    for (l, layer) in model.spec.layers.iter().enumerate() {
        let (inp, out) = if l == 0 {
            (x, &mut ws.acts[l])
        } else {
            let (before, after) = ws.acts.split_at_mut(l);
            (before[l - 1].as_slice(), &mut after[0])
        };
        match *layer {
            LayerSpec::Conv { filters, kh, kw } => {
                let slot = ws.param_slot[l].unwrap();
                conv_forward(
                    inp,
                    prev_shape,
                    &model.params[slot],
                    &model.params[slot + 1],
                    (filters, kh, kw),
                    out,
                );
            }
            LayerSpec::Relu => {
                for (o, &v) in out.iter_mut().zip(inp) {
                    *o = v.max(0.0);
                }
            }
            LayerSpec::MaxPool2 => {
                maxpool_forward(inp, prev_shape, out, &mut ws.pool_idx[l]);
            }
            LayerSpec::Flatten => out.copy_from_slice(inp),
            LayerSpec::Dense { units } => {
                let slot = ws.param_slot[l].unwrap();
                dense_forward(
                    inp,
                    &model.params[slot],
                    &model.params[slot + 1],
                    units,
                    prev_shape.0,
                    out,
                );
            }
            LayerSpec::Softmax => {
                out.copy_from_slice(inp);
                softmax_inplace(out);
            }
        }
        prev_shape = ws.shapes[l];
    }
}

/// Backpropagate one sample, accumulating parameter gradients of the
/// *sum* loss into `grad_store` (the caller divides by the batch size).
/// Returns the sample's cross-entropy loss.
pub(crate) fn backward_sample(
    model: &Model,
    x: &[f32],
    label: usize,
    ws: &mut Workspace,
    grad_store: &mut [Vec<f32>],
) -> f64 {
    let n_layers = model.spec.layers.len();
    let softmax_l = n_layers - 1;
    let logits_l = n_layers - 2;

    // Numerically stable cross-entropy from the logits.
    let logits = &ws.acts[logits_l];
    let zmax = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let sum_exp: f64 = logits.iter().map(|&z| ((z - zmax) as f64).exp()).sum();
    let loss = sum_exp.ln() - (logits[label] - zmax) as f64;

    // d(loss)/d(logits) = probs - onehot.
    let probs = ws.acts[softmax_l].clone();
    {
        let dlogits = &mut ws.grads[logits_l];
        dlogits.copy_from_slice(&probs);
        dlogits[label] -= 1.0;
    }

    let mut shapes_in = Vec::with_capacity(n_layers);
    let mut prev = model.spec.input;
    for &s in &ws.shapes {
        shapes_in.push(prev);
        prev = s;
    }

    for l in (0..=logits_l).rev() {
        let in_shape = shapes_in[l];
        let (grads_before, grads_after) = ws.grads.split_at_mut(l);
        let dout = &grads_after[0];
        let layer = model.spec.layers[l];
        // Gradient w.r.t. the first layer's input is never needed.
        let dinp: Option<&mut Vec<f32>> = if l == 0 { None } else { Some(&mut grads_before[l - 1]) };
        let inp: &[f32] = if l == 0 { x } else { &ws.acts[l - 1] };
        match layer {
            LayerSpec::Conv { filters, kh, kw } => {
                let slot = ws.param_slot[l].unwrap();
                if let Some(dinp) = dinp {
                    conv_backward_input(dout, &model.params[slot], in_shape, (filters, kh, kw), dinp);
                }
                let (dw, db) = weights_and_bias_mut(grad_store, slot);
                conv_backward_params(inp, dout, in_shape, (filters, kh, kw), dw, db);
            }
            LayerSpec::Relu => {
                if let Some(dinp) = dinp {
                    let act = &ws.acts[l];
                    for ((di, &a), &go) in dinp.iter_mut().zip(act).zip(dout) {
                        *di = if a > 0.0 { go } else { 0.0 };
                    }
                }
            }
            LayerSpec::MaxPool2 => {
                if let Some(dinp) = dinp {
                    maxpool_backward(dout, &ws.pool_idx[l], in_shape, dinp);
                }
            }
            LayerSpec::Flatten => {
                if let Some(dinp) = dinp {
                    dinp.copy_from_slice(dout);
                }
            }
            LayerSpec::Dense { units } => {
                let slot = ws.param_slot[l].unwrap();
                if let Some(dinp) = dinp {
                    dense_backward_input(dout, &model.params[slot], units, in_shape.0, dinp);
                }
                let (dw, db) = weights_and_bias_mut(grad_store, slot);
                dense_backward_params(inp, dout, units, in_shape.0, dw, db);
            }
            LayerSpec::Softmax => unreachable!("softmax handled by the loss"),
        }
    }
    loss
}

fn weights_and_bias_mut(store: &mut [Vec<f32>], slot: usize) -> (&mut [f32], &mut [f32]) {
    let (a, b) = store.split_at_mut(slot + 1);
    (&mut a[slot], &mut b[0])
}

pub(crate) fn conv_forward(
    inp: &[f32],
    (ic, ih, iw): (usize, usize, usize),
    w: &[f32],
    b: &[f32],
    (oc, kh, kw): (usize, usize, usize),
    out: &mut [f32],
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    for o in 0..oc {
        let out_ch = &mut out[o * oh * ow..(o + 1) * oh * ow];
        out_ch.fill(b[o]);
        for i in 0..ic {
            let in_ch = &inp[i * ih * iw..(i + 1) * ih * iw];
            let w_k = &w[(o * ic + i) * kh * kw..(o * ic + i + 1) * kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = w_k[ky * kw + kx];
                    for oy in 0..oh {
                        let in_row = &in_ch[(oy + ky) * iw + kx..(oy + ky) * iw + kx + ow];
                        let out_row = &mut out_ch[oy * ow..oy * ow + ow];
                        for (ov, &iv) in out_row.iter_mut().zip(in_row) {
                            *ov += wv * iv;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_backward_input(
    dout: &[f32],
    w: &[f32],
    (ic, ih, iw): (usize, usize, usize),
    (oc, kh, kw): (usize, usize, usize),
    dinp: &mut [f32],
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    dinp.fill(0.0);
    for o in 0..oc {
        let dout_ch = &dout[o * oh * ow..(o + 1) * oh * ow];
        for i in 0..ic {
            let din_ch = &mut dinp[i * ih * iw..(i + 1) * ih * iw];
            let w_k = &w[(o * ic + i) * kh * kw..(o * ic + i + 1) * kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = w_k[ky * kw + kx];
                    for oy in 0..oh {
                        let dout_row = &dout_ch[oy * ow..oy * ow + ow];
                        let din_row = &mut din_ch[(oy + ky) * iw + kx..(oy + ky) * iw + kx + ow];
                        for (dv, &go) in din_row.iter_mut().zip(dout_row) {
                            *dv += wv * go;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv_backward_params(
    inp: &[f32],
    dout: &[f32],
    (ic, ih, iw): (usize, usize, usize),
    (oc, kh, kw): (usize, usize, usize),
    dw: &mut [f32],
    db: &mut [f32],
) {
    let oh = ih - kh + 1;
    let ow = iw - kw + 1;
    for o in 0..oc {
        let dout_ch = &dout[o * oh * ow..(o + 1) * oh * ow];
        db[o] += dout_ch.iter().sum::<f32>();
        for i in 0..ic {
            let in_ch = &inp[i * ih * iw..(i + 1) * ih * iw];
            let dw_k = &mut dw[(o * ic + i) * kh * kw..(o * ic + i + 1) * kh * kw];
            for ky in 0..kh {
                for kx in 0..kw {
                    let mut acc = 0.0f32;
                    for oy in 0..oh {
                        let in_row = &in_ch[(oy + ky) * iw + kx..(oy + ky) * iw + kx + ow];
                        let dout_row = &dout_ch[oy * ow..oy * ow + ow];
                        for (&iv, &go) in in_row.iter().zip(dout_row) {
                            acc += iv * go;
                        }
                    }
                    dw_k[ky * kw + kx] += acc;
                }
            }
        }
    }
}

pub(crate) fn maxpool_forward(
    inp: &[f32],
    (c, ih, iw): (usize, usize, usize),
    out: &mut [f32],
    idx: &mut [u8],
) {
    let oh = ih / 2;
    let ow = iw / 2;
    for ch in 0..c {
        let in_ch = &inp[ch * ih * iw..(ch + 1) * ih * iw];
        let base = ch * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let r0 = 2 * oy * iw + 2 * ox;
                let r1 = r0 + iw;
                let candidates = [in_ch[r0], in_ch[r0 + 1], in_ch[r1], in_ch[r1 + 1]];
                let mut best = 0usize;
                for k in 1..4 {
                    if candidates[k] > candidates[best] {
                        best = k;
                    }
                }
                out[base + oy * ow + ox] = candidates[best];
                idx[base + oy * ow + ox] = best as u8;
            }
        }
    }
}

pub(crate) fn maxpool_backward(
    dout: &[f32],
    idx: &[u8],
    (c, ih, iw): (usize, usize, usize),
    dinp: &mut [f32],
) {
    let oh = ih / 2;
    let ow = iw / 2;
    dinp.fill(0.0);
    for ch in 0..c {
        let din_ch = &mut dinp[ch * ih * iw..(ch + 1) * ih * iw];
        let base = ch * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let k = idx[base + oy * ow + ox] as usize;
                let (dy, dx) = (k / 2, k % 2);
                din_ch[(2 * oy + dy) * iw + 2 * ox + dx] += dout[base + oy * ow + ox];
            }
        }
    }
}

pub(crate) fn dense_forward(
    inp: &[f32],
    w: &[f32],
    b: &[f32],
    units: usize,
    in_features: usize,
    out: &mut [f32],
) {
    for u in 0..units {
        let row = &w[u * in_features..(u + 1) * in_features];
        let mut acc = 0.0f32;
        for (&wv, &iv) in row.iter().zip(inp) {
            acc += wv * iv;
        }
        out[u] = acc + b[u];
    }
}

pub(crate) fn dense_backward_input(
    dout: &[f32],
    w: &[f32],
    units: usize,
    in_features: usize,
    dinp: &mut [f32],
) {
    dinp.fill(0.0);
    for u in 0..units {
        let go = dout[u];
        if go == 0.0 {
            continue;
        }
        let row = &w[u * in_features..(u + 1) * in_features];
        for (dv, &wv) in dinp.iter_mut().zip(row) {
            *dv += go * wv;
        }
    }
}

pub(crate) fn dense_backward_params(
    inp: &[f32],
    dout: &[f32],
    units: usize,
    in_features: usize,
    dw: &mut [f32],
    db: &mut [f32],
) {
    for u in 0..units {
        let go = dout[u];
        db[u] += go;
        if go == 0.0 {
            continue;
        }
        let dw_row = &mut dw[u * in_features..(u + 1) * in_features];
        for (dv, &iv) in dw_row.iter_mut().zip(inp) {
            *dv += go * iv;
        }
    }
}

pub(crate) fn softmax_inplace(v: &mut [f32]) {
    let max = v.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_filter_gives_zero_feature_map() {
        let inp: Vec<f32> = (0..36).map(|i| i as f32).collect();
        let w = vec![0.0; 9];
        let b = vec![0.0];
        let mut out = vec![1.0; 16];
        conv_forward(&inp, (1, 6, 6), &w, &b, (1, 3, 3), &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_identity_kernel_crops_input() {
        // 1x1 kernel with weight 1 reproduces the input.
        let inp: Vec<f32> = (0..9).map(|i| i as f32).collect();
        let mut out = vec![0.0; 9];
        conv_forward(&inp, (1, 3, 3), &[1.0], &[0.0], (1, 1, 1), &mut out);
        assert_eq!(out, inp);
    }

    #[test]
    fn maxpool_truncates_odd_edges_and_tracks_argmax() {
        // 3x3 input pools to 1x1, ignoring the last row/column.
        let inp = vec![1.0, 5.0, 9.0, 2.0, 3.0, 9.0, 9.0, 9.0, 9.0];
        let mut out = vec![0.0];
        let mut idx = vec![0u8];
        maxpool_forward(&inp, (1, 3, 3), &mut out, &mut idx);
        assert_eq!(out[0], 5.0);
        assert_eq!(idx[0], 1);

        let mut dinp = vec![0.0; 9];
        maxpool_backward(&[2.0], &idx, (1, 3, 3), &mut dinp);
        assert_eq!(dinp[1], 2.0);
        assert_eq!(dinp.iter().sum::<f32>(), 2.0);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut v = vec![0.0f32; 10];
        softmax_inplace(&mut v);
        for p in v {
            assert!((p - 0.1).abs() < 1e-7);
        }
    }

    #[test]
    fn dense_matches_hand_computation() {
        let inp = [1.0, 2.0];
        let w = [0.5, -1.0, 2.0, 0.25];
        let b = [0.1, -0.2];
        let mut out = [0.0; 2];
        dense_forward(&inp, &w, &b, 2, 2, &mut out);
        assert!((out[0] - (0.5 - 2.0 + 0.1)).abs() < 1e-7);
        assert!((out[1] - (2.0 + 0.5 - 0.2)).abs() < 1e-7);
    }
}
