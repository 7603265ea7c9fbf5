//! Training and evaluation loops.
//!
//! Batches split into fixed 8-sample chunks that run in parallel; each chunk
//! accumulates gradients sequentially and the chunk results reduce in chunk
//! order, so results are bitwise independent of the thread count.

use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::layers::{backward_sample, forward_sample, Workspace};
use super::model::{Model, ModelError};
use super::tensor::Tensor;
use crate::seed;
use rand::seq::SliceRandom;

/// Fixed chunk width for within-batch parallelism. Part of the numeric
/// contract: changing it changes gradient summation order.
const CHUNK: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("batch size must be >= 1")]
    BadBatchSize,
    #[error("learning rate must be positive")]
    BadLearningRate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 128,
            epochs: 5,
            seed: 0,
            shuffle: true,
        }
    }
}

/// Accuracy plus the full confusion matrix (rows: true class, cols: predicted).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub confusion: Vec<Vec<u32>>,
}

/// Per-epoch training history and the final held-out evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub epoch_loss: Vec<f64>,
    pub epoch_val_accuracy: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub final_eval: Option<EvalReport>,
}

impl Metrics {
    /// CSV rendering: `epoch,loss,val_accuracy` with an empty accuracy column
    /// when no validation set was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,val_accuracy\n");
        for (e, loss) in self.epoch_loss.iter().enumerate() {
            let acc = self
                .epoch_val_accuracy
                .get(e)
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default();
            out.push_str(&format!("{},{loss:.8},{acc}\n", e + 1));
        }
        out
    }
}

fn check_batch(model: &Model, inputs: &Tensor, labels: &[u8]) -> Result<(), ModelError> {
    let want = model.spec.input;
    let got = (inputs.shape[1], inputs.shape[2], inputs.shape[3]);
    if want != got {
        return Err(ModelError::ShapeMismatch {
            what: "input sample shape",
            expected: want.0 * want.1 * want.2,
            got: got.0 * got.1 * got.2,
        });
    }
    if inputs.batch() != labels.len() {
        return Err(ModelError::ShapeMismatch {
            what: "label count",
            expected: inputs.batch(),
            got: labels.len(),
        });
    }
    let classes = model.spec.n_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
        return Err(ModelError::LabelOutOfRange { label: bad, classes });
    }
    Ok(())
}

/// Class probabilities for a batch, row per sample. Deterministic and
/// parallel over fixed chunks.
pub fn forward(model: &Model, inputs: &Tensor) -> Result<Vec<f32>, ModelError> {
    let n = inputs.batch();
    let classes = model.spec.n_classes();
    let sample_len = inputs.sample_len();
    let want = model.spec.input;
    if sample_len != want.0 * want.1 * want.2 {
        return Err(ModelError::ShapeMismatch {
            what: "input sample shape",
            expected: want.0 * want.1 * want.2,
            got: sample_len,
        });
    }
    let chunks: Vec<Vec<f32>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut ws = Workspace::new(&model.spec).expect("validated spec");
            let mut probs = Vec::with_capacity(idx.len() * classes);
            for &i in idx {
                forward_sample(model, inputs.sample(i), &mut ws);
                probs.extend_from_slice(ws.acts.last().unwrap());
            }
            probs
        })
        .collect();
    inputs.check_finite()?;
    let flat: Vec<f32> = chunks.into_iter().flatten().collect();
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite { index: i });
    }
    Ok(flat)
}

/// Mean cross-entropy and parameter gradients for one batch.
pub fn loss_and_gradients(
    model: &Model,
    inputs: &Tensor,
    labels: &[u8],
) -> Result<(f64, Vec<Vec<f32>>), TrainError> {
    check_batch(model, inputs, labels)?;
    // ReLU and max-pooling silently absorb NaN, so non-finite inputs must be
    // caught here to abort with diagnostics instead of training on garbage.
    inputs.check_finite()?;
    let n = labels.len();
    if n == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let indices: Vec<usize> = (0..n).collect();
    let partials: Vec<(f64, Vec<Vec<f32>>)> = indices
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut ws = Workspace::new(&model.spec).expect("validated spec");
            let mut grads = model.zeroed_like_params();
            let mut loss_sum = 0.0f64;
            for &i in idx {
                forward_sample(model, inputs.sample(i), &mut ws);
                loss_sum +=
                    backward_sample(model, inputs.sample(i), labels[i] as usize, &mut ws, &mut grads);
            }
            (loss_sum, grads)
        })
        .collect();

    let mut total = model.zeroed_like_params();
    let mut loss_sum = 0.0f64;
    for (chunk_loss, chunk_grads) in partials {
        loss_sum += chunk_loss;
        for (t, c) in total.iter_mut().zip(&chunk_grads) {
            for (tv, &cv) in t.iter_mut().zip(c) {
                *tv += cv;
            }
        }
    }
    let inv = 1.0 / n as f32;
    for t in &mut total {
        for v in t.iter_mut() {
            *v *= inv;
        }
    }
    Ok((loss_sum / n as f64, total))
}

/// Accuracy and confusion matrix; the model is not mutated.
pub fn evaluate(model: &Model, inputs: &Tensor, labels: &[u8]) -> Result<EvalReport, ModelError> {
    check_batch(model, inputs, labels)?;
    inputs.check_finite()?;
    let classes = model.spec.n_classes();
    let n = labels.len();
    let indices: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<Vec<u32>>> = indices
        .par_chunks(256)
        .map(|idx| {
            let mut ws = Workspace::new(&model.spec).expect("validated spec");
            let mut confusion = vec![vec![0u32; classes]; classes];
            for &i in idx {
                forward_sample(model, inputs.sample(i), &mut ws);
                let probs = ws.acts.last().unwrap();
                let pred = probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap();
                confusion[labels[i] as usize][pred] += 1;
            }
            confusion
        })
        .collect();

    let mut confusion = vec![vec![0u32; classes]; classes];
    for part in partials {
        for (row, prow) in confusion.iter_mut().zip(&part) {
            for (v, &pv) in row.iter_mut().zip(prow) {
                *v += pv;
            }
        }
    }
    let correct: u32 = (0..classes).map(|k| confusion[k][k]).sum();
    Ok(EvalReport {
        n,
        correct: correct as usize,
        accuracy: correct as f64 / n as f64,
        confusion,
    })
}

/// Adam training over shuffled mini-batches. Fully reproducible: a fixed
/// (seed, dataset, config) triple gives a bit-identical model and loss curve.
pub fn train(
    model: &mut Model,
    inputs: &Tensor,
    labels: &[u8],
    cfg: &TrainConfig,
    val: Option<(&Tensor, &[u8])>,
) -> Result<Metrics, TrainError> {
    check_batch(model, inputs, labels)?;
    if labels.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(TrainError::BadBatchSize);
    }
    if !(cfg.adam.lr > 0.0) {
        return Err(TrainError::BadLearningRate);
    }
    let n = labels.len();
    let sample_len = inputs.sample_len();
    let mut state = AdamState::new(&model.params);
    let mut metrics = Metrics {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        epoch_val_accuracy: Vec::new(),
        epoch_seconds: Vec::with_capacity(cfg.epochs),
        final_eval: None,
    };
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_inputs = Tensor::zeros(
        cfg.batch_size,
        model.spec.input.0,
        model.spec.input.1,
        model.spec.input.2,
    );
    let mut batch_labels = vec![0u8; cfg.batch_size];

    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        if cfg.shuffle {
            let mut rng = seed::rng_from(seed::derive(cfg.seed, &[seed::NS_SHUFFLE, epoch as u64]));
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0f64;
        let mut batches = 0usize;
        for (batch_no, batch_idx) in order.chunks(cfg.batch_size).enumerate() {
            let b = batch_idx.len();
            for (row, &src) in batch_idx.iter().enumerate() {
                batch_inputs.data[row * sample_len..(row + 1) * sample_len]
                    .copy_from_slice(inputs.sample(src));
                batch_labels[row] = labels[src];
            }
            batch_inputs.shape[0] = b;
            let view = Tensor {
                shape: [b, model.spec.input.0, model.spec.input.1, model.spec.input.2],
                data: batch_inputs.data[..b * sample_len].to_vec(),
            };
            let (loss, grads) = match loss_and_gradients(model, &view, &batch_labels[..b]) {
                Ok(pair) => pair,
                Err(TrainError::Model(ModelError::NonFinite { .. })) => {
                    return Err(TrainError::NanLoss { epoch, batch: batch_no })
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(TrainError::NanLoss { epoch, batch: batch_no });
            }
            adam_step(&mut model.params, &grads, &mut state, &cfg.adam);
            epoch_loss += loss;
            batches += 1;
        }
        metrics.epoch_loss.push(epoch_loss / batches as f64);
        metrics.epoch_seconds.push(t0.elapsed().as_secs_f64());
        if let Some((vx, vy)) = val {
            let report = evaluate(model, vx, vy)?;
            metrics.epoch_val_accuracy.push(report.accuracy);
            metrics.final_eval = Some(report);
        }
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model::{LayerSpec, ModelSpec};
    use crate::nn::reference;
    use rand::Rng;

    fn micro_spec(classes: usize) -> ModelSpec {
        ModelSpec {
            input: (1, 6, 6),
            layers: vec![
                LayerSpec::Conv { filters: 3, kh: 3, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 8 },
                LayerSpec::Relu,
                LayerSpec::Dense { units: classes },
                LayerSpec::Softmax,
            ],
        }
    }

    fn random_batch(spec: &ModelSpec, n: usize, seed: u64) -> (Tensor, Vec<u8>) {
        let mut rng = seed::rng_from(seed);
        let (c, h, w) = spec.input;
        let data: Vec<f32> = (0..n * c * h * w).map(|_| rng.gen::<f32>() - 0.5).collect();
        let labels: Vec<u8> =
            (0..n).map(|_| rng.gen_range(0..spec.n_classes() as u8)).collect();
        (Tensor::from_vec([n, c, h, w], data).unwrap(), labels)
    }

    /// Easily separable toy data: class k brightens one 3x3 quadrant of a
    /// 6x6 grid on top of low noise.
    fn prototype_batch(n: usize, classes: usize, seed: u64) -> (Tensor, Vec<u8>) {
        assert!(classes <= 4);
        let mut rng = seed::rng_from(seed);
        let mut data = Vec::with_capacity(n * 36);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.gen_range(0..classes as u8);
            let mut sample: Vec<f32> = (0..36).map(|_| rng.gen::<f32>() * 0.2).collect();
            let (r0, c0) = (3 * (k as usize / 2), 3 * (k as usize % 2));
            for dr in 0..3 {
                for dc in 0..3 {
                    sample[(r0 + dr) * 6 + c0 + dc] += 1.0;
                }
            }
            data.extend_from_slice(&sample);
            labels.push(k);
        }
        (Tensor::from_vec([n, 1, 6, 6], data).unwrap(), labels)
    }

    #[test]
    fn zeroed_output_layer_gives_uniform_probabilities() {
        let mut model = Model::init(micro_spec(10), 1).unwrap();
        let n_params = model.params.len();
        model.params[n_params - 2].fill(0.0);
        model.params[n_params - 1].fill(0.0);
        let (inputs, _) = random_batch(&model.spec, 4, 2);
        let probs = forward(&model, &inputs).unwrap();
        for p in probs {
            assert!((p - 0.1).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_matches_reference_implementation() {
        for trial in 0..10 {
            let model = Model::init(micro_spec(4), trial).unwrap();
            let (inputs, _) = random_batch(&model.spec, 2, 100 + trial);
            let fast = forward(&model, &inputs).unwrap();
            let params64 = reference::params_to_f64(&model);
            for s in 0..2 {
                let x64: Vec<f64> = inputs.sample(s).iter().map(|&v| v as f64).collect();
                let slow = reference::forward_probs(&model.spec, &params64, &x64);
                for (a, b) in fast[s * 4..(s + 1) * 4].iter().zip(&slow) {
                    assert!(
                        (*a as f64 - b).abs() < 1e-5,
                        "trial {trial} sample {s}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = Model::init(micro_spec(10), 3).unwrap();
        let (inputs, _) = random_batch(&model.spec, 16, 4);
        let probs = forward(&model, &inputs).unwrap();
        for row in probs.chunks(10) {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn uniform_prediction_loss_is_ln_10() {
        let mut model = Model::init(micro_spec(10), 5).unwrap();
        let n_params = model.params.len();
        model.params[n_params - 2].fill(0.0);
        model.params[n_params - 1].fill(0.0);
        let (inputs, labels) = random_batch(&model.spec, 8, 6);
        let (loss, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-6, "loss {loss}");
    }

    #[test]
    fn near_one_hot_predictions_give_near_zero_loss() {
        // Inject extreme logits through the final dense bias.
        let mut model = Model::init(micro_spec(4), 7).unwrap();
        let n_params = model.params.len();
        model.params[n_params - 2].fill(0.0);
        model.params[n_params - 1].copy_from_slice(&[50.0, -50.0, -50.0, -50.0]);
        let (inputs, _) = random_batch(&model.spec, 4, 8);
        let labels = vec![0u8; 4];
        let (loss, _) = loss_and_gradients(&model, &inputs, &labels).unwrap();
        assert!(loss < 1e-6, "loss {loss}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Central differences in f64 through the reference forward pass,
        // h = 1e-3, across micro-models covering every layer type.
        let mut worst: f64 = 0.0;
        for trial in 0..100u64 {
            let classes = 3 + (trial % 3) as usize;
            let spec = if trial % 2 == 0 {
                micro_spec(classes)
            } else {
                ModelSpec {
                    input: (2, 5, 5),
                    layers: vec![
                        LayerSpec::Conv { filters: 2, kh: 2, kw: 2 },
                        LayerSpec::Relu,
                        LayerSpec::Conv { filters: 3, kh: 3, kw: 3 },
                        LayerSpec::MaxPool2,
                        LayerSpec::Flatten,
                        LayerSpec::Dense { units: classes },
                        LayerSpec::Softmax,
                    ],
                }
            };
            let model = Model::init(spec, trial).unwrap();
            let (c, h, w) = model.spec.input;
            let mut rng = seed::rng_from(seed::derive(42, &[trial]));
            let n = 2usize;
            let data: Vec<f32> = (0..n * c * h * w).map(|_| rng.gen::<f32>() - 0.5).collect();
            let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..classes as u8)).collect();
            let inputs = Tensor::from_vec([n, c, h, w], data.clone()).unwrap();

            let (_, grads) = loss_and_gradients(&model, &inputs, &labels).unwrap();

            let mut params64 = reference::params_to_f64(&model);
            let inputs64: Vec<f64> = data.iter().map(|&v| v as f64).collect();
            let h_step = 1e-3;
            let mut checked = 0usize;
            let mut skipped = 0usize;
            // Check a deterministic subset of parameters per tensor to keep
            // the suite fast; every tensor is covered.
            for (ti, tensor) in grads.iter().enumerate() {
                let stride = (tensor.len() / 6).max(1);
                for pi in (0..tensor.len()).step_by(stride) {
                    let central = |params64: &mut Vec<Vec<f64>>, h: f64| {
                        let orig = params64[ti][pi];
                        params64[ti][pi] = orig + h;
                        let up = reference::loss(&model.spec, &params64, &inputs64, &labels);
                        params64[ti][pi] = orig - h;
                        let down = reference::loss(&model.spec, &params64, &inputs64, &labels);
                        params64[ti][pi] = orig;
                        (up - down) / (2.0 * h)
                    };
                    let fd = central(&mut params64, h_step);
                    let fd2 = central(&mut params64, h_step / 4.0);
                    // A ReLU or pooling kink inside the difference interval
                    // makes the central estimate step-size dependent; those
                    // points are not differentiable and are skipped.
                    if (fd - fd2).abs() > 1e-4 * fd.abs().max(1.0) {
                        skipped += 1;
                        continue;
                    }
                    checked += 1;
                    let analytic = tensor[pi] as f64;
                    let rel = (analytic - fd).abs() / (analytic.abs() + fd.abs()).max(1e-2);
                    worst = worst.max(rel);
                    assert!(
                        rel < 1e-3,
                        "trial {trial} tensor {ti} param {pi}: analytic {analytic} vs fd {fd} (rel {rel})"
                    );
                }
            }
            assert!(
                checked > 4 * skipped.max(1),
                "trial {trial}: too many kink skips ({skipped} of {})",
                checked + skipped
            );
        }
        // Keep a trace of how close the bound sits.
        eprintln!("worst relative gradient error: {worst:.2e}");
    }

    #[test]
    fn training_reduces_loss_and_fits_prototypes() {
        let (inputs, labels) = prototype_batch(256, 4, 11);
        let mut model = Model::init(micro_spec(4), 12).unwrap();
        let cfg = TrainConfig {
            adam: AdamConfig { lr: 3e-3, ..Default::default() },
            epochs: 30,
            batch_size: 32,
            seed: 13,
            ..Default::default()
        };
        let metrics = train(&mut model, &inputs, &labels, &cfg, None).unwrap();
        assert!(
            metrics.epoch_loss.last().unwrap() < &metrics.epoch_loss[0],
            "descent sanity: {:?}",
            metrics.epoch_loss
        );
        assert!(
            metrics.epoch_loss.last().unwrap() < &0.2,
            "loss curve {:?}",
            metrics.epoch_loss
        );
        let report = evaluate(&model, &inputs, &labels).unwrap();
        assert!(report.accuracy >= 0.95, "training accuracy {}", report.accuracy);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (inputs, labels) = prototype_batch(128, 4, 21);
        let cfg = TrainConfig { epochs: 3, batch_size: 16, seed: 5, ..Default::default() };
        let mut m1 = Model::init(micro_spec(4), 9).unwrap();
        let h1 = train(&mut m1, &inputs, &labels, &cfg, None).unwrap();
        let mut m2 = Model::init(micro_spec(4), 9).unwrap();
        let h2 = train(&mut m2, &inputs, &labels, &cfg, None).unwrap();
        assert_eq!(m1.params, m2.params);
        assert_eq!(h1.epoch_loss, h2.epoch_loss);
    }

    #[test]
    fn nan_input_aborts_with_batch_coordinates() {
        let (mut inputs, labels) = prototype_batch(64, 4, 31);
        inputs.data[40 * 36 + 3] = f32::NAN;
        let mut model = Model::init(micro_spec(4), 9).unwrap();
        let cfg = TrainConfig { epochs: 1, batch_size: 16, seed: 5, shuffle: false, ..Default::default() };
        let err = train(&mut model, &inputs, &labels, &cfg, None).unwrap_err();
        assert_eq!(err, TrainError::NanLoss { epoch: 0, batch: 2 });
    }

    #[test]
    fn evaluate_rigged_identity_model_scores_100_percent() {
        // Dense weights wired so logits equal a per-class indicator feature.
        let spec = ModelSpec {
            input: (1, 1, 4),
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 4 },
                LayerSpec::Softmax,
            ],
        };
        let mut model = Model::init(spec, 1).unwrap();
        model.params[0].fill(0.0);
        for k in 0..4 {
            model.params[0][k * 4 + k] = 10.0;
        }
        model.params[1].fill(0.0);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for s in 0..40 {
            let k = s % 4;
            let mut row = vec![0.0f32; 4];
            row[k] = 1.0;
            data.extend(row);
            labels.push(k as u8);
        }
        let inputs = Tensor::from_vec([40, 1, 1, 4], data).unwrap();
        let report = evaluate(&model, &inputs, &labels).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.correct, 40);
        // Row sums equal per-class counts.
        for row in &report.confusion {
            assert_eq!(row.iter().sum::<u32>(), 10);
        }
    }

    #[test]
    fn constant_predictor_scores_chance_on_balanced_data() {
        let spec = ModelSpec {
            input: (1, 1, 4),
            layers: vec![
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 10 },
                LayerSpec::Softmax,
            ],
        };
        let mut model = Model::init(spec, 1).unwrap();
        model.params[0].fill(0.0);
        model.params[1].fill(0.0);
        model.params[1][3] = 5.0; // always predicts class 3
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for s in 0..100 {
            data.extend(vec![s as f32; 4]);
            labels.push((s % 10) as u8);
        }
        let inputs = Tensor::from_vec([100, 1, 1, 4], data).unwrap();
        let report = evaluate(&model, &inputs, &labels).unwrap();
        assert!((report.accuracy - 0.10).abs() < 1e-12);
    }

    #[test]
    fn evaluate_is_permutation_invariant() {
        let (inputs, labels) = prototype_batch(120, 4, 41);
        let mut model = Model::init(micro_spec(4), 2).unwrap();
        let cfg = TrainConfig { epochs: 2, batch_size: 16, seed: 3, ..Default::default() };
        train(&mut model, &inputs, &labels, &cfg, None).unwrap();
        let base = evaluate(&model, &inputs, &labels).unwrap();

        let mut order: Vec<usize> = (0..120).collect();
        let mut rng = seed::rng_from(77);
        order.shuffle(&mut rng);
        let sample_len = inputs.sample_len();
        let mut data = Vec::with_capacity(inputs.data.len());
        let mut plabels = Vec::with_capacity(120);
        for &i in &order {
            data.extend_from_slice(inputs.sample(i));
            plabels.push(labels[i]);
        }
        let shuffled = Tensor::from_vec([120, 1, 6, 6], data).unwrap();
        assert_eq!(shuffled.sample_len(), sample_len);
        let perm = evaluate(&model, &shuffled, &plabels).unwrap();
        assert_eq!(base.accuracy, perm.accuracy);
        assert_eq!(base.confusion, perm.confusion);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let (inputs, mut labels) = prototype_batch(8, 4, 51);
        labels[3] = 9;
        let model = Model::init(micro_spec(4), 2).unwrap();
        let err = loss_and_gradients(&model, &inputs, &labels).unwrap_err();
        assert_eq!(err, TrainError::Model(ModelError::LabelOutOfRange { label: 9, classes: 4 }));
    }

    #[test]
    fn metrics_csv_has_one_row_per_epoch() {
        let metrics = Metrics {
            epoch_loss: vec![2.3, 1.1],
            epoch_val_accuracy: vec![0.5, 0.75],
            epoch_seconds: vec![0.1, 0.1],
            final_eval: None,
        };
        let csv = metrics.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "epoch,loss,val_accuracy");
        assert!(lines[1].starts_with("1,2.3"));
        assert!(lines[2].contains("0.75"));
    }
}
