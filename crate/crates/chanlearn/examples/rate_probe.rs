// temporary perf probe
use chanlearn::nn::*;
use chanlearn::seed;
use rand::Rng;
use std::time::Instant;

fn main() {
    let spec = ModelSpec::image_cnn();
    let mut model = Model::init(spec, 1).unwrap();
    let mut rng = seed::rng_from(2);
    let n = 1024;
    let data: Vec<f32> = (0..n * 784).map(|_| rng.gen::<f32>()).collect();
    let labels: Vec<u8> = (0..n).map(|_| rng.gen_range(0..10)).collect();
    let inputs = Tensor::from_vec([n, 1, 28, 28], data).unwrap();

    let t0 = Instant::now();
    let cfg = TrainConfig { epochs: 1, batch_size: 128, seed: 3, ..Default::default() };
    train(&mut model, &inputs, &labels, &cfg, None).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("train 1024 samples (8 steps): {dt:.2}s -> {:.2} ms/sample", dt * 1000.0 / n as f64);
    println!("desk D1 (50k passes): {:.1} min", dt / n as f64 * 50_000.0 / 60.0);
    println!("desk D1+D2+D3 (825k passes): {:.1} min", dt / n as f64 * 825_000.0 / 60.0);

    let t0 = Instant::now();
    let _ = evaluate(&model, &inputs, &labels).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    println!("eval 1024 samples: {dt:.2}s -> 10k eval: {:.1}s, full matrix 36 evals of 10k: {:.1} min",
        dt / n as f64 * 10_000.0, dt / n as f64 * 10_000.0 * 36.0 / 60.0);
}
