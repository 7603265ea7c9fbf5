//! Adam with bias correction.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[Vec<f32>]) -> AdamState {
        let zeros: Vec<Vec<f32>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, step: 0 }
    }
}

/// One Adam update. Bias-correction factors are computed in f64; the
/// element updates are f32 and fully deterministic.
pub fn adam_step(
    params: &mut [Vec<f32>],
    grads: &[Vec<f32>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - (cfg.beta1 as f64).powi(t);
    let bc2 = 1.0 - (cfg.beta2 as f64).powi(t);
    let m_scale = (1.0 / bc1) as f32;
    let v_scale = (1.0 / bc2) as f32;
    for ((p, g), (m, v)) in
        params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] * m_scale;
            let v_hat = v[i] * v_scale;
            p[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut params = vec![vec![0.3f32, -0.7, 1.5]];
        let grads = vec![vec![0.0f32; 3]];
        let mut state = AdamState::new(&params);
        let before = params.clone();
        for _ in 0..10 {
            adam_step(&mut params, &grads, &mut state, &AdamConfig::default());
        }
        assert_eq!(params, before);
    }

    #[test]
    fn constant_gradient_update_magnitude_approaches_lr() {
        // With g constant, m_hat -> g and v_hat -> g^2, so |update| -> lr.
        let cfg = AdamConfig::default();
        let mut params = vec![vec![0.0f32]];
        let grads = vec![vec![0.37f32]];
        let mut state = AdamState::new(&params);
        let mut prev = 0.0f32;
        for _ in 0..2000 {
            prev = params[0][0];
            adam_step(&mut params, &grads, &mut state, &cfg);
        }
        let update = (params[0][0] - prev).abs();
        assert!((update - cfg.lr).abs() < 1e-5, "update {update} should approach lr {}", cfg.lr);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // From zero state: m = (1-b1) g, v = (1-b2) g^2; with bias correction
        // m_hat = g, v_hat = g^2, so p -= lr * g / (|g| + eps).
        let cfg = AdamConfig { lr: 0.5, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut params = vec![vec![1.0f32, -2.0]];
        let grads = vec![vec![0.25f32, -4.0]];
        let mut state = AdamState::new(&params);
        adam_step(&mut params, &grads, &mut state, &cfg);
        let expect0 = 1.0 - 0.5 * (0.25 / (0.25 + 1e-8));
        let expect1 = -2.0 - 0.5 * (-4.0 / (4.0 + 1e-8));
        assert!((params[0][0] - expect0 as f32).abs() < 1e-12);
        assert!((params[0][1] - expect1 as f32).abs() < 1e-12);
        assert_eq!(state.step, 1);
    }
}
