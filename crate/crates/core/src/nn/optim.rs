use super::model::Params;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for one flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state length mismatch");
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Adam over every tensor of a [`Params`].
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: &Params, cfg: AdamConfig) -> Self {
        let states = params.named().iter().map(|(_, t)| AdamState::new(t.as_slice().len())).collect();
        Self { cfg, states }
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        let grads = grads.named();
        for ((p, (_, g)), s) in params.tensors_mut().into_iter().zip(grads).zip(&mut self.states) {
            adam_step(p.as_mut_slice(), g.as_slice(), s, &self.cfg);
        }
    }
}
