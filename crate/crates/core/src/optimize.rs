//! Adam-based inverse rendering: fit registered scene parameters so the
//! render matches a target image.

use std::time::Instant;

use crate::engine::{render_with_gradients, GradConfig};
use crate::render::ImageBuffer;
use crate::rng::hash_stream;
use crate::scene::{GradientVector, Scene, SceneError};

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Rescale the moment estimates by 1/(1-beta^t). Off by default: the
    /// uncorrected update is well-behaved here and avoids the large first
    /// steps the correction produces on noisy gradients.
    pub bias_correction: bool,
    pub iterations: u32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            bias_correction: false,
            iterations: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u32,
}

impl AdamState {
    pub fn new(dim: usize) -> AdamState {
        AdamState { m: vec![0.0; dim], v: vec![0.0; dim], step: 0 }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grad: &GradientVector,
    cfg: &AdamConfig,
) {
    assert_eq!(params.len(), grad.values.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let (mut m_scale, mut v_scale) = (1.0, 1.0);
    if cfg.bias_correction {
        m_scale = 1.0 / (1.0 - cfg.beta1.powi(state.step as i32));
        v_scale = 1.0 / (1.0 - cfg.beta2.powi(state.step as i32));
    }
    for i in 0..params.len() {
        let g = grad.values[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] * m_scale;
        let v_hat = state.v[i] * v_scale;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One optimization step's outcome, for logging.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub iter: u32,
    pub loss: f64,
    pub params: Vec<f64>,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct OptimizeResult {
    pub params: Vec<f64>,
    pub final_loss: f64,
    pub trajectory: Vec<TrajectoryRecord>,
}

/// Run Adam against `target`. The input scene is not mutated; each
/// iteration renders with a fresh deterministic seed derived from the base
/// seed so gradient noise is independent across steps. Aborts with an error
/// if a gradient turns non-finite.
pub fn optimize(
    scene: &Scene,
    target: &ImageBuffer,
    grad_cfg: &GradConfig,
    adam_cfg: &AdamConfig,
    mut on_record: impl FnMut(&TrajectoryRecord),
) -> Result<OptimizeResult, SceneError> {
    let mut params = scene.read_parameters();
    let mut state = AdamState::new(params.len());
    let mut trajectory = Vec::with_capacity(adam_cfg.iterations as usize);
    let start = Instant::now();
    let mut final_loss = f64::NAN;

    for iter in 0..adam_cfg.iterations {
        let current = scene.apply_parameters(&params)?;
        let mut cfg = grad_cfg.clone();
        cfg.render.seed = hash_stream(&[grad_cfg.render.seed, iter as u64]);
        let result = render_with_gradients(&current, target, &cfg);
        if !result.gradient.all_finite() {
            return Err(SceneError::Validation(format!(
                "non-finite gradient at iteration {iter}"
            )));
        }
        adam_step(&mut state, &mut params, &result.gradient, adam_cfg);
        final_loss = result.loss;
        let record = TrajectoryRecord {
            iter,
            loss: result.loss,
            params: params.clone(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        on_record(&record);
        trajectory.push(record);
    }

    Ok(OptimizeResult { params, final_loss, trajectory })
}
