use super::backward::Gradients;
use crate::compressor::CompressorModel;
use crate::error::{mismatch, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first: Gradients,
    second: Gradients,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(m: &CompressorModel) -> Self {
        Self {
            first: Gradients::zeros_like(m),
            second: Gradients::zeros_like(m),
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.first
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.second
    }
}

/// One Adam update of every parameter tensor.
pub fn adam_step(model: &mut CompressorModel, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if state.first.codebook.shape() != model.codebook().shape()
        || grads.codebook.shape() != model.codebook().shape()
        || grads.encoder_weights.shape() != model.encoder_weights().shape()
    {
        return Err(mismatch(
            "adam_step",
            format!("model d={}, b={}", model.dim(), model.bits()),
            "optimizer state or gradients of another shape",
        ));
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let bias1 = 1.0 - b1.powf(t);
    let bias2 = 1.0 - b2.powf(t);

    let params = model.tensors_mut();
    let firsts = state.first.tensors_mut();
    let seconds = state.second.tensors_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads.tensors()).zip(firsts).zip(seconds) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
