//! Analytic gradient of the squared reconstruction error.
//!
//! With `r = e′ − e` and the recorded noise held fixed:
//!
//! ```text
//! ∂L/∂e′ = 2r
//! ∂L/∂C  = 2r · zᵀ
//! ∂L/∂z  = Cᵀ · 2r
//! ∂L/∂s  = z₁ z₂ (∂z₁ − ∂z₂)            per pair, s = (y₁ + g₁ − y₂ − g₂)/τ
//! ∂L/∂y₁ = ∂L/∂s / τ,  ∂L/∂y₂ = −∂L/∂y₁
//! ```
//!
//! and then through softplus (derivative: the logistic function) and tanh
//! (derivative `1 − tanh²`).

use crate::compressor::{CompressorModel, ForwardTrace};
use crate::error::{mismatch, Result};
use crate::tensor::{logistic, Matrix, Vector};

/// Gradient tensors mirroring the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub encoder_weights: Matrix,
    pub encoder_bias: Vector,
    pub logit_weights: Matrix,
    pub logit_bias: Vector,
    pub codebook: Matrix,
}

impl Gradients {
    pub fn zeros_like(m: &CompressorModel) -> Self {
        let (d, b) = (m.dim(), m.bits());
        Self {
            encoder_weights: Matrix::zeros(b, d),
            encoder_bias: Vector::zeros(b),
            logit_weights: Matrix::zeros(2 * b, b),
            logit_bias: Vector::zeros(2 * b),
            codebook: Matrix::zeros(d, 2 * b),
        }
    }

    /// Flattened in the same order as [`CompressorModel::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 5] {
        [
            self.encoder_weights.as_slice(),
            self.encoder_bias.as_slice(),
            self.logit_weights.as_slice(),
            self.logit_bias.as_slice(),
            self.codebook.as_slice(),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.encoder_weights.as_mut_slice(),
            self.encoder_bias.as_mut_slice(),
            self.logit_weights.as_mut_slice(),
            self.logit_bias.as_mut_slice(),
            self.codebook.as_mut_slice(),
        ]
    }

    pub(crate) fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&x| x == 0.0))
    }
}

/// Gradient of the single-example loss `‖e − e′‖²` recorded in `trace`.
pub fn backward(m: &CompressorModel, trace: &ForwardTrace) -> Result<Gradients> {
    let mut grads = Gradients::zeros_like(m);
    accumulate(m, trace, &mut grads)?;
    Ok(grads)
}

/// Adds the gradient for `trace` into `grads`.
pub(crate) fn accumulate(m: &CompressorModel, trace: &ForwardTrace, grads: &mut Gradients) -> Result<()> {
    let (d, b) = (m.dim(), m.bits());
    let shapes_ok = trace.input.len() == d
        && trace.reconstruction.len() == d
        && trace.hidden.len() == b
        && trace.hidden_pre.len() == b
        && trace.logits.len() == 2 * b
        && trace.logit_pre.len() == 2 * b
        && trace.assignments.num_pairs() == b;
    if !shapes_ok {
        return Err(mismatch(
            "backward",
            format!("model d={d}, b={b}"),
            format!(
                "trace with input {} and {} pairs",
                trace.input.len(),
                trace.assignments.num_pairs()
            ),
        ));
    }

    let residual: Vec<f64> = trace
        .reconstruction
        .as_slice()
        .iter()
        .zip(trace.input.as_slice())
        .map(|(r, e)| 2.0 * (r - e))
        .collect();
    let d_recon = Vector::from_raw(residual);
    let z = trace.assignments.as_vector();

    grads.codebook.add_outer(&d_recon, z);
    let dz = m.codebook.matvec_transposed(&d_recon)?;

    let mut d_logit_pre = vec![0.0; 2 * b];
    for k in 0..b {
        let (z1, z2) = trace.assignments.pair(k);
        let ds = z1 * z2 * (dz[2 * k] - dz[2 * k + 1]) / trace.tau;
        d_logit_pre[2 * k] = ds * logistic(trace.logit_pre[2 * k]);
        d_logit_pre[2 * k + 1] = -ds * logistic(trace.logit_pre[2 * k + 1]);
    }
    let d_logit_pre = Vector::from_raw(d_logit_pre);

    grads.logit_weights.add_outer(&d_logit_pre, &trace.hidden);
    add_into(grads.logit_bias.as_mut_slice(), d_logit_pre.as_slice());

    let d_hidden = m.logit_weights.matvec_transposed(&d_logit_pre)?;
    let d_hidden_pre = Vector::from_raw(
        d_hidden
            .as_slice()
            .iter()
            .zip(trace.hidden.as_slice())
            .map(|(g, h)| g * (1.0 - h * h))
            .collect(),
    );
    grads.encoder_weights.add_outer(&d_hidden_pre, &trace.input);
    add_into(grads.encoder_bias.as_mut_slice(), d_hidden_pre.as_slice());
    Ok(())
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}
