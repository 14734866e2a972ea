//! Fitting the compressor by minimizing squared reconstruction error with
//! mini-batch Adam.
//!
//! Training stops once the mean epoch loss has varied by less than
//! `delta_tolerance` (max minus min) over the trailing `patience_window`
//! epochs, or when `max_epochs` is reached.

mod adam;
mod backward;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use backward::{backward, Gradients};

use crate::compressor::{encode, CompressorModel};
use crate::embedding::EmbeddingSet;
use crate::error::{mismatch, Error, Result};
use crate::rng::Rng;
use crate::tensor::{Matrix, Vector};

/// Optimizer and stopping-rule settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Examples per Adam step. Values at or above the dataset size give
    /// full-batch training.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience_window: usize,
    pub delta_tolerance: f64,
    pub tau: f64,
    /// When set, τ moves linearly from `tau` to this value over the first
    /// half of `max_epochs` and then stays there.
    pub tau_final: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 64,
            max_epochs: 1000,
            patience_window: 100,
            delta_tolerance: 1e-5,
            tau: 1.0,
            tau_final: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.patience_window == 0 {
            return bad("patience window must be at least 1".into());
        }
        if self.delta_tolerance.is_nan() || self.delta_tolerance <= 0.0 {
            return bad(format!(
                "delta tolerance must be positive, got {}",
                self.delta_tolerance
            ));
        }
        for tau in std::iter::once(self.tau).chain(self.tau_final) {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("temperature must be positive, got {tau}"));
            }
        }
        Ok(())
    }

    /// Temperature used during `epoch` (0-based).
    pub fn tau_at(&self, epoch: usize) -> f64 {
        match self.tau_final {
            None => self.tau,
            Some(target) => {
                let half = (self.max_epochs / 2).max(1);
                let frac = (epoch as f64 / half as f64).min(1.0);
                self.tau + (target - self.tau) * frac
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxEpochs => "max_epochs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    /// Mean (noised) training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub stop_reason: StopReason,
    pub epochs_run: usize,
    /// Mean deterministic (zero-noise) reconstruction loss over the
    /// training data after the last epoch.
    pub final_loss: f64,
}

/// Squared Euclidean distance `Σⱼ (eⱼ − e′ⱼ)²`.
pub fn reconstruction_loss(e: &Vector, e_prime: &Vector) -> Result<f64> {
    if e.len() != e_prime.len() {
        return Err(mismatch("reconstruction_loss", e.len(), e_prime.len()));
    }
    Ok(e.as_slice()
        .iter()
        .zip(e_prime.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Random initialization.
///
/// Encoder weights are uniform in `±1/√fan_in` with zero biases. Each of
/// the `2b` codebook columns is a randomly chosen training embedding
/// scaled by `1/(x·b)`, with `x` uniform in `[1, 2]` drawn per column, so a
/// fresh reconstruction has roughly the norm of an input.
pub fn init_model(dim: usize, bits: usize, sample: &EmbeddingSet, rng: &mut Rng) -> Result<CompressorModel> {
    if sample.is_empty() {
        return Err(Error::Empty("training sample for codebook initialization"));
    }
    if sample.dim() != dim {
        return Err(mismatch(
            "init_model",
            format!("dimension {dim}"),
            format!("sample dimension {}", sample.dim()),
        ));
    }
    if bits == 0 {
        return Err(Error::InvalidArgument("bits must be at least 1".into()));
    }
    let uniform_matrix = |rows: usize, cols: usize, rng: &mut Rng| {
        let bound = 1.0 / (cols as f64).sqrt();
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform_range(-bound, bound)).collect(),
        )
    };
    let encoder_weights = uniform_matrix(bits, dim, rng)?;
    let logit_weights = uniform_matrix(2 * bits, bits, rng)?;

    let mut codebook = Matrix::zeros(dim, 2 * bits);
    for col in 0..2 * bits {
        let row = sample.row(rng.below(sample.len()));
        let x = rng.uniform_range(1.0, 2.0);
        let scale = 1.0 / (x * bits as f64);
        for (r, &v) in row.iter().enumerate() {
            codebook.set(r, col, v * scale)?;
        }
    }
    CompressorModel::new(
        dim,
        bits,
        encoder_weights,
        Vector::zeros(bits),
        logit_weights,
        Vector::zeros(2 * bits),
        codebook,
        1.0,
    )
}

/// Mean deterministic reconstruction loss of `model` over `data`.
pub fn mean_loss(model: &CompressorModel, data: &EmbeddingSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation data"));
    }
    let mut total = 0.0;
    for i in 0..data.len() {
        total += encode(model, &data.vector(i), None)?.loss();
    }
    Ok(total / data.len() as f64)
}

/// Trains a fresh `bits`-bit compressor on `data`.
pub fn train(
    data: &EmbeddingSet,
    dim: usize,
    bits: usize,
    cfg: &TrainConfig,
) -> Result<(CompressorModel, TrainHistory)> {
    train_with_progress(data, dim, bits, cfg, |_, _| {})
}

/// Like [`train`], calling `progress(epoch, mean_loss)` after every epoch.
pub fn train_with_progress(
    data: &EmbeddingSet,
    dim: usize,
    bits: usize,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<(CompressorModel, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if dim == 0 || bits == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimension ({dim}) and bits ({bits}) must be positive"
        )));
    }
    if data.dim() != dim {
        return Err(mismatch(
            "train",
            format!("dimension {dim}"),
            format!("data dimension {}", data.dim()),
        ));
    }

    let mut rng = Rng::new(cfg.seed);
    let mut model = init_model(dim, bits, data, &mut rng)?;
    let mut state = AdamState::new(&model);
    let mut grads = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let inputs: Vec<Vector> = (0..data.len()).map(|i| data.vector(i)).collect();

    let mut epoch_losses = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 0..cfg.max_epochs {
        model.set_tau(cfg.tau_at(epoch))?;
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            for &i in batch {
                let trace = encode(&model, &inputs[i], Some(&mut rng))?;
                total += trace.loss();
                backward::accumulate(&model, &trace, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(&mut model, &grads, &mut state, cfg.learning_rate)?;
        }
        let epoch_loss = total / data.len() as f64;
        if !epoch_loss.is_finite() || !model.all_finite() {
            return Err(Error::NonFinite(format!(
                "training loss diverged at epoch {epoch} ({epoch_loss})"
            )));
        }
        epoch_losses.push(epoch_loss);
        progress(epoch, epoch_loss);

        if epoch_losses.len() >= cfg.patience_window {
            let window = &epoch_losses[epoch_losses.len() - cfg.patience_window..];
            let hi = window.iter().copied().fold(f64::MIN, f64::max);
            let lo = window.iter().copied().fold(f64::MAX, f64::min);
            if hi - lo < cfg.delta_tolerance {
                stop_reason = StopReason::Converged;
                break;
            }
        }
    }

    let final_loss = mean_loss(&model, data)?;
    let epochs_run = epoch_losses.len();
    Ok((
        model,
        TrainHistory {
            epoch_losses,
            stop_reason,
            epochs_run,
            final_loss,
        },
    ))
}
