//! The encoder-decoder compressor.
//!
//! The encoder maps an embedding `e` of dimension `d` through
//! `hidden = tanh(A·e + b₁)` (width `b`) and `y = softplus(A₂·hidden + b₂)`
//! (width `2b`). The logits are read in consecutive pairs
//! `(y[2k], y[2k+1])`, and each pair goes through a two-way
//! Gumbel-softmax at temperature `τ`. The decoder is linear: the
//! reconstruction is `C·z` for a `d × 2b` codebook `C`, so a hard code
//! selects one codebook column per pair and sums them.
//!
//! At inference the Gumbel noise is zero and bit `k` is `z[2k] ≥ 0.5`.

use crate::code::BinaryCode;
use crate::error::{mismatch, Error, Result};
use crate::rng::Rng;
use crate::tensor::{logistic, Matrix, ScalarMap, Vector};

/// Learned parameters of the compressor.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressorModel {
    dim: usize,
    bits: usize,
    pub(crate) encoder_weights: Matrix,
    pub(crate) encoder_bias: Vector,
    pub(crate) logit_weights: Matrix,
    pub(crate) logit_bias: Vector,
    pub(crate) codebook: Matrix,
    tau: f64,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "temperature must be positive and finite, got {tau}"
        )))
    }
}

impl CompressorModel {
    /// Assembles a model from its parameter tensors, checking every shape
    /// against `(dim, bits)`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dim: usize,
        bits: usize,
        encoder_weights: Matrix,
        encoder_bias: Vector,
        logit_weights: Matrix,
        logit_bias: Vector,
        codebook: Matrix,
        tau: f64,
    ) -> Result<Self> {
        if dim == 0 || bits == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimension ({dim}) and bits ({bits}) must be positive"
            )));
        }
        check_tau(tau)?;
        let expect = [
            ("encoder weights", encoder_weights.shape(), (bits, dim)),
            ("encoder bias", (encoder_bias.len(), 1), (bits, 1)),
            ("logit weights", logit_weights.shape(), (2 * bits, bits)),
            ("logit bias", (logit_bias.len(), 1), (2 * bits, 1)),
            ("codebook", codebook.shape(), (dim, 2 * bits)),
        ];
        for (what, got, want) in expect {
            if got != want {
                return Err(Error::DimensionMismatch {
                    op: "CompressorModel::new",
                    left: format!("{what} expected {}x{}", want.0, want.1),
                    right: format!("{}x{}", got.0, got.1),
                });
            }
        }
        Ok(Self {
            dim,
            bits,
            encoder_weights,
            encoder_bias,
            logit_weights,
            logit_bias,
            codebook,
            tau,
        })
    }

    /// A model with every parameter zero.
    pub fn zeros(dim: usize, bits: usize, tau: f64) -> Result<Self> {
        Self::new(
            dim,
            bits,
            Matrix::zeros(bits, dim),
            Vector::zeros(bits),
            Matrix::zeros(2 * bits, bits),
            Vector::zeros(2 * bits),
            Matrix::zeros(dim, 2 * bits),
            tau,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn set_tau(&mut self, tau: f64) -> Result<()> {
        check_tau(tau)?;
        self.tau = tau;
        Ok(())
    }

    pub fn encoder_weights(&self) -> &Matrix {
        &self.encoder_weights
    }

    pub fn encoder_bias(&self) -> &Vector {
        &self.encoder_bias
    }

    pub fn logit_weights(&self) -> &Matrix {
        &self.logit_weights
    }

    pub fn logit_bias(&self) -> &Vector {
        &self.logit_bias
    }

    pub fn codebook(&self) -> &Matrix {
        &self.codebook
    }

    /// Parameter count across all tensors.
    pub fn num_params(&self) -> usize {
        self.bits * self.dim + self.bits + 2 * self.bits * self.bits + 2 * self.bits + 2 * self.bits * self.dim
    }

    /// All parameters concatenated in the order encoder weights, encoder
    /// bias, logit weights, logit bias, codebook (each row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn from_flat(dim: usize, bits: usize, tau: f64, flat: &[f64]) -> Result<Self> {
        let mut model = Self::zeros(dim, bits, tau)?;
        if flat.len() != model.num_params() {
            return Err(mismatch(
                "CompressorModel::from_flat",
                format!("{} parameters", model.num_params()),
                format!("{} values", flat.len()),
            ));
        }
        if let Some(bad) = flat.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("model parameter {bad}")));
        }
        let mut rest = flat;
        for t in model.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(model)
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

    pub(crate) fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Deterministic hash code of one embedding.
    pub fn encode_code(&self, e: &Vector) -> Result<BinaryCode> {
        Ok(binarize(&encode(self, e, None)?.assignments))
    }

    /// Decoder output for a hard code.
    pub fn reconstruct_code(&self, code: &BinaryCode) -> Result<Vector> {
        decode(self, &expand_code(code))
    }
}

/// Pairwise soft assignments `(z₁ᵏ, z₂ᵏ)`, stored flat as the decoder
/// input `(z₁¹, z₂¹, z₁², z₂², …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAssignments {
    values: Vector,
}

impl SoftAssignments {
    /// Wraps a flat vector of pairs; each pair must lie in `[0, 1]` and sum
    /// to one within `1e-9`.
    pub fn new(values: Vector) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "odd assignment length {}",
                values.len()
            )));
        }
        for (k, p) in values.as_slice().chunks_exact(2).enumerate() {
            let ok = (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]) && (p[0] + p[1] - 1.0).abs() <= 1e-9;
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "pair {k} = ({}, {}) is not a distribution",
                    p[0], p[1]
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn num_pairs(&self) -> usize {
        self.values.len() / 2
    }

    pub fn pair(&self, k: usize) -> (f64, f64) {
        (self.values[2 * k], self.values[2 * k + 1])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.as_slice().chunks_exact(2).map(|p| (p[0], p[1]))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.values
    }
}

/// Everything computed during one forward pass, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vector,
    pub hidden_pre: Vector,
    pub hidden: Vector,
    pub logit_pre: Vector,
    pub logits: Vector,
    pub noise: Vector,
    pub tau: f64,
    pub assignments: SoftAssignments,
    pub reconstruction: Vector,
}

impl ForwardTrace {
    /// Squared reconstruction error of this pass.
    pub fn loss(&self) -> f64 {
        self.input
            .as_slice()
            .iter()
            .zip(self.reconstruction.as_slice())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Both encoder layers: returns the hidden activation and the `2b` logits.
pub fn encode_logits(m: &CompressorModel, e: &Vector) -> Result<(Vector, Vector)> {
    let (_, hidden, _, logits) = encoder_layers(m, e)?;
    Ok((hidden, logits))
}

fn encoder_layers(m: &CompressorModel, e: &Vector) -> Result<(Vector, Vector, Vector, Vector)> {
    if e.len() != m.dim {
        return Err(mismatch(
            "encode",
            format!("model dimension {}", m.dim),
            format!("input of length {}", e.len()),
        ));
    }
    let hidden_pre = m.encoder_weights.matvec(e)?.add(&m.encoder_bias)?;
    let hidden = hidden_pre.map(ScalarMap::Tanh);
    let logit_pre = m.logit_weights.matvec(&hidden)?.add(&m.logit_bias)?;
    let logits = logit_pre.map(ScalarMap::Softplus);
    Ok((hidden_pre, hidden, logit_pre, logits))
}

/// Maps a uniform sample `u ∈ (0,1)` to a standard Gumbel sample
/// `−ln(−ln u)`.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Draws `count` standard Gumbel samples.
pub fn sample_gumbel(rng: &mut Rng, count: usize) -> Vector {
    Vector::from_raw((0..count).map(|_| gumbel_from_uniform(rng.uniform())).collect())
}

/// Temperature-scaled two-way softmax over each logit pair with additive
/// noise, evaluated as a logistic of the scaled difference.
pub fn gumbel_softmax(logits: &Vector, tau: f64, noise: &Vector) -> Result<SoftAssignments> {
    check_tau(tau)?;
    if logits.len() != noise.len() || !logits.len().is_multiple_of(2) {
        return Err(mismatch(
            "gumbel_softmax",
            format!("{} logits", logits.len()),
            format!("{} noise values", noise.len()),
        ));
    }
    let y = logits.as_slice();
    let g = noise.as_slice();
    let mut z = Vec::with_capacity(y.len());
    for k in 0..y.len() / 2 {
        let s = ((y[2 * k] + g[2 * k]) - (y[2 * k + 1] + g[2 * k + 1])) / tau;
        z.push(logistic(s));
        z.push(logistic(-s));
    }
    Ok(SoftAssignments {
        values: Vector::from_raw(z),
    })
}

/// Full forward pass. With `rng = None` the Gumbel noise is exactly zero.
pub fn encode(m: &CompressorModel, e: &Vector, rng: Option<&mut Rng>) -> Result<ForwardTrace> {
    let noise = match rng {
        Some(rng) => sample_gumbel(rng, 2 * m.bits),
        None => Vector::zeros(2 * m.bits),
    };
    encode_with_noise(m, e, noise)
}

/// Forward pass with caller-supplied noise of length `2b`.
pub fn encode_with_noise(m: &CompressorModel, e: &Vector, noise: Vector) -> Result<ForwardTrace> {
    let (hidden_pre, hidden, logit_pre, logits) = encoder_layers(m, e)?;
    let assignments = gumbel_softmax(&logits, m.tau, &noise)?;
    let reconstruction = decode(m, assignments.as_vector())?;
    Ok(ForwardTrace {
        input: e.clone(),
        hidden_pre,
        hidden,
        logit_pre,
        logits,
        noise,
        tau: m.tau,
        assignments,
        reconstruction,
    })
}

/// Thresholds the first component of every pair at 0.5 (ties give 1).
pub fn binarize(z: &SoftAssignments) -> BinaryCode {
    let bits: Vec<bool> = z.pairs().map(|(z1, _)| z1 >= 0.5).collect();
    BinaryCode::from_bits(&bits)
}

/// Decoder: `C · x` for a `2b`-vector `x`.
pub fn decode(m: &CompressorModel, x: &Vector) -> Result<Vector> {
    if x.len() != 2 * m.bits {
        return Err(mismatch(
            "decode",
            format!("{} bottleneck values", 2 * m.bits),
            format!("input of length {}", x.len()),
        ));
    }
    m.codebook.matvec(x)
}

/// One-hot-per-pair expansion: bit 1 ↦ `(1, 0)`, bit 0 ↦ `(0, 1)`.
pub fn expand_code(c: &BinaryCode) -> Vector {
    let mut v = Vec::with_capacity(2 * c.nbits());
    for k in 0..c.nbits() {
        if c.get(k) {
            v.extend([1.0, 0.0]);
        } else {
            v.extend([0.0, 1.0]);
        }
    }
    Vector::from_raw(v)
}
