//! The supervised sparse auto-encoder: tied per-concept latent parameters,
//! a linear decoder, analytic gradients, and the training loop.
//!
//! Two variants share the decoder `W2`:
//!
//! * decoder-only — the latent matrix Y is the tied expansion of compact
//!   parameters `Yc` (one d-vector per concept) and the loss is
//!   (1/n)·‖X − W2·σ(Y)‖²_F;
//! * masked encoder — a linear map `W1` produces latents from inputs,
//!   masked to the designed sparsity pattern, with loss
//!   (1/n)·‖X − W2·((W1·X) ⊙ M)‖²_F (no activation inside, as defined).
//!
//! Both losses are differentiated analytically; every reduction over
//! samples runs in ascending sample order so training is bit-reproducible
//! for a fixed seed.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::design::{build_mask, Mask, RealizationSet, SparseDesign};
use crate::error::Error;
use crate::numerics::{vec_norm, Matrix};

/// Element-wise activation applied to latents in the decoder-only variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Identity => x,
        }
    }

    /// Derivative; the ReLU subgradient at 0 is taken as 0 so that dead
    /// coordinates stay dead deterministically.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Which loss the training loop optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainVariant {
    DecoderOnly,
    MaskedEncoder,
}

/// Gradient update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam_default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Training hyperparameters. Everything is seeded; two runs with the same
/// config, model, and data produce bit-identical results.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub init_scale_w2: f64,
    pub init_scale_y: f64,
    pub seed: u64,
    pub variant: TrainVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: None,
            learning_rate: 1e-3,
            optimizer: Optimizer::adam_default(),
            init_scale_w2: 1.0,
            init_scale_y: 1.0,
            seed: 0,
            variant: TrainVariant::DecoderOnly,
        }
    }
}

impl TrainConfig {
    /// Validates fields that do not depend on the data.
    pub fn validate(&self) -> Result<(), Error> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("learning rate {} is not a finite nonnegative value", self.learning_rate),
            });
        }
        if self.init_scale_w2 <= 0.0 || !self.init_scale_w2.is_finite() {
            return Err(Error::InvalidConfig {
                reason: format!("init_scale_w2 must be positive, got {}", self.init_scale_w2),
            });
        }
        if self.init_scale_y <= 0.0 || !self.init_scale_y.is_finite() {
            // a nonpositive scale would zero or dead-block ReLU latents at init
            return Err(Error::InvalidConfig {
                reason: format!("init_scale_y must be positive, got {}", self.init_scale_y),
            });
        }
        if let Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } = self.optimizer
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !epsilon.is_finite() || epsilon <= 0.0
            {
                return Err(Error::InvalidConfig {
                    reason: format!(
                        "adam parameters out of range: beta1={beta1}, beta2={beta2}, epsilon={epsilon}"
                    ),
                });
            }
        }
        Ok(())
    }

    fn validate_for(&self, samples: usize) -> Result<(), Error> {
        self.validate()?;
        if let Some(b) = self.batch_size {
            if b == 0 || b > samples {
                return Err(Error::InvalidConfig {
                    reason: format!("batch size {b} must be in 1..={samples}"),
                });
            }
        }
        Ok(())
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Loss of the initial model, before any update.
    pub initial_loss: f64,
    /// Loss after each epoch; length equals the configured epoch count.
    pub epoch_losses: Vec<f64>,
    pub w2_norms: Vec<f64>,
    pub yc_norms: Vec<f64>,
    /// Present only for the masked-encoder variant.
    pub w1_norms: Vec<f64>,
    /// Final per-sample RMSE ‖xᵢ − x̂ᵢ‖₂/√N under the trained variant.
    pub per_sample_rmse: Vec<f64>,
}

/// Supervised sparse auto-encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaeModel {
    design: SparseDesign,
    n_embed: usize,
    w2: Matrix,              // N × dK
    yc: Matrix,              // d × K, column k is concept k's sub-vector
    activation: Activation,
    encoder: Option<Matrix>, // dK × N
}

impl SsaeModel {
    /// Assembles a model from explicit parts, checking shapes.
    pub fn from_parts(
        design: SparseDesign,
        n_embed: usize,
        w2: Matrix,
        yc: Matrix,
        activation: Activation,
        encoder: Option<Matrix>,
    ) -> Result<Self, Error> {
        let dk = design.latent_dim();
        if w2.shape() != (n_embed, dk) {
            return Err(Error::ShapeMismatch {
                op: "model decoder",
                left: w2.shape(),
                right: (n_embed, dk),
            });
        }
        if yc.shape() != (design.subspace_dim(), design.concepts()) {
            return Err(Error::ShapeMismatch {
                op: "model tied parameters",
                left: yc.shape(),
                right: (design.subspace_dim(), design.concepts()),
            });
        }
        if let Some(w1) = &encoder {
            if w1.shape() != (dk, n_embed) {
                return Err(Error::ShapeMismatch {
                    op: "model encoder",
                    left: w1.shape(),
                    right: (dk, n_embed),
                });
            }
        }
        Ok(SsaeModel {
            design,
            n_embed,
            w2,
            yc,
            activation,
            encoder,
        })
    }

    /// Seeded random initialization. Decoder entries are Gaussian with
    /// standard deviation `init_scale_w2 / sqrt(dK)`; tied parameters are
    /// uniform in `[0.5, 1.5] · init_scale_y`, strictly positive so no
    /// concept block starts dead under ReLU. The masked-encoder variant
    /// also draws `W1` with standard deviation `init_scale_w2 / sqrt(N)`.
    pub fn init(
        design: SparseDesign,
        n_embed: usize,
        activation: Activation,
        config: &TrainConfig,
    ) -> Result<Self, Error> {
        if n_embed == 0 {
            return Err(Error::InvalidConfig {
                reason: "embedding dimension N must be at least 1".into(),
            });
        }
        config.validate()?;
        let dk = design.latent_dim();
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let w2_sd = config.init_scale_w2 / libm::sqrt(dk as f64);
        let mut w2 = Matrix::zeros(n_embed, dk);
        for v in w2.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = z * w2_sd;
        }
        let mut yc = Matrix::zeros(design.subspace_dim(), design.concepts());
        for v in yc.data_mut() {
            *v = rng.random_range(0.5..1.5) * config.init_scale_y;
        }
        let encoder = match config.variant {
            TrainVariant::DecoderOnly => None,
            TrainVariant::MaskedEncoder => {
                let w1_sd = config.init_scale_w2 / libm::sqrt(n_embed as f64);
                let mut w1 = Matrix::zeros(dk, n_embed);
                for v in w1.data_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z * w1_sd;
                }
                Some(w1)
            }
        };
        Ok(SsaeModel {
            design,
            n_embed,
            w2,
            yc,
            activation,
            encoder,
        })
    }

    pub fn design(&self) -> SparseDesign {
        self.design
    }

    pub fn n_embed(&self) -> usize {
        self.n_embed
    }

    pub fn w2(&self) -> &Matrix {
        &self.w2
    }

    pub fn yc(&self) -> &Matrix {
        &self.yc
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn encoder(&self) -> Option<&Matrix> {
        self.encoder.as_ref()
    }

    /// Mutable parameter access, used by perturbation harnesses.
    pub fn w2_mut(&mut self) -> &mut Matrix {
        &mut self.w2
    }

    pub fn yc_mut(&mut self) -> &mut Matrix {
        &mut self.yc
    }

    pub fn encoder_mut(&mut self) -> Option<&mut Matrix> {
        self.encoder.as_mut()
    }

    /// Tied expansion of the compact parameters to the full dK×n latent
    /// matrix: row k·d+j of column i holds Yc[j,k] when k ∈ Sᵢ, else 0.
    pub fn expand_latent(&self, real: &RealizationSet) -> Result<Matrix, Error> {
        let d = self.design.subspace_dim();
        let mut y = Matrix::zeros(self.design.latent_dim(), real.len());
        for i in 0..real.len() {
            let col = y.column_mut(i);
            for &k in real.set(i) {
                if k >= self.design.concepts() {
                    return Err(Error::ConceptOutOfRange {
                        sample: Some(real.id(i).into()),
                        concept: k,
                        concepts: self.design.concepts(),
                    });
                }
                for j in 0..d {
                    col[k * d + j] = self.yc.get(j, k);
                }
            }
        }
        Ok(y)
    }

    /// Decoder forward pass `W2·σ(Y)` for an explicit latent matrix.
    pub fn reconstruct(&self, latent: &Matrix) -> Result<Matrix, Error> {
        if latent.rows() != self.design.latent_dim() {
            return Err(Error::ShapeMismatch {
                op: "reconstruct",
                left: self.w2.shape(),
                right: latent.shape(),
            });
        }
        let act = self.activation;
        self.w2.matmul(&latent.map(|v| act.apply(v)))
    }

    /// Mean squared reconstruction error of the decoder-only variant:
    /// (1/n)·‖X − W2·σ(Y)‖²_F with Y the tied expansion.
    pub fn loss(&self, x: &Matrix, real: &RealizationSet) -> Result<f64, Error> {
        self.check_data(x, real)?;
        let y = self.expand_latent(real)?;
        let recon = self.reconstruct(&y)?;
        Ok(x.sub(&recon)?.frobenius_sq() / real.len() as f64)
    }

    /// Analytic gradients of [`SsaeModel::loss`] with respect to the
    /// decoder and the tied parameters. With R = X − W2·σ(Y):
    ///
    /// * gW2 = −(2/n)·R·σ(Y)ᵀ
    /// * gYc[j,k] = −(2/n)·σ′(Yc[j,k])·Σ_{i: k∈Sᵢ} (W2ᵀR)[k·d+j, i]
    ///
    /// The tied gradient sums over every sample containing the concept,
    /// in ascending sample order.
    pub fn gradients(&self, x: &Matrix, real: &RealizationSet) -> Result<(Matrix, Matrix), Error> {
        self.check_data(x, real)?;
        let all: Vec<usize> = (0..real.len()).collect();
        self.decoder_gradients_over(x, real, &all)
    }

    /// Masked-encoder forward pass `(W1·X) ⊙ M`.
    pub fn encoder_forward(&self, x: &Matrix, mask: &Mask) -> Result<Matrix, Error> {
        let w1 = self.encoder.as_ref().ok_or(Error::EncoderMissing)?;
        let latent = w1.matmul(x)?;
        latent.hadamard(mask.matrix())
    }

    /// Loss of the masked-encoder variant:
    /// (1/n)·‖X − W2·((W1·X) ⊙ M)‖²_F. No activation is applied inside.
    pub fn masked_loss(&self, x: &Matrix, mask: &Mask) -> Result<f64, Error> {
        let h = self.encoder_forward(x, mask)?;
        let recon = self.w2.matmul(&h)?;
        Ok(x.sub(&recon)?.frobenius_sq() / x.cols() as f64)
    }

    /// Analytic gradients of [`SsaeModel::masked_loss`]. With
    /// H = (W1·X) ⊙ M and R = X − W2·H:
    ///
    /// * gW2 = −(2/n)·R·Hᵀ
    /// * gW1 = −(2/n)·((W2ᵀR) ⊙ M)·Xᵀ
    pub fn encoder_gradients(&self, x: &Matrix, mask: &Mask) -> Result<(Matrix, Matrix), Error> {
        let all: Vec<usize> = (0..x.cols()).collect();
        self.encoder_gradients_over(x, mask, &all)
    }

    /// Trains the model in place of the given variant and returns it with
    /// a per-epoch report. Mini-batches are drawn from a seeded shuffle;
    /// gradients inside a batch always accumulate in ascending sample
    /// order, so `batch_size = n` reproduces full-batch training exactly.
    pub fn train(
        mut self,
        x: &Matrix,
        real: &RealizationSet,
        config: &TrainConfig,
    ) -> Result<(SsaeModel, TrainReport), Error> {
        let n = real.len();
        config.validate_for(n)?;
        self.check_data(x, real)?;
        let mask = match config.variant {
            TrainVariant::MaskedEncoder => {
                if self.encoder.is_none() {
                    return Err(Error::EncoderMissing);
                }
                Some(build_mask(&self.design, real)?)
            }
            TrainVariant::DecoderOnly => None,
        };
        let batch = config.batch_size.unwrap_or(n);
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut w2_state = OptimizerState::new(self.w2.data().len());
        let other_len = match config.variant {
            TrainVariant::DecoderOnly => self.yc.data().len(),
            TrainVariant::MaskedEncoder => self.encoder.as_ref().unwrap().data().len(),
        };
        let mut other_state = OptimizerState::new(other_len);

        let initial_loss = self.variant_loss(x, real, mask.as_ref(), config.variant)?;
        let mut report = TrainReport {
            initial_loss,
            epoch_losses: Vec::with_capacity(config.epochs),
            w2_norms: Vec::with_capacity(config.epochs),
            yc_norms: Vec::with_capacity(config.epochs),
            w1_norms: Vec::new(),
            per_sample_rmse: Vec::new(),
        };

        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..config.epochs {
            let batches: Vec<Vec<usize>> = if batch == n {
                vec![order.clone()]
            } else {
                order.shuffle(&mut rng);
                order
                    .chunks(batch)
                    .map(|c| {
                        let mut b = c.to_vec();
                        b.sort_unstable();
                        b
                    })
                    .collect()
            };
            for (step, batch_idx) in batches.iter().enumerate() {
                match config.variant {
                    TrainVariant::DecoderOnly => {
                        let (gw2, gyc) = self.decoder_gradients_over(x, real, batch_idx)?;
                        apply_update(
                            config.optimizer,
                            config.learning_rate,
                            &mut w2_state,
                            self.w2.data_mut(),
                            gw2.data(),
                        );
                        apply_update(
                            config.optimizer,
                            config.learning_rate,
                            &mut other_state,
                            self.yc.data_mut(),
                            gyc.data(),
                        );
                    }
                    TrainVariant::MaskedEncoder => {
                        let (gw2, gw1) =
                            self.encoder_gradients_over(x, mask.as_ref().unwrap(), batch_idx)?;
                        apply_update(
                            config.optimizer,
                            config.learning_rate,
                            &mut w2_state,
                            self.w2.data_mut(),
                            gw2.data(),
                        );
                        apply_update(
                            config.optimizer,
                            config.learning_rate,
                            &mut other_state,
                            self.encoder.as_mut().unwrap().data_mut(),
                            gw1.data(),
                        );
                    }
                }
                if !self.params_finite() {
                    return Err(Error::NonFiniteTraining { epoch, step });
                }
            }
            let loss = self.variant_loss(x, real, mask.as_ref(), config.variant)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteTraining {
                    epoch,
                    step: batches.len().saturating_sub(1),
                });
            }
            report.epoch_losses.push(loss);
            report.w2_norms.push(self.w2.frobenius_norm());
            report.yc_norms.push(self.yc.frobenius_norm());
            if let Some(w1) = &self.encoder {
                if config.variant == TrainVariant::MaskedEncoder {
                    report.w1_norms.push(w1.frobenius_norm());
                }
            }
        }

        let recon = match config.variant {
            TrainVariant::DecoderOnly => {
                let y = self.expand_latent(real)?;
                self.reconstruct(&y)?
            }
            TrainVariant::MaskedEncoder => {
                let h = self.encoder_forward(x, mask.as_ref().unwrap())?;
                self.w2.matmul(&h)?
            }
        };
        let sqrt_n_embed = libm::sqrt(self.n_embed as f64);
        for i in 0..n {
            let diff: Vec<f64> = x
                .column(i)
                .iter()
                .zip(recon.column(i))
                .map(|(a, b)| a - b)
                .collect();
            report.per_sample_rmse.push(vec_norm(&diff) / sqrt_n_embed);
        }
        Ok((self, report))
    }

    fn check_data(&self, x: &Matrix, real: &RealizationSet) -> Result<(), Error> {
        if x.rows() != self.n_embed || x.cols() != real.len() {
            return Err(Error::ShapeMismatch {
                op: "data matrix",
                left: x.shape(),
                right: (self.n_embed, real.len()),
            });
        }
        Ok(())
    }

    fn params_finite(&self) -> bool {
        self.w2.all_finite()
            && self.yc.all_finite()
            && self.encoder.as_ref().is_none_or(Matrix::all_finite)
    }

    fn variant_loss(
        &self,
        x: &Matrix,
        real: &RealizationSet,
        mask: Option<&Mask>,
        variant: TrainVariant,
    ) -> Result<f64, Error> {
        match variant {
            TrainVariant::DecoderOnly => self.loss(x, real),
            TrainVariant::MaskedEncoder => self.masked_loss(x, mask.expect("mask built")),
        }
    }

    /// σ(Y) restricted to the given samples (columns in `idx` order).
    fn activated_latent_over(&self, real: &RealizationSet, idx: &[usize]) -> Matrix {
        let d = self.design.subspace_dim();
        let act = self.activation;
        let mut s = Matrix::zeros(self.design.latent_dim(), idx.len());
        for (b, &i) in idx.iter().enumerate() {
            let col = s.column_mut(b);
            for &k in real.set(i) {
                for j in 0..d {
                    col[k * d + j] = act.apply(self.yc.get(j, k));
                }
            }
        }
        s
    }

    fn decoder_gradients_over(
        &self,
        x: &Matrix,
        real: &RealizationSet,
        idx: &[usize],
    ) -> Result<(Matrix, Matrix), Error> {
        let nb = idx.len();
        let scale = -2.0 / nb as f64;
        let d = self.design.subspace_dim();
        let s = self.activated_latent_over(real, idx);
        let xb = x.gather_columns(idx);
        let r = xb.sub(&self.w2.matmul(&s)?)?;
        let gw2 = r.matmul(&s.transpose())?.scaled(scale);
        let t = self.w2.transpose().matmul(&r)?;
        let mut gyc = Matrix::zeros(d, self.design.concepts());
        for k in 0..self.design.concepts() {
            for j in 0..d {
                let deriv = self.activation.derivative(self.yc.get(j, k));
                let row = k * d + j;
                let mut acc = 0.0;
                for (b, &i) in idx.iter().enumerate() {
                    if real.contains(i, k) {
                        acc += t.get(row, b);
                    }
                }
                gyc.set(j, k, scale * deriv * acc);
            }
        }
        Ok((gw2, gyc))
    }

    fn encoder_gradients_over(
        &self,
        x: &Matrix,
        mask: &Mask,
        idx: &[usize],
    ) -> Result<(Matrix, Matrix), Error> {
        let w1 = self.encoder.as_ref().ok_or(Error::EncoderMissing)?;
        let nb = idx.len();
        let scale = -2.0 / nb as f64;
        let xb = x.gather_columns(idx);
        let mb = mask.matrix().gather_columns(idx);
        let h = w1.matmul(&xb)?.hadamard(&mb)?;
        let r = xb.sub(&self.w2.matmul(&h)?)?;
        let gw2 = r.matmul(&h.transpose())?.scaled(scale);
        let gw1 = self
            .w2
            .transpose()
            .matmul(&r)?
            .hadamard(&mb)?
            .matmul(&xb.transpose())?
            .scaled(scale);
        Ok((gw2, gw1))
    }
}

/// First/second-moment buffers for Adam; unused by plain SGD.
struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    beta1_t: f64,
    beta2_t: f64,
}

impl OptimizerState {
    fn new(len: usize) -> Self {
        OptimizerState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            beta1_t: 1.0,
            beta2_t: 1.0,
        }
    }
}

fn apply_update(
    optimizer: Optimizer,
    lr: f64,
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
) {
    debug_assert_eq!(params.len(), grads.len());
    match optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam {
            beta1,
            beta2,
            epsilon,
        } => {
            state.beta1_t *= beta1;
            state.beta2_t *= beta2;
            let bc1 = 1.0 - state.beta1_t;
            let bc2 = 1.0 - state.beta2_t;
            for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
            }
        }
    }
}
