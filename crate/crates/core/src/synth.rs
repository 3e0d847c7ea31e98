//! Synthetic ground-truth world: additive concept embeddings with optional
//! Gaussian noise, realization-set sampling with enforced holdout pairs,
//! and recovery scoring against the known truth.
//!
//! Each concept k owns a unit-norm vector v*_k in embedding space and a
//! sample with concept set S is Σ_{k∈S} v*_k plus noise — exactly the
//! function class an additive decoder can represent, which makes recovery
//! thresholds meaningful.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::compose::LatentCode;
use crate::design::{RealizationSet, SparseDesign};
use crate::diagnostics::relative_error;
use crate::error::Error;
use crate::model::{Activation, SsaeModel};
use crate::numerics::{dependent_rows, vec_norm, Matrix};

/// Parameters of the synthetic world.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Embedding dimension N.
    pub n_embed: usize,
    /// Concept count K.
    pub concepts: usize,
    /// Latent sub-vector dimension d.
    pub subspace_dim: usize,
    /// Sample count n.
    pub samples: usize,
    pub noise_sigma: f64,
    pub min_concepts: usize,
    pub max_concepts: usize,
    /// Pairs that must never co-occur in a sample.
    pub holdout_pairs: Vec<(usize, usize)>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n_embed == 0 || self.concepts == 0 || self.subspace_dim == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "all dimensions must be positive: N={}, K={}, d={}, n={}",
                    self.n_embed, self.concepts, self.subspace_dim, self.samples
                ),
            });
        }
        if self.max_concepts > self.concepts || self.min_concepts > self.max_concepts {
            return Err(Error::InvalidConfig {
                reason: format!(
                    "concept-per-sample range {}..={} invalid for K={}",
                    self.min_concepts, self.max_concepts, self.concepts
                ),
            });
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig {
                reason: format!("noise sigma {} must be finite and nonnegative", self.noise_sigma),
            });
        }
        for &(a, b) in &self.holdout_pairs {
            if a == b || a >= self.concepts || b >= self.concepts {
                return Err(Error::InvalidConfig {
                    reason: format!("holdout pair ({a}, {b}) invalid for K={}", self.concepts),
                });
            }
        }
        Ok(())
    }

    pub fn design(&self) -> Result<SparseDesign, Error> {
        SparseDesign::new(self.subspace_dim, self.concepts)
    }
}

/// A generated world: data, realizations, and the truth that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    /// N×n data matrix.
    pub x: Matrix,
    pub real: RealizationSet,
    /// N×K ground-truth concept vectors, unit ℓ₂ columns.
    pub truth: Matrix,
    pub spec: SynthSpec,
}

const RANK_ATTEMPTS: usize = 100;
const SET_ATTEMPTS: usize = 1000;

/// Generates a dataset deterministically from the configured seed. The
/// membership matrix is guaranteed full row rank, regenerating the
/// realization sets up to 100 times before giving up.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset, Error> {
    spec.validate()?;
    let design = spec.design()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);

    let mut truth = Matrix::zeros(spec.n_embed, spec.concepts);
    for k in 0..spec.concepts {
        let col = truth.column_mut(k);
        loop {
            for v in col.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = vec_norm(col);
            if norm > 0.0 {
                for v in col.iter_mut() {
                    *v /= norm;
                }
                break;
            }
        }
    }

    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut full_rank = false;
    for _ in 0..RANK_ATTEMPTS {
        sets.clear();
        for _ in 0..spec.samples {
            sets.push(sample_concept_set(spec, &mut rng)?);
        }
        let ids = (0..spec.samples).map(|i| format!("sample-{i:04}")).collect();
        let real = RealizationSet::new(ids, sets.clone(), spec.concepts)?;
        let b = crate::design::membership_matrix(&design, &real)?;
        if dependent_rows(&b)?.is_empty() {
            full_rank = true;
            sets = real.sets().to_vec();
            break;
        }
    }
    if !full_rank {
        return Err(Error::RankGenerationFailed {
            attempts: RANK_ATTEMPTS,
        });
    }
    let ids: Vec<String> = (0..spec.samples).map(|i| format!("sample-{i:04}")).collect();
    let real = RealizationSet::new(ids, sets, spec.concepts)?;

    let mut x = Matrix::zeros(spec.n_embed, spec.samples);
    for i in 0..spec.samples {
        let col = x.column_mut(i);
        for &k in real.set(i) {
            for (c, t) in col.iter_mut().zip(truth.column(k)) {
                *c += t;
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        for v in x.data_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.noise_sigma * z;
        }
    }
    Ok(SynthDataset {
        x,
        real,
        truth,
        spec: spec.clone(),
    })
}

fn sample_concept_set(spec: &SynthSpec, rng: &mut ChaCha12Rng) -> Result<Vec<usize>, Error> {
    for _ in 0..SET_ATTEMPTS {
        let size = rng.random_range(spec.min_concepts..=spec.max_concepts);
        let mut set = rand::seq::index::sample(rng, spec.concepts, size).into_vec();
        set.sort_unstable();
        let violates = spec.holdout_pairs.iter().any(|&(a, b)| {
            set.binary_search(&a).is_ok() && set.binary_search(&b).is_ok()
        });
        if !violates {
            return Ok(set);
        }
    }
    Err(Error::DegenerateSampler {
        reason: format!(
            "no admissible concept set of size {}..={} after {SET_ATTEMPTS} draws; \
             holdout pairs are too restrictive",
            spec.min_concepts, spec.max_concepts
        ),
    })
}

/// Per-concept relative error between decode({k}) and the true v*_k.
pub fn recovery_error(model: &SsaeModel, truth: &Matrix) -> Result<Vec<f64>, Error> {
    let k_total = model.design().concepts();
    if truth.shape() != (model.n_embed(), k_total) {
        return Err(Error::ShapeMismatch {
            op: "recovery_error",
            left: truth.shape(),
            right: (model.n_embed(), k_total),
        });
    }
    let mut errors = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let code = LatentCode::from_set(&[k], model.design())?;
        let decoded = model.decode(&code)?;
        errors.push(relative_error(&decoded, truth.column(k)));
    }
    Ok(errors)
}

/// Zero-error oracle model: decode({k}) equals truth column k exactly for
/// either activation. Block k of the decoder carries v*_k in its first
/// column and the tied sub-vector is the first basis vector.
pub fn planted_model(
    truth: &Matrix,
    design: SparseDesign,
    activation: Activation,
) -> Result<SsaeModel, Error> {
    if truth.cols() != design.concepts() {
        return Err(Error::ShapeMismatch {
            op: "planted_model",
            left: truth.shape(),
            right: (truth.rows(), design.concepts()),
        });
    }
    let d = design.subspace_dim();
    let n_embed = truth.rows();
    let mut w2 = Matrix::zeros(n_embed, design.latent_dim());
    let mut yc = Matrix::zeros(d, design.concepts());
    for k in 0..design.concepts() {
        w2.column_mut(k * d).copy_from_slice(truth.column(k));
        yc.set(0, k, 1.0);
    }
    SsaeModel::from_parts(design, n_embed, w2, yc, activation, None)
}
