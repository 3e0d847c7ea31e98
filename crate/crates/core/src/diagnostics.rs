//! Quantitative evaluation: concept-subspace decorrelation measurements,
//! reconstruction errors per sample and per concept group, holdout
//! composition scoring, and the finite-difference gradient checker.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::design::{build_mask, RealizationSet};
use crate::error::Error;
use crate::model::{Activation, SsaeModel};
use crate::numerics::{vec_norm, Matrix};

/// Relative ℓ₂ error convention used throughout: ‖a − b‖ / max(‖b‖, 1e-12).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    vec_norm(&diff) / vec_norm(b).max(1e-12)
}

/// K×K Gram matrix of the compact tied sub-vectors:
/// G[k1,k2] = Σⱼ Yc[j,k1]·Yc[j,k2].
pub fn concept_gram(model: &SsaeModel) -> Matrix {
    let yc = model.yc();
    yc.transpose().matmul(yc).expect("yc is rectangular")
}

/// Cosine matrix with flagged degenerate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineReport {
    pub matrix: Matrix,
    /// Concepts whose sub-vector has zero norm; their cosine entries are
    /// reported as 0.
    pub zero_norm_concepts: Vec<usize>,
}

fn cosine_from_columns(cols: &Matrix) -> CosineReport {
    let k_total = cols.cols();
    let norms: Vec<f64> = (0..k_total).map(|k| vec_norm(cols.column(k))).collect();
    let zero_norm_concepts: Vec<usize> = (0..k_total).filter(|&k| norms[k] == 0.0).collect();
    let mut m = Matrix::zeros(k_total, k_total);
    for k1 in 0..k_total {
        if norms[k1] == 0.0 {
            continue;
        }
        m.set(k1, k1, 1.0);
        for k2 in (k1 + 1)..k_total {
            if norms[k2] == 0.0 {
                continue;
            }
            let dot: f64 = cols
                .column(k1)
                .iter()
                .zip(cols.column(k2))
                .map(|(a, b)| a * b)
                .sum();
            let c = dot / (norms[k1] * norms[k2]);
            m.set(k1, k2, c);
            m.set(k2, k1, c);
        }
    }
    CosineReport {
        matrix: m,
        zero_norm_concepts,
    }
}

/// Cosine similarities between compact sub-vectors (latent space).
pub fn concept_cosine(model: &SsaeModel) -> CosineReport {
    cosine_from_columns(model.yc())
}

/// Cosine similarities between per-concept decodes (embedding space),
/// where interference after the decoder is actually observed.
pub fn decoded_cosine(model: &SsaeModel) -> Result<CosineReport, Error> {
    let decodes = crate::compose::decode_concepts(model)?;
    Ok(cosine_from_columns(&decodes))
}

/// RMSE over the samples sharing one distinct concept set.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub concepts: Vec<usize>,
    pub count: usize,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconErrors {
    /// ‖xᵢ − x̂ᵢ‖₂ / √N per sample.
    pub per_sample: Vec<f64>,
    /// One entry per distinct concept set, in order of first appearance.
    pub per_group: Vec<GroupError>,
}

/// Per-sample and per-group reconstruction errors of the decoder-only
/// forward pass.
pub fn recon_errors(
    model: &SsaeModel,
    x: &Matrix,
    real: &RealizationSet,
) -> Result<ReconErrors, Error> {
    let y = model.expand_latent(real)?;
    let recon = model.reconstruct(&y)?;
    if x.shape() != recon.shape() {
        return Err(Error::ShapeMismatch {
            op: "recon_errors",
            left: x.shape(),
            right: recon.shape(),
        });
    }
    let n_embed = model.n_embed() as f64;
    let mut per_sample = Vec::with_capacity(real.len());
    let mut sq_norms = Vec::with_capacity(real.len());
    for i in 0..real.len() {
        let sq: f64 = x
            .column(i)
            .iter()
            .zip(recon.column(i))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        sq_norms.push(sq);
        per_sample.push(libm::sqrt(sq / n_embed));
    }
    let mut per_group: Vec<GroupError> = Vec::new();
    let mut group_sq: Vec<f64> = Vec::new();
    for (i, sq) in sq_norms.iter().enumerate() {
        let set = real.set(i);
        match per_group.iter().position(|g| g.concepts == set) {
            Some(g) => {
                per_group[g].count += 1;
                group_sq[g] += sq;
            }
            None => {
                per_group.push(GroupError {
                    concepts: set.to_vec(),
                    count: 1,
                    rmse: 0.0,
                });
                group_sq.push(*sq);
            }
        }
    }
    for (g, sq) in per_group.iter_mut().zip(group_sq) {
        g.rmse = libm::sqrt(sq / (g.count as f64 * n_embed));
    }
    Ok(ReconErrors {
        per_sample,
        per_group,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutScore {
    pub pair: (usize, usize),
    pub relative_error: f64,
}

/// For each held-out pair, the relative error between the decoded pair
/// code and the additive ground truth v*_{k1} + v*_{k2}.
pub fn holdout_eval(
    model: &SsaeModel,
    truth: &Matrix,
    pairs: &[(usize, usize)],
) -> Result<Vec<HoldoutScore>, Error> {
    let k_total = model.design().concepts();
    if truth.shape() != (model.n_embed(), k_total) {
        return Err(Error::ShapeMismatch {
            op: "holdout_eval",
            left: truth.shape(),
            right: (model.n_embed(), k_total),
        });
    }
    let mut scores = Vec::with_capacity(pairs.len());
    for &(k1, k2) in pairs {
        if k1 >= k_total || k2 >= k_total {
            return Err(Error::ConceptOutOfRange {
                sample: None,
                concept: k1.max(k2),
                concepts: k_total,
            });
        }
        let code = crate::compose::LatentCode::from_set(&[k1, k2], model.design())?;
        let decoded = model.decode(&code)?;
        let target: Vec<f64> = truth
            .column(k1)
            .iter()
            .zip(truth.column(k2))
            .map(|(a, b)| a + b)
            .collect();
        scores.push(HoldoutScore {
            pair: (k1, k2),
            relative_error: relative_error(&decoded, &target),
        });
    }
    Ok(scores)
}

/// Which parameter tensor a gradient-check coordinate belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    W2,
    Yc,
    W1,
}

impl TensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TensorKind::W2 => "W2",
            TensorKind::Yc => "Yc",
            TensorKind::W1 => "W1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorstCoordinate {
    pub tensor: TensorKind,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub coords_checked: usize,
    pub worst: Option<WorstCoordinate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step h.
    pub step: f64,
    pub tolerance: f64,
    /// Above this coordinate count a seeded subsample is checked instead.
    pub max_coords: usize,
    pub seed: u64,
    /// Debug fault injection: added to the analytic gW2[0,0] so the check
    /// must fail there.
    pub corrupt: Option<f64>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-6,
            tolerance: 1e-6,
            max_coords: 10_000,
            seed: 0,
            corrupt: None,
        }
    }
}

/// Central finite differences on every trainable coordinate of the
/// model's variant (decoder-only when no encoder is present, masked
/// encoder otherwise), compared against the analytic gradients.
///
/// Per-coordinate error is |analytic − numeric| / max(|analytic|,
/// |numeric|, 1). For the ReLU decoder-only loss every tied parameter
/// must sit at least 10h away from the activation kink.
pub fn gradcheck(
    model: &SsaeModel,
    x: &Matrix,
    real: &RealizationSet,
    config: &GradCheckConfig,
) -> Result<GradCheckReport, Error> {
    let h = config.step;
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidConfig {
            reason: "finite-difference step must be positive".into(),
        });
    }
    let masked = model.encoder().is_some();
    if !masked && model.activation() == Activation::Relu {
        let d = model.design().subspace_dim();
        for k in 0..model.design().concepts() {
            for j in 0..d {
                let v = model.yc().get(j, k);
                if libm::fabs(v) <= 10.0 * h {
                    return Err(Error::KinkProximity {
                        concept: k,
                        offset: j,
                        value: v,
                    });
                }
            }
        }
    }

    let mask = if masked {
        Some(build_mask(&model.design(), real)?)
    } else {
        None
    };
    let (mut gw2, gother) = if masked {
        model.encoder_gradients(x, mask.as_ref().unwrap())?
    } else {
        model.gradients(x, real)?
    };
    if let Some(eps) = config.corrupt {
        let v = gw2.get(0, 0);
        gw2.set(0, 0, v + eps);
    }
    let other_kind = if masked { TensorKind::W1 } else { TensorKind::Yc };

    let w2_len = gw2.data().len();
    let total = w2_len + gother.data().len();
    let coords: Vec<usize> = if total > config.max_coords {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, config.max_coords).into_vec();
        picked.sort_unstable();
        picked
    } else {
        (0..total).collect()
    };

    let mut probe = model.clone();
    let eval = |probe: &SsaeModel| -> Result<f64, Error> {
        if masked {
            probe.masked_loss(x, mask.as_ref().unwrap())
        } else {
            probe.loss(x, real)
        }
    };

    let mut report = GradCheckReport {
        passed: true,
        max_rel_error: 0.0,
        tolerance: config.tolerance,
        coords_checked: coords.len(),
        worst: None,
    };
    for &c in &coords {
        let (kind, idx, analytic) = if c < w2_len {
            (TensorKind::W2, c, gw2.data()[c])
        } else {
            (other_kind, c - w2_len, gother.data()[c - w2_len])
        };
        let orig = *param_slot(&mut probe, kind, idx);
        *param_slot(&mut probe, kind, idx) = orig + h;
        let plus = eval(&probe)?;
        *param_slot(&mut probe, kind, idx) = orig - h;
        let minus = eval(&probe)?;
        *param_slot(&mut probe, kind, idx) = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let rel = libm::fabs(analytic - numeric)
            / libm::fabs(analytic).max(libm::fabs(numeric)).max(1.0);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            let rows = match kind {
                TensorKind::W2 => model.w2().rows(),
                TensorKind::Yc => model.yc().rows(),
                TensorKind::W1 => model.encoder().unwrap().rows(),
            };
            report.worst = Some(WorstCoordinate {
                tensor: kind,
                row: idx % rows,
                col: idx / rows,
                analytic,
                numeric,
            });
        }
    }
    report.passed = report.max_rel_error <= config.tolerance;
    Ok(report)
}

fn param_slot(probe: &mut SsaeModel, kind: TensorKind, idx: usize) -> &mut f64 {
    match kind {
        TensorKind::W2 => &mut probe.w2_mut().data_mut()[idx],
        TensorKind::Yc => &mut probe.yc_mut().data_mut()[idx],
        TensorKind::W1 => &mut probe.encoder_mut().unwrap().data_mut()[idx],
    }
}

/// Everything the `eval` surface reports. Sections that need data, truth,
/// or holdout pairs stay empty when those inputs are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub gram: Matrix,
    pub cosine: Matrix,
    pub zero_norm_concepts: Vec<usize>,
    pub decoded_cosine: Matrix,
    pub per_sample_rmse: Vec<f64>,
    pub per_group_rmse: Vec<GroupError>,
    pub recovery_errors: Vec<f64>,
    pub holdout_scores: Vec<HoldoutScore>,
}

/// Assembles the full report from whichever inputs are available.
pub fn diagnostics_report(
    model: &SsaeModel,
    data: Option<(&Matrix, &RealizationSet)>,
    truth: Option<&Matrix>,
    holdout_pairs: &[(usize, usize)],
) -> Result<DiagnosticsReport, Error> {
    let gram = concept_gram(model);
    let cos = concept_cosine(model);
    let dec = decoded_cosine(model)?;
    let (per_sample_rmse, per_group_rmse) = match data {
        Some((x, real)) => {
            let e = recon_errors(model, x, real)?;
            (e.per_sample, e.per_group)
        }
        None => (Vec::new(), Vec::new()),
    };
    let recovery_errors = match truth {
        Some(t) => crate::synth::recovery_error(model, t)?,
        None => Vec::new(),
    };
    let holdout_scores = match truth {
        Some(t) if !holdout_pairs.is_empty() => holdout_eval(model, t, holdout_pairs)?,
        _ => Vec::new(),
    };
    Ok(DiagnosticsReport {
        gram,
        cosine: cos.matrix,
        zero_norm_concepts: cos.zero_norm_concepts,
        decoded_cosine: dec.matrix,
        per_sample_rmse,
        per_group_rmse,
        recovery_errors,
        holdout_scores,
    })
}
