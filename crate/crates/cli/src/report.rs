//! Serializable shapes of the JSON artifacts the pipeline writes:
//! training reports, diagnostics reports, and composition provenance.

use serde::Serialize;

use ssae_core::design::ConceptDictionary;
use ssae_core::diagnostics::DiagnosticsReport;
use ssae_core::model::TrainReport;
use ssae_core::numerics::Matrix;

/// Row-major nested arrays for readable JSON matrices.
pub fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|c| m.get(r, c)).collect())
        .collect()
}

#[derive(Serialize)]
pub struct TrainReportJson {
    pub config: serde_json::Value,
    pub n_embed: usize,
    pub n_samples: usize,
    pub k: usize,
    pub d: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub w2_norms: Vec<f64>,
    pub yc_norms: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub w1_norms: Vec<f64>,
    pub per_sample_rmse: Vec<f64>,
}

impl TrainReportJson {
    pub fn new(
        config: serde_json::Value,
        n_embed: usize,
        n_samples: usize,
        k: usize,
        d: usize,
        report: &TrainReport,
    ) -> Self {
        TrainReportJson {
            config,
            n_embed,
            n_samples,
            k,
            d,
            initial_loss: report.initial_loss,
            final_loss: report
                .epoch_losses
                .last()
                .copied()
                .unwrap_or(report.initial_loss),
            epoch_losses: report.epoch_losses.clone(),
            w2_norms: report.w2_norms.clone(),
            yc_norms: report.yc_norms.clone(),
            w1_norms: report.w1_norms.clone(),
            per_sample_rmse: report.per_sample_rmse.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct GroupRmseJson {
    pub concepts: Vec<String>,
    pub count: usize,
    pub rmse: f64,
}

#[derive(Serialize)]
pub struct HoldoutJson {
    pub pair: [String; 2],
    pub pair_indices: [usize; 2],
    pub relative_error: f64,
}

#[derive(Serialize)]
pub struct ReconJson {
    pub per_sample_rmse: Vec<f64>,
    pub per_group_rmse: Vec<GroupRmseJson>,
}

#[derive(Serialize)]
pub struct DiagnosticsJson {
    pub k: usize,
    pub d: usize,
    pub n_embed: usize,
    pub concepts: Vec<String>,
    pub gram: Vec<Vec<f64>>,
    pub cosine: Vec<Vec<f64>>,
    pub zero_norm_concepts: Vec<String>,
    pub decoded_cosine: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<ReconJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_errors: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<Vec<HoldoutJson>>,
}

impl DiagnosticsJson {
    pub fn new(
        report: &DiagnosticsReport,
        dict: &ConceptDictionary,
        n_embed: usize,
        d: usize,
        with_data: bool,
        with_truth: bool,
    ) -> Self {
        let name = |k: usize| dict.name(k).unwrap_or("?").to_string();
        DiagnosticsJson {
            k: dict.len(),
            d,
            n_embed,
            concepts: dict.names().to_vec(),
            gram: matrix_rows(&report.gram),
            cosine: matrix_rows(&report.cosine),
            zero_norm_concepts: report.zero_norm_concepts.iter().map(|&k| name(k)).collect(),
            decoded_cosine: matrix_rows(&report.decoded_cosine),
            reconstruction: with_data.then(|| ReconJson {
                per_sample_rmse: report.per_sample_rmse.clone(),
                per_group_rmse: report
                    .per_group_rmse
                    .iter()
                    .map(|g| GroupRmseJson {
                        concepts: g.concepts.iter().map(|&k| name(k)).collect(),
                        count: g.count,
                        rmse: g.rmse,
                    })
                    .collect(),
            }),
            recovery_errors: with_truth.then(|| report.recovery_errors.clone()),
            holdout: (with_truth && !report.holdout_scores.is_empty()).then(|| {
                report
                    .holdout_scores
                    .iter()
                    .map(|s| HoldoutJson {
                        pair: [name(s.pair.0), name(s.pair.1)],
                        pair_indices: [s.pair.0, s.pair.1],
                        relative_error: s.relative_error,
                    })
                    .collect()
            }),
        }
    }
}

#[derive(Serialize, Clone)]
pub struct EditJson {
    pub op: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
}

#[derive(Serialize)]
pub struct PairFlagJson {
    pub pair: [String; 2],
    pub seen_in_training: bool,
}

#[derive(Serialize)]
pub struct ProvenanceJson {
    pub base: Vec<String>,
    pub edits: Vec<EditJson>,
    pub final_active: Vec<String>,
    /// Present only when a realization file was provided to flag which
    /// active pairs co-occurred during training.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<PairFlagJson>>,
}
