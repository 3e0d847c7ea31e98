//! Training-loop behavior: descent under small-step SGD, invariance under
//! concept relabeling and sample reordering, and recovery on a noiseless
//! synthetic world.

mod common;

use ssae_core::design::RealizationSet;
use ssae_core::model::{Activation, Optimizer, SsaeModel, TrainConfig};
use ssae_core::numerics::{solve_ols, Matrix};
use ssae_core::synth::{generate, recovery_error, SynthSpec};

fn world(seed: u64, noise: f64) -> ssae_core::synth::SynthDataset {
    generate(&SynthSpec {
        n_embed: 16,
        concepts: 4,
        subspace_dim: 2,
        samples: 60,
        noise_sigma: noise,
        min_concepts: 1,
        max_concepts: 3,
        holdout_pairs: vec![],
        seed,
    })
    .unwrap()
}

#[test]
fn sgd_with_small_step_descends_monotonically() {
    for seed in [1u64, 2, 3] {
        let ds = world(seed, 0.0);
        let design = ds.spec.design().unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e-4,
            optimizer: Optimizer::Sgd,
            seed,
            ..TrainConfig::default()
        };
        let model = SsaeModel::init(design, ds.spec.n_embed, Activation::Relu, &cfg).unwrap();
        let (_, report) = model.train(&ds.x, &ds.real, &cfg).unwrap();
        let mut prev = report.initial_loss;
        for (e, &loss) in report.epoch_losses.iter().enumerate() {
            assert!(
                loss <= prev + 1e-12,
                "seed {seed}: loss rose at epoch {e}: {prev} -> {loss}"
            );
            prev = loss;
        }
    }
}

#[test]
fn loss_is_invariant_under_concept_relabeling() {
    let ds = world(5, 0.01);
    let design = ds.spec.design().unwrap();
    let k_total = ds.spec.concepts;
    let d = ds.spec.subspace_dim;
    let cfg = TrainConfig {
        seed: 5,
        ..TrainConfig::default()
    };
    let model = SsaeModel::init(design, ds.spec.n_embed, Activation::Relu, &cfg).unwrap();
    let base_loss = model.loss(&ds.x, &ds.real).unwrap();

    // permutation: new index p[k] for old concept k
    let perm = [2usize, 0, 3, 1];
    let mut w2 = Matrix::zeros(ds.spec.n_embed, design.latent_dim());
    let mut yc = Matrix::zeros(d, k_total);
    for (k, &pk) in perm.iter().enumerate() {
        for j in 0..d {
            yc.set(j, pk, model.yc().get(j, k));
            let src = model.w2().column(k * d + j).to_vec();
            w2.column_mut(pk * d + j).copy_from_slice(&src);
        }
    }
    let relabeled = SsaeModel::from_parts(
        design,
        ds.spec.n_embed,
        w2,
        yc,
        Activation::Relu,
        None,
    )
    .unwrap();
    let sets = ds
        .real
        .sets()
        .iter()
        .map(|s| s.iter().map(|&k| perm[k]).collect())
        .collect();
    let real2 = RealizationSet::new(ds.real.ids().to_vec(), sets, k_total).unwrap();
    let relabeled_loss = relabeled.loss(&ds.x, &real2).unwrap();
    assert!((base_loss - relabeled_loss).abs() <= 1e-12 * base_loss.max(1.0));
}

#[test]
fn sample_permutation_permutes_reconstruction_and_keeps_tied_gradient() {
    let ds = world(9, 0.05);
    let design = ds.spec.design().unwrap();
    let cfg = TrainConfig {
        seed: 9,
        ..TrainConfig::default()
    };
    let model = SsaeModel::init(design, ds.spec.n_embed, Activation::Relu, &cfg).unwrap();

    let n = ds.real.len();
    let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
    let ids2 = perm.iter().map(|&i| ds.real.id(i).to_string()).collect();
    let sets2 = perm.iter().map(|&i| ds.real.set(i).to_vec()).collect();
    let real2 = RealizationSet::new(ids2, sets2, ds.spec.concepts).unwrap();
    let x2 = ds.x.gather_columns(&perm);

    let recon = model
        .reconstruct(&model.expand_latent(&ds.real).unwrap())
        .unwrap();
    let recon2 = model
        .reconstruct(&model.expand_latent(&real2).unwrap())
        .unwrap();
    for (pos, &i) in perm.iter().enumerate() {
        assert_eq!(recon2.column(pos), recon.column(i));
    }

    let (_, gyc) = model.gradients(&ds.x, &ds.real).unwrap();
    let (_, gyc2) = model.gradients(&x2, &real2).unwrap();
    for (a, b) in gyc.data().iter().zip(gyc2.data()) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }
}

#[test]
fn noiseless_training_recovers_the_ols_solution() {
    let ds = world(13, 0.0);
    let design = ds.spec.design().unwrap();
    let cfg = TrainConfig {
        epochs: 1500,
        learning_rate: 1e-2,
        seed: 13,
        ..TrainConfig::default()
    };
    let model = SsaeModel::init(design, ds.spec.n_embed, Activation::Identity, &cfg).unwrap();
    let (trained, report) = model.train(&ds.x, &ds.real, &cfg).unwrap();
    let final_loss = *report.epoch_losses.last().unwrap();
    assert!(
        final_loss < 1e-6 * report.initial_loss,
        "loss only fell from {} to {final_loss}",
        report.initial_loss
    );

    let b = ssae_core::design::membership_matrix(&design, &ds.real).unwrap();
    let u = solve_ols(&ds.x, &b).unwrap();
    let errs = recovery_error(&trained, &u).unwrap();
    assert!(
        errs.iter().all(|&e| e < 1e-2),
        "recovery errors vs OLS: {errs:?}"
    );
    // noiseless: OLS itself reproduces the generating truth
    let truth_errs = recovery_error(&trained, &ds.truth).unwrap();
    assert!(truth_errs.iter().all(|&e| e < 1e-2));
}

#[test]
fn epoch_report_has_consistent_lengths() {
    let ds = world(17, 0.02);
    let design = ds.spec.design().unwrap();
    let cfg = TrainConfig {
        epochs: 7,
        seed: 17,
        ..TrainConfig::default()
    };
    let model = SsaeModel::init(design, ds.spec.n_embed, Activation::Relu, &cfg).unwrap();
    let (_, report) = model.train(&ds.x, &ds.real, &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 7);
    assert_eq!(report.w2_norms.len(), 7);
    assert_eq!(report.yc_norms.len(), 7);
    assert!(report.w1_norms.is_empty());
    assert_eq!(report.per_sample_rmse.len(), ds.real.len());
    assert!(report.epoch_losses.iter().all(|l| l.is_finite()));
}
