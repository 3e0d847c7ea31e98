#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use ssae_core::design::{RealizationSet, SparseDesign};
use ssae_core::model::{Activation, SsaeModel, TrainConfig, TrainVariant};
use ssae_core::numerics::Matrix;

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    )
    .unwrap()
}

/// Random concept sets of size 0..=max_size over k concepts.
pub fn random_realizations(n: usize, k: usize, max_size: usize, seed: u64) -> RealizationSet {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let ids = (0..n).map(|i| format!("s{i}")).collect();
    let sets = (0..n)
        .map(|_| {
            let size = rng.random_range(0..=max_size.min(k));
            rand::seq::index::sample(&mut rng, k, size).into_vec()
        })
        .collect();
    RealizationSet::new(ids, sets, k).unwrap()
}

pub fn random_model(
    seed: u64,
    d: usize,
    k: usize,
    n_embed: usize,
    activation: Activation,
    with_encoder: bool,
) -> SsaeModel {
    let design = SparseDesign::new(d, k).unwrap();
    let config = TrainConfig {
        seed,
        variant: if with_encoder {
            TrainVariant::MaskedEncoder
        } else {
            TrainVariant::DecoderOnly
        },
        ..TrainConfig::default()
    };
    SsaeModel::init(design, n_embed, activation, &config).unwrap()
}

/// The small gradient-check instance used throughout: K=3, d=2, N=5, n=8.
pub fn small_instance(seed: u64, activation: Activation, with_encoder: bool) -> (SsaeModel, Matrix, RealizationSet) {
    let model = random_model(seed, 2, 3, 5, activation, with_encoder);
    let real = random_realizations(8, 3, 3, seed.wrapping_add(1000));
    let x = gaussian_matrix(5, 8, seed.wrapping_add(2000));
    (model, x, real)
}
