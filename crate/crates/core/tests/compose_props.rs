//! Edit-algebra laws, decode additivity, and cross-module consistency of
//! latent codes.

mod common;

use common::{random_model, small_instance};
use proptest::prelude::*;
use ssae_core::compose::{compose_unseen, LatentCode};
use ssae_core::design::{RealizationSet, SparseDesign};
use ssae_core::model::Activation;

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #[test]
    fn swap_equals_insert_after_remove(
        k in 2usize..8,
        active in proptest::collection::btree_set(0usize..8, 1..8),
        from_pos in 0usize..8,
        to in 0usize..8,
    ) {
        let active: Vec<usize> = active.into_iter().filter(|&a| a < k).collect();
        prop_assume!(!active.is_empty());
        let from = active[from_pos % active.len()];
        let to = to % k;
        let design = SparseDesign::new(2, k).unwrap();
        let code = LatentCode::from_set(&active, design).unwrap();

        let swapped = code.swap(from, to).unwrap();
        if from == to {
            prop_assert_eq!(&swapped, &code);
        } else {
            let removed = code.remove(from).unwrap();
            let chained = if removed.contains(to) {
                removed
            } else {
                removed.insert(to).unwrap()
            };
            prop_assert_eq!(&swapped, &chained);
            // involution, when `to` was not already active
            if !code.contains(to) {
                prop_assert_eq!(swapped.swap(to, from).unwrap(), code);
            }
        }
    }

    #[test]
    fn remove_insert_roundtrip(
        k in 1usize..8,
        active in proptest::collection::btree_set(0usize..8, 0..8),
        target in 0usize..8,
    ) {
        let active: Vec<usize> = active.into_iter().filter(|&a| a < k).collect();
        let target = target % k;
        let design = SparseDesign::new(3, k).unwrap();
        let code = LatentCode::from_set(&active, design).unwrap();
        if code.contains(target) {
            prop_assert_eq!(code.remove(target).unwrap().insert(target).unwrap(), code);
        } else {
            prop_assert_eq!(code.insert(target).unwrap().remove(target).unwrap(), code);
        }
    }
}

#[test]
fn decode_is_additive_over_active_set() {
    for seed in 0..50u64 {
        for activation in [Activation::Relu, Activation::Identity] {
            let model = random_model(seed, 3, 6, 10, activation, false);
            let design = model.design();
            // a deterministic spread of subsets
            let subsets: Vec<Vec<usize>> = vec![
                vec![],
                vec![(seed % 6) as usize],
                vec![0, 5],
                vec![1, 2, 4],
                vec![0, 1, 2, 3, 4, 5],
            ];
            for set in subsets {
                let code = LatentCode::from_set(&set, design).unwrap();
                let whole = model.decode(&code).unwrap();
                let mut summed = vec![0.0; model.n_embed()];
                for &k in code.active() {
                    let single = LatentCode::from_set(&[k], design).unwrap();
                    for (s, v) in summed.iter_mut().zip(model.decode(&single).unwrap()) {
                        *s += v;
                    }
                }
                let worst = whole
                    .iter()
                    .zip(&summed)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(
                    worst < 1e-12,
                    "seed {seed} {activation:?} set {:?}: deviation {worst}",
                    code.active()
                );
            }
        }
    }
}

#[test]
fn decode_depends_only_on_active_set() {
    let model = random_model(7, 2, 5, 9, Activation::Relu, false);
    let design = model.design();
    let direct = LatentCode::from_set(&[1, 3, 4], design).unwrap();
    let built = LatentCode::from_set(&[], design)
        .unwrap()
        .insert(4)
        .unwrap()
        .insert(1)
        .unwrap()
        .insert(2)
        .unwrap()
        .swap(2, 3)
        .unwrap();
    assert_eq!(direct, built);
    assert_eq!(
        bits(&model.decode(&direct).unwrap()),
        bits(&model.decode(&built).unwrap())
    );
}

#[test]
fn expanded_latent_is_the_masked_tiling_of_tied_parameters() {
    for seed in 0..10u64 {
        let model = random_model(seed, 3, 5, 8, Activation::Relu, false);
        let real = common::random_realizations(12, 5, 5, seed + 500);
        let y = model.expand_latent(&real).unwrap();
        let mask = ssae_core::design::build_mask(&model.design(), &real).unwrap();
        let d = model.design().subspace_dim();
        for i in 0..real.len() {
            for k in 0..5 {
                for j in 0..d {
                    let row = k * d + j;
                    let tiled = model.yc().get(j, k) * mask.matrix().get(row, i);
                    assert_eq!(y.get(row, i), tiled, "seed {seed} entry ({row},{i})");
                }
            }
        }
    }
}

#[test]
fn materialized_code_matches_expand_latent_column() {
    let model = random_model(11, 3, 5, 8, Activation::Relu, false);
    let set = vec![0, 2, 4];
    let code = LatentCode::from_set(&set, model.design()).unwrap();
    let y = model.materialize(&code).unwrap();
    let real = RealizationSet::new(vec!["only".into()], vec![set], 5).unwrap();
    let expanded = model.expand_latent(&real).unwrap();
    assert_eq!(bits(&y), bits(expanded.column(0)));
}

#[test]
fn insert_decode_difference_is_the_singleton_decode() {
    let (model, _, _) = small_instance(19, Activation::Relu, false);
    let design = model.design();
    let base = LatentCode::from_set(&[0], design).unwrap();
    let grown = base.insert(2).unwrap();
    let d_base = model.decode(&base).unwrap();
    let d_grown = model.decode(&grown).unwrap();
    let singleton = model
        .decode(&LatentCode::from_set(&[2], design).unwrap())
        .unwrap();
    for i in 0..model.n_embed() {
        assert!((d_grown[i] - d_base[i] - singleton[i]).abs() < 1e-12);
    }
}

#[test]
fn compose_unseen_proceeds_on_disjoint_singletons() {
    let model = random_model(23, 2, 4, 6, Activation::Relu, false);
    let real = RealizationSet::new(
        (0..4).map(|i| format!("s{i}")).collect(),
        vec![vec![0], vec![1], vec![2], vec![3]],
        4,
    )
    .unwrap();
    for k1 in 0..4 {
        for k2 in 0..4 {
            if k1 == k2 {
                continue;
            }
            let c = compose_unseen(&model, &real, None, k1, k2).unwrap();
            assert!(!c.pair_seen_in_training);
            assert_eq!(c.code.active().len(), 2);
        }
    }
}
