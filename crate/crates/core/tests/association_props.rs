//! Loopy data association against exhaustive enumeration.

use proptest::prelude::*;
use vrpslam::slam::loopy_data_association;

mod common;
use common::{exhaustive_association, total_variation};

/// Instances where each feature has one clearly dominant measurement, the
/// regime the filter runs in once features are localized.
fn dominant_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(k, m)| {
        let rows = prop::collection::vec(
            (0.05..1.0f64, prop::collection::vec(0.0..0.1f64, m), 5.0..50.0f64),
            k,
        );
        let perm = Just((0..m).collect::<Vec<usize>>()).prop_shuffle();
        (rows, perm, prop::collection::vec(0.5..2.0f64, m)).prop_map(move |(rows, perm, new)| {
            let weights = rows
                .into_iter()
                .enumerate()
                .map(|(i, (miss, mut off, strong))| {
                    if i < m {
                        off[perm[i]] = strong;
                    }
                    std::iter::once(miss).chain(off).collect()
                })
                .collect();
            (weights, new)
        })
    })
}

fn any_instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (1usize..=3, 0usize..=3).prop_flat_map(|(k, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..100.0f64, m + 1), k),
            prop::collection::vec(1e-3..10.0f64, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn loopy_marginals_match_enumeration((w, new) in dominant_instance()) {
        let out = loopy_data_association(&w, &new, 100, 1e-12);
        let (feature, measurement) = exhaustive_association(&w, &new);
        for (a, b) in out.feature.iter().zip(&feature) {
            prop_assert!(total_variation(a, b) < 0.01, "feature rows {a:?} vs {b:?}");
        }
        for (a, b) in out.measurement.iter().zip(&measurement) {
            prop_assert!(total_variation(a, b) < 0.01, "measurement rows {a:?} vs {b:?}");
        }
    }

    #[test]
    fn marginals_are_distributions((w, new) in any_instance(), iters in 1usize..30) {
        let out = loopy_data_association(&w, &new, iters, 1e-6);
        for row in out.feature.iter().chain(&out.measurement) {
            prop_assert!(row.iter().all(|&p| (0.0..=1.0 + 1e-12).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_on_a_single_pair() {
    let (miss, hit, new) = (0.2, 3.0, 0.7);
    let out = loopy_data_association(&[vec![miss, hit]], &[new], 20, 1e-12);
    let (feature, _) = exhaustive_association(&[vec![miss, hit]], &[new]);
    assert!((out.feature[0][1] - feature[0][1]).abs() < 1e-12);
}
