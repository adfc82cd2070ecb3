mod common;

use common::*;
use iot_anomaly::ensemble::{conflicts, Ensemble, Fallback};
use iot_anomaly::model::Classifier;
use iot_anomaly::preprocess::FeatureMatrix;
use proptest::prelude::*;
use std::cell::Cell;

#[test]
fn knn_matches_full_sort_oracle() {
    assert_eq!(knn_mismatches(1, 5000, 1000, 6, 5), 0);
}

#[test]
fn knn_matches_oracle_for_other_k() {
    for (seed, k) in [(2, 1), (3, 4), (4, 9)] {
        assert_eq!(knn_mismatches(seed, 400, 200, 3, k), 0, "k = {k}");
    }
}

#[test]
fn conv1d_matches_nested_loops() {
    let err = conv_max_error(5, 200);
    assert!(err <= 1e-6, "max abs error {err:e}");
}

#[test]
fn routing_matches_independent_rule() {
    let [with, without] = routing_mismatches(6, 200);
    assert_eq!(with.0, 0);
    assert_eq!(with.1, with.2, "layer 3 sees exactly the conflicting rows");
    assert!(with.2 > 0);
    assert_eq!(without.0, 0);
    assert_eq!(without.1, 0);
}

proptest! {
    #[test]
    fn agreement_dominates_and_fallback_only_touches_conflicts(
        rows in prop::collection::vec((0usize..5, 0usize..5, 0usize..5), 1..60)
    ) {
        let l1: Vec<usize> = rows.iter().map(|r| r.0).collect();
        let l2: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let l3: Vec<usize> = rows.iter().map(|r| r.2).collect();
        let n = rows.len();
        let q = FeatureMatrix::from_rows(&(0..n).map(|i| vec![i as f32]).collect::<Vec<_>>(), vec![0; n]).unwrap();
        let (a, b, c) = (Cell::new(0), Cell::new(0), Cell::new(0));
        let build = |third: bool| Ensemble {
            layer1: Stub { classes: l1.clone(), asked: &a },
            layer2: Stub { classes: l2.clone(), asked: &b },
            layer3: third.then(|| Stub { classes: l3.clone(), asked: &c }),
            conflict_count: 0,
            fallback: Fallback::Layer2,
        };
        let with = build(true).predict(&q).unwrap();
        let without = build(false).predict(&q).unwrap();
        let conflict_rows = conflicts(&l1, &l2);
        prop_assert_eq!(c.get(), conflict_rows.len());
        for i in 0..n {
            if l1[i] == l2[i] {
                prop_assert_eq!(with[i], l1[i]);
                prop_assert_eq!(without[i], l1[i]);
            } else {
                prop_assert_eq!(without[i], l2[i]);
            }
        }
    }
}
