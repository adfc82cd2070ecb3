mod common;

use iot_anomaly::cli::prepare_splits;
use iot_anomaly::config::ModelKind;
use iot_anomaly::deep::{ae_train, gan_train};
use iot_anomaly::model::AnomalyScorer;
use iot_anomaly::preprocess::{FeatureMatrix, Preprocessor};
use proptest::prelude::*;
use std::sync::OnceLock;

fn matrices(model: ModelKind) -> (FeatureMatrix, FeatureMatrix, iot_anomaly::config::RunConfig) {
    let dir = std::env::temp_dir();
    let config = common::fast_config(model, "synthetic:5000:8", &dir);
    let splits = prepare_splits(&config).unwrap();
    let pre = Preprocessor::fit(&splits.train, model.encoding(), config.l2(), true).unwrap();
    (
        pre.transform(&splits.train).unwrap(),
        pre.transform(&splits.test).unwrap(),
        config,
    )
}

/// 50 evenly spaced thresholds spanning the observed score range, plus margins.
fn sweep(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    (0..50).map(|i| lo - 0.05 * span + 1.1 * span * i as f64 / 49.0).collect()
}

fn flagged_counts<S: AnomalyScorer>(model: &mut S, set: impl Fn(&mut S, f64), rows: &FeatureMatrix, grid: &[f64]) -> Vec<usize> {
    grid.iter()
        .map(|&t| {
            set(model, t);
            model.classify(rows).unwrap().iter().filter(|&&a| a).count()
        })
        .collect()
}

#[test]
fn autoencoder_flags_fewer_rows_as_threshold_rises() {
    let (train, test, config) = matrices(ModelKind::Ae);
    let mut ae = ae_train(&train, &config.ae_config()).unwrap();
    let grid = sweep(&ae.score(&test).unwrap());
    let counts = flagged_counts(&mut ae, |m, t| m.threshold = t, &test, &grid);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert_eq!(counts[0], test.n_rows());
    assert_eq!(*counts.last().unwrap(), 0);
}

#[test]
fn gan_flags_fewer_rows_as_threshold_rises() {
    let (train, test, config) = matrices(ModelKind::Gan);
    let mut gan = gan_train(&train, &config.gan_config()).unwrap();
    assert!(gan.epochs.iter().all(|e| e.d_loss.is_finite() && e.g_loss.is_finite()));
    let grid = sweep(&gan.score(&test).unwrap());
    let counts = flagged_counts(&mut gan, |m, t| m.threshold = t, &test, &grid);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
}

#[test]
fn autoencoder_scores_attacks_above_normals() {
    let (train, test, config) = matrices(ModelKind::Ae);
    let ae = ae_train(&train, &config.ae_config()).unwrap();
    let scores = ae.score(&test).unwrap();
    let mean = |attack: bool| {
        let v: Vec<f64> = scores
            .iter()
            .zip(&test.labels)
            .filter(|(_, &l)| (l > 0) == attack)
            .map(|(s, _)| *s)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(true) > mean(false), "attack {} vs normal {}", mean(true), mean(false));
    assert_eq!(ae.rows_used, train.labels.iter().filter(|&&l| l == 0).count());
}

#[test]
fn gan_score_mixes_components_by_lambda() {
    let (train, test, config) = matrices(ModelKind::Gan);
    let gan = gan_train(&train, &config.gan_config()).unwrap();
    let parts = gan.components(&test).unwrap();
    for lambda in [0.0, 0.3, 0.9, 1.0] {
        let scores = gan.scores_with_lambda(&test, lambda).unwrap();
        for ((r, d), s) in parts.iter().zip(&scores) {
            let want = lambda * r + (1.0 - lambda) * d;
            assert!((s - want).abs() <= 1e-12 * want.abs().max(1.0), "{s} vs {want}");
        }
    }
}

fn trained_ae() -> &'static (iot_anomaly::deep::AeModel, FeatureMatrix) {
    static CELL: OnceLock<(iot_anomaly::deep::AeModel, FeatureMatrix)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (train, test, config) = matrices(ModelKind::Ae);
        (ae_train(&train, &config.ae_config()).unwrap(), test)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_the_threshold_never_adds_flags(a in 0.0f64..0.2, b in 0.0f64..0.2) {
        let (ae, test) = trained_ae();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let verdicts = |t: f64| {
            let mut m = ae.clone();
            m.threshold = t;
            m.classify(test).unwrap()
        };
        let (at_lo, at_hi) = (verdicts(lo), verdicts(hi));
        // Anything still flagged at the higher threshold was flagged at the lower one.
        prop_assert!(at_hi.iter().zip(&at_lo).all(|(&h, &l)| !h || l));
    }
}
