mod common;

use std::path::Path;

use common::*;
use iot_anomaly::bundle::{ModelBundle, TrainedModel};
use iot_anomaly::cli::{
    cmd_evaluate, cmd_ingest, cmd_score, cmd_train, prepare_splits, score_text, CliError, EvalOptions, BUNDLE_DIR,
    EVAL_REPORT, RESOLVED_CONFIG, TRAINING_LOG,
};
use iot_anomaly::config::{ModelKind, RunConfig};
use iot_anomaly::kdd::{floor_share, Category};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

const DATA: &str = "synthetic:6000:3";

#[test]
fn every_model_reloads_with_bitwise_identical_outputs() {
    for model in ModelKind::ALL {
        let dir = tempfile::tempdir().unwrap();
        let config = fast_config(model, DATA, dir.path());
        let trained = cmd_train(&config).unwrap();
        let splits = prepare_splits(&config).unwrap();
        let test = trained.bundle.preprocessor.transform(&splits.test).unwrap();
        let before = trained.bundle.model.verdicts(&test).unwrap();
        let loaded = ModelBundle::load(&trained.bundle_dir).unwrap();
        let after = loaded.model.verdicts(&test).unwrap();
        assert_eq!(before.classes, after.classes, "{model}");
        assert_eq!(before.anomalous, after.anomalous, "{model}");
        let bits = |s: &Option<Vec<f64>>| s.as_ref().map(|v| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(bits(&before.scores), bits(&after.scores), "{model}");
        assert_eq!(loaded.preprocessor, trained.bundle.preprocessor);
        for f in [TRAINING_LOG, RESOLVED_CONFIG] {
            assert!(dir.path().join(f).is_file(), "{model}: {f}");
        }
    }
}

#[test]
fn same_seed_gives_byte_identical_ensemble_bundles_and_reports() {
    let run = |dir: &Path| {
        let config = fast_config(ModelKind::Ensemble, DATA, dir);
        cmd_train(&config).unwrap();
        let report = cmd_evaluate(&dir.join(BUNDLE_DIR), &config, &EvalOptions::default()).unwrap();
        (tree_bytes(&dir.join(BUNDLE_DIR)), std::fs::read(dir.join(EVAL_REPORT)).unwrap(), report.report)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (bundle_a, report_a, parsed_a) = run(a.path());
    let (bundle_b, report_b, parsed_b) = run(b.path());
    assert_eq!(bundle_a, bundle_b);
    assert_eq!(report_a, report_b);
    assert_eq!(parsed_a, parsed_b);
    assert!(bundle_a.iter().any(|(p, _)| p.starts_with("layer2")));
}

#[test]
fn gan_bundle_carries_all_networks_threshold_and_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Gan, DATA, dir.path());
    let out = cmd_train(&config).unwrap();
    let manifest = ModelBundle::manifest(&out.bundle_dir).unwrap();
    for prefix in ["generator.", "discriminator.", "encoder."] {
        assert!(manifest.tensors.iter().any(|t| t.name.starts_with(prefix)), "{prefix}");
    }
    assert!(manifest.thresholds.contains_key("threshold"));
    assert_eq!(manifest.thresholds["lambda"], 0.9);
    assert!(manifest.preprocessing.is_some());
    assert_eq!(manifest.config_hash, config.hash());
}

#[test]
fn subsample_keeps_floor_share_per_category() {
    let config = {
        let mut c = RunConfig::from_text(&format!("data = {DATA}\nsubsample = 0.05")).unwrap();
        c.seed = 4;
        c
    };
    let full = generate_dataset(&SynthConfig::new(6000, 3)).unwrap().category_counts();
    let splits = prepare_splits(&config).unwrap();
    let train = splits.train.category_counts();
    let test = splits.test.category_counts();
    for c in Category::ALL {
        let sampled = floor_share(0.05, full[&c]);
        assert_eq!(train[&c], floor_share(0.8, sampled), "{c:?}");
        assert_eq!(train[&c] + test[&c], sampled, "{c:?}");
    }
}

#[test]
fn evaluate_report_is_internally_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Rf, DATA, dir.path());
    cmd_train(&config).unwrap();
    let out = cmd_evaluate(&dir.path().join(BUNDLE_DIR), &config, &EvalOptions::default()).unwrap();
    let cm = &out.report.confusion;
    assert_eq!(out.report.accuracy, cm.trace() as f64 / cm.total() as f64);
    assert_eq!(cm.total() as usize, out.report.metadata.test_rows);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&out.report_path).unwrap()).unwrap();
    assert_eq!(json["metadata"]["model"], "rf");
    assert!(out.reference_tables.is_none(), "no published figures for rf");
}

#[test]
fn ensemble_evaluation_prints_reference_tables_in_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Ensemble, DATA, dir.path());
    cmd_train(&config).unwrap();
    let out = cmd_evaluate(&dir.path().join(BUNDLE_DIR), &config, &EvalOptions::default()).unwrap();
    let tables = out.reference_tables.unwrap();
    for mode in ["binary", "macro", "weighted"] {
        assert!(tables.contains(&format!("({mode} averaging)")), "{mode}");
    }
    for metric in ["accuracy", "precision", "recall", "f1"] {
        assert!(tables.contains(metric));
    }
    let meta = &out.report.metadata;
    assert!(meta.intermediate_accuracies.contains_key("layer1_knn"));
    assert!(meta.intermediate_accuracies.contains_key("layer2_cnnlstm"));
}

#[test]
fn evaluate_refuses_checksum_mismatch_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Knn, DATA, dir.path());
    cmd_train(&config).unwrap();
    let mut other = config.clone();
    other.data = "synthetic:6000:4".into();
    let bundle = dir.path().join(BUNDLE_DIR);
    let err = cmd_evaluate(&bundle, &other, &EvalOptions::default()).err().unwrap();
    assert!(matches!(err, CliError::ChecksumMismatch { .. }));
    assert_eq!(err.exit_code(), 2);
    let forced = EvalOptions {
        force: true,
        ..Default::default()
    };
    assert!(cmd_evaluate(&bundle, &other, &forced).is_ok());
}

#[test]
fn missing_bundle_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Ae, DATA, dir.path());
    let err = cmd_evaluate(&dir.path().join("nope"), &config, &EvalOptions::default()).err().unwrap();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn scoring_emits_one_line_per_record_and_flags_unseen_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fast_config(ModelKind::Ae, DATA, dir.path());
    config.lenient_categories = false;
    let trained = cmd_train(&config).unwrap();
    let splits = prepare_splits(&config).unwrap();

    let normal = splits.train.records.iter().find(|r| r.category == Category::Normal).unwrap();
    let mut fields: Vec<String> = normal.to_line().split(',').map(str::to_string).collect();
    fields[2] = "no_such_service".into();
    let unseen = fields.join(",");
    let unlabelled = normal.to_line().rsplit_once(',').unwrap().0.to_string();
    let text = format!("{}\n\n{unseen}\n{unlabelled}\nnot,a,record\n", normal.to_line());
    let input = dir.path().join("input.txt");
    std::fs::write(&input, &text).unwrap();

    let out = cmd_score(&trained.bundle_dir, &input, None).unwrap();
    assert_eq!(out.lines.len(), 4, "blank lines are not records");
    assert_eq!(out.failed, 2);
    let first: Vec<&str> = out.lines[0].split('\t').collect();
    assert_eq!(first[0], "1");
    let score: f64 = first[2].parse().unwrap();
    let TrainedModel::Ae(ae) = &trained.bundle.model else { unreachable!() };
    assert!(score >= 0.0);
    assert_eq!(first[3] == "true", score > ae.threshold);
    assert!(out.lines[1].starts_with("3\terror\t"));
    assert!(out.lines[1].contains("service"), "error names the column: {}", out.lines[1]);
    assert_eq!(out.lines[2].split('\t').nth(2), Some(first[2]), "label field does not matter");
    assert!(matches!(out.clone().into_result(), Err((_, CliError::ScoreFailures { failed: 2, total: 4 }))));

    let lenient = cmd_score(&trained.bundle_dir, &input, Some(true)).unwrap();
    assert_eq!(lenient.failed, 1);
}

#[test]
fn training_normals_mostly_score_below_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Ae, DATA, dir.path());
    let trained = cmd_train(&config).unwrap();
    let splits = prepare_splits(&config).unwrap();
    let text: Vec<&str> = splits
        .train
        .records
        .iter()
        .filter(|r| r.category == Category::Normal)
        .map(|r| r.to_line())
        .collect();
    let out = score_text(&trained.bundle, &text.join("\n")).unwrap();
    let flagged = out.lines.iter().filter(|l| l.ends_with("\ttrue")).count();
    // The threshold is the 95th percentile of exactly these scores.
    assert!(flagged as f64 <= 0.05 * text.len() as f64 + 1.0, "{flagged} of {}", text.len());
}

#[test]
fn ingest_summary_matches_generator_plan() {
    let s = cmd_ingest(Path::new(DATA)).unwrap();
    let planned: usize = iot_anomaly::synth::label_plan(&SynthConfig::new(6000, 3))
        .iter()
        .map(|(_, n)| n)
        .sum();
    assert_eq!(s.records, planned);
    assert_eq!(s.counts.values().sum::<usize>(), s.records);
    assert_eq!(s.checksum.len(), 64);
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(ModelKind::Knn, DATA, dir.path());
    cmd_train(&config).unwrap();
    let text = std::fs::read_to_string(dir.path().join(RESOLVED_CONFIG)).unwrap();
    let again = RunConfig::from_text(&text).unwrap();
    assert_eq!(again, config);
}
