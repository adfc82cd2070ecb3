//! Confusion matrices, precision/recall/F1 in three averaging modes, and the
//! JSON evaluation report.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdd::Category;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("label vectors differ in length: {truth} true vs {predicted} predicted")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("class code {code} out of range for {n_classes} classes")]
    CodeOutOfRange { code: usize, n_classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        Self {
            n_classes,
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Collapses classes `1..` into a single "attack" class 1.
    pub fn binary(&self) -> ConfusionMatrix {
        let mut out = ConfusionMatrix::zeros(2);
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                out.counts[usize::from(t > 0)][usize::from(p > 0)] += c;
            }
        }
        out
    }

    /// `trace / total`, or an error for an empty matrix.
    pub fn accuracy(&self) -> Result<f64, EvalError> {
        match self.total() {
            0 => Err(EvalError::EmptyMatrix),
            n => Ok(self.trace() as f64 / n as f64),
        }
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], n_classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(n_classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        for code in [t, p] {
            if code >= n_classes {
                return Err(EvalError::CodeOutOfRange { code, n_classes });
            }
        }
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricMode {
    /// Normal vs any attack; attack is the positive class.
    Binary,
    Macro,
    Weighted,
}

impl MetricMode {
    pub const ALL: [MetricMode; 3] = [MetricMode::Binary, MetricMode::Macro, MetricMode::Weighted];

    pub fn name(self) -> &'static str {
        match self {
            MetricMode::Binary => "binary",
            MetricMode::Macro => "macro",
            MetricMode::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when any of the three rates hit a 0/0 and was defined as 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    let tp = cm.counts[class][class];
    let (precision, zp) = ratio(tp, cm.predicted(class));
    let (recall, zr) = ratio(tp, cm.support(class));
    ClassMetrics {
        precision,
        recall,
        f1: harmonic_f1(precision, recall),
        support: cm.support(class),
        zero_division: zp || zr || precision + recall == 0.0,
    }
}

pub fn metrics(cm: &ConfusionMatrix, mode: MetricMode) -> Result<MetricSet, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    if mode == MetricMode::Binary {
        let b = cm.binary();
        let attack = class_metrics(&b, 1);
        return Ok(MetricSet {
            accuracy: b.accuracy()?,
            precision: attack.precision,
            recall: attack.recall,
            f1: attack.f1,
            zero_division: attack.zero_division,
        });
    }
    let per: Vec<ClassMetrics> = (0..cm.n_classes).map(|c| class_metrics(cm, c)).collect();
    let weights: Vec<f64> = match mode {
        MetricMode::Macro => vec![1.0 / cm.n_classes as f64; cm.n_classes],
        _ => per.iter().map(|m| m.support as f64 / total as f64).collect(),
    };
    let avg = |f: fn(&ClassMetrics) -> f64| per.iter().zip(&weights).map(|(m, w)| w * f(m)).sum::<f64>();
    Ok(MetricSet {
        accuracy: cm.accuracy()?,
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        zero_division: per.iter().any(|m| m.zero_division),
    })
}

/// Reference results as fractions; `None` means not published.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMetrics {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

/// Published full-scale results for the ensemble, autoencoder and GAN
/// detectors.
pub fn reference_for(model: &str) -> Option<ReferenceMetrics> {
    let r = |a, p, r, f| ReferenceMetrics {
        accuracy: Some(a),
        precision: Some(p),
        recall: Some(r),
        f1: Some(f),
    };
    match model {
        "ensemble" => Some(r(0.9822, 0.9267, 0.9668, 0.9621)),
        "ae" => Some(r(0.9796, 0.9068, 0.8733, 0.9345)),
        "gan" => Some(r(0.9028, 0.9127, 0.9286, 0.9262)),
        "knn" => Some(ReferenceMetrics {
            accuracy: Some(0.9681),
            precision: None,
            recall: None,
            f1: None,
        }),
        "cnnlstm" => Some(ReferenceMetrics {
            accuracy: Some(0.9783),
            precision: None,
            recall: None,
            f1: None,
        }),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub ours: f64,
    pub reference: Option<f64>,
    pub delta: Option<f64>,
    pub status: DeltaStatus,
}

pub fn compare_to_reference(ours: &MetricSet, reference: &ReferenceMetrics, tolerance: f64) -> Vec<DeltaRow> {
    [
        ("accuracy", ours.accuracy, reference.accuracy),
        ("precision", ours.precision, reference.precision),
        ("recall", ours.recall, reference.recall),
        ("f1", ours.f1, reference.f1),
    ]
    .into_iter()
    .map(|(metric, ours, reference)| {
        let delta = reference.map(|r| ours - r);
        let status = match delta {
            None => DeltaStatus::NotApplicable,
            // A hair of slack so a delta printed equal to the tolerance passes.
            Some(d) if d.abs() <= tolerance + 1e-12 => DeltaStatus::Pass,
            Some(_) => DeltaStatus::Fail,
        };
        DeltaRow {
            metric: metric.to_string(),
            ours,
            reference,
            delta,
            status,
        }
    })
    .collect()
}

pub fn render_delta_table(title: &str, rows: &[DeltaRow]) -> String {
    let mut out = format!("{title}\n  {:<10} {:>9} {:>9} {:>9}  status\n", "metric", "ours", "ref", "delta");
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}", v * 100.0));
    for r in rows {
        let status = match r.status {
            DeltaStatus::Pass => "pass",
            DeltaStatus::Fail => "fail",
            DeltaStatus::NotApplicable => "n/a",
        };
        let _ = writeln!(
            out,
            "  {:<10} {:>9} {:>9} {:>9}  {status}",
            r.metric,
            pct(Some(r.ours)),
            pct(r.reference),
            r.delta.map_or("n/a".to_string(), |d| format!("{:+.2}", d * 100.0)),
        );
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_checksum: String,
    pub test_rows: usize,
    /// Accuracies of ensemble sub-models on the same test rows.
    pub intermediate_accuracies: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub binary_confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub metrics: BTreeMap<MetricMode, MetricSet>,
    pub metadata: RunMetadata,
}

impl EvalReport {
    pub fn build(truth: &[usize], predicted: &[usize], metadata: RunMetadata) -> Result<Self, EvalError> {
        let cm = confusion(truth, predicted, Category::COUNT)?;
        Self::from_confusion(cm, metadata)
    }

    /// Report over binary labels only (anomaly scorers).
    pub fn build_binary(truth: &[bool], predicted: &[bool], metadata: RunMetadata) -> Result<Self, EvalError> {
        let t: Vec<usize> = truth.iter().map(|&b| usize::from(b)).collect();
        let p: Vec<usize> = predicted.iter().map(|&b| usize::from(b)).collect();
        Self::from_confusion(confusion(&t, &p, 2)?, metadata)
    }

    pub fn from_confusion(cm: ConfusionMatrix, metadata: RunMetadata) -> Result<Self, EvalError> {
        let metrics = MetricMode::ALL
            .iter()
            .map(|&m| Ok((m, metrics(&cm, m)?)))
            .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
        let per_class = (0..cm.n_classes)
            .map(|c| {
                let name = if cm.n_classes == Category::COUNT {
                    Category::ALL[c].name().to_string()
                } else if c == 0 {
                    "normal".to_string()
                } else {
                    "attack".to_string()
                };
                (name, class_metrics(&cm, c))
            })
            .collect();
        Ok(Self {
            binary_confusion: cm.binary(),
            accuracy: cm.accuracy()?,
            confusion: cm,
            per_class,
            metrics,
            metadata,
        })
    }

    pub fn binary(&self) -> &MetricSet {
        &self.metrics[&MetricMode::Binary]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Delta tables against the published reference in every averaging mode.
    pub fn reference_tables(&self, tolerance: f64) -> Option<String> {
        let reference = reference_for(&self.metadata.model)?;
        let mut out = String::new();
        for mode in MetricMode::ALL {
            let rows = compare_to_reference(&self.metrics[&mode], &reference, tolerance);
            out.push_str(&render_delta_table(&format!("{} vs reference ({} averaging)", self.metadata.model, mode.name()), &rows));
        }
        Some(out)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {} on {} test rows", self.metadata.model, self.metadata.test_rows)?;
        writeln!(f, "  {:<9} {:>9} {:>9} {:>9} {:>9}", "mode", "accuracy", "precision", "recall", "f1")?;
        for (mode, m) in &self.metrics {
            writeln!(
                f,
                "  {:<9} {:>9.4} {:>9.4} {:>9.4} {:>9.4}{}",
                mode.name(),
                m.accuracy,
                m.precision,
                m.recall,
                m.f1,
                if m.zero_division { "  (0/0 -> 0)" } else { "" }
            )?;
        }
        writeln!(f, "  confusion (rows true, cols predicted):")?;
        for row in &self.confusion.counts {
            let cells: Vec<String> = row.iter().map(|c| format!("{c:>8}")).collect();
            writeln!(f, "  {}", cells.join(""))?;
        }
        for (name, acc) in &self.metadata.intermediate_accuracies {
            writeln!(f, "  {name} accuracy {acc:.4}")?;
        }
        Ok(())
    }
}
