//! Fit-on-train / apply-on-test feature transforms.
//!
//! Order is fixed: encode categoricals, min-max scale, then (optionally)
//! L2-normalize rows. Label-encoded category codes are scaled along with the
//! numeric columns; one-hot indicator columns are left as 0/1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kdd::{Dataset, Record, CATEGORICAL_COLUMNS, FEATURE_NAMES, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PreprocessError {
    #[error("column {column}: category {token:?} was not seen during fitting")]
    UnseenCategory { column: &'static str, token: String },
    #[error("cannot fit on an empty training set")]
    EmptyTrainingSet,
    #[error("scaler expects {expected} columns, got {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("matrix has {rows} rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("matrix data length {len} is not {rows} x {cols}")]
    ShapeMismatch { len: usize, rows: usize, cols: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// Dense row-major matrix with aligned class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f32>,
    n_rows: usize,
    n_cols: usize,
    pub labels: Vec<usize>,
    pub columns: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        values: Vec<f32>,
        n_rows: usize,
        n_cols: usize,
        labels: Vec<usize>,
        columns: Vec<String>,
    ) -> Result<Self, PreprocessError> {
        if values.len() != n_rows * n_cols {
            return Err(PreprocessError::ShapeMismatch {
                len: values.len(),
                rows: n_rows,
                cols: n_cols,
            });
        }
        if labels.len() != n_rows {
            return Err(PreprocessError::LabelMismatch {
                rows: n_rows,
                labels: labels.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(PreprocessError::NonFinite {
                row: pos / n_cols.max(1),
                col: pos % n_cols.max(1),
            });
        }
        let columns = if columns.len() == n_cols {
            columns
        } else {
            (0..n_cols).map(|c| format!("x{c}")).collect()
        };
        Ok(Self {
            values,
            n_rows,
            n_cols,
            labels,
            columns,
        })
    }

    /// Builds a matrix from rows, naming columns `x0..`.
    pub fn from_rows(rows: &[Vec<f32>], labels: Vec<usize>) -> Result<Self, PreprocessError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let values: Vec<f32> = rows.iter().flatten().copied().collect();
        Self::new(values, rows.len(), n_cols, labels, Vec::new())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            values,
            n_rows: indices.len(),
            n_cols: self.n_cols,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            columns: self.columns.clone(),
        }
    }

    /// Rows whose label satisfies `keep`.
    pub fn filter_labels(&self, keep: impl Fn(usize) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.n_rows).filter(|&i| keep(self.labels[i])).collect();
        self.select_rows(&idx)
    }

    /// Binary view of the labels: 0 = normal, 1 = any attack.
    pub fn binary_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| usize::from(l != 0)).collect()
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, PreprocessError> {
        if labels.len() != self.n_rows {
            return Err(PreprocessError::LabelMismatch {
                rows: self.n_rows,
                labels: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncodingKind {
    Label,
    OneHot,
}

/// Vocabularies for protocol_type, service and flag, each sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub kind: EncodingKind,
    pub vocabularies: [Vec<String>; 3],
    /// Unseen tokens encode as an all-zero one-hot group (or code -1 for
    /// label encoding) instead of failing.
    pub lenient: bool,
}

fn categorical_name(which: usize) -> &'static str {
    FEATURE_NAMES[CATEGORICAL_COLUMNS[which]]
}

impl CategoricalEncoder {
    fn fit(train: &Dataset, kind: EncodingKind) -> Self {
        let vocabularies = std::array::from_fn(|which| {
            let mut v: Vec<String> = train
                .records
                .iter()
                .map(|r| r.categorical(which).to_string())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        });
        Self {
            kind,
            vocabularies,
            lenient: false,
        }
    }

    pub fn code(&self, which: usize, token: &str) -> Option<usize> {
        self.vocabularies[which]
            .binary_search_by(|t| t.as_str().cmp(token))
            .ok()
    }

    pub fn decode(&self, which: usize, code: usize) -> Option<&str> {
        self.vocabularies[which].get(code).map(String::as_str)
    }

    fn lookup(&self, which: usize, token: &str) -> Result<Option<usize>, PreprocessError> {
        match self.code(which, token) {
            Some(c) => Ok(Some(c)),
            None if self.lenient => Ok(None),
            None => Err(PreprocessError::UnseenCategory {
                column: categorical_name(which),
                token: token.to_string(),
            }),
        }
    }

    /// Width of the encoded (unscaled) row.
    pub fn output_width(&self) -> usize {
        match self.kind {
            EncodingKind::Label => NUM_FEATURES,
            EncodingKind::OneHot => {
                NUM_FEATURES - 3 + self.vocabularies.iter().map(Vec::len).sum::<usize>()
            }
        }
    }

    /// Number of leading-or-positional columns that the scaler acts on.
    fn scaled_width(&self) -> usize {
        match self.kind {
            EncodingKind::Label => NUM_FEATURES,
            EncodingKind::OneHot => NUM_FEATURES - 3,
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        match self.kind {
            EncodingKind::Label => FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            EncodingKind::OneHot => {
                let mut names: Vec<String> = crate::kdd::numeric_columns()
                    .map(|c| FEATURE_NAMES[c].to_string())
                    .collect();
                for which in 0..3 {
                    for tok in &self.vocabularies[which] {
                        names.push(format!("{}={tok}", categorical_name(which)));
                    }
                }
                names
            }
        }
    }

    /// Encodes one record into `out` (unscaled). Numeric features come first
    /// for one-hot encoding; label encoding keeps canonical column order.
    fn encode_into(&self, r: &Record, out: &mut Vec<f64>) -> Result<(), PreprocessError> {
        match self.kind {
            EncodingKind::Label => {
                let mut numeric = r.numeric.iter();
                for col in 0..NUM_FEATURES {
                    if let Some(which) = CATEGORICAL_COLUMNS.iter().position(|&c| c == col) {
                        let code = self.lookup(which, r.categorical(which))?;
                        out.push(code.map_or(-1.0, |c| c as f64));
                    } else {
                        out.push(*numeric.next().unwrap());
                    }
                }
            }
            EncodingKind::OneHot => {
                out.extend_from_slice(&r.numeric);
                for which in 0..3 {
                    let code = self.lookup(which, r.categorical(which))?;
                    let start = out.len();
                    out.resize(start + self.vocabularies[which].len(), 0.0);
                    if let Some(c) = code {
                        out[start + c] = 1.0;
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn fit_label_encoder(train: &Dataset) -> CategoricalEncoder {
    CategoricalEncoder::fit(train, EncodingKind::Label)
}

pub fn fit_one_hot_encoder(train: &Dataset) -> CategoricalEncoder {
    CategoricalEncoder::fit(train, EncodingKind::OneHot)
}

/// Per-feature min/max fit on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits on the first `width` columns of row-major `rows`.
    pub fn fit(rows: &[f64], n_cols: usize, width: usize) -> Self {
        let mut mins = vec![f64::INFINITY; width];
        let mut maxs = vec![f64::NEG_INFINITY; width];
        for row in rows.chunks_exact(n_cols) {
            for c in 0..width {
                mins[c] = mins[c].min(row[c]);
                maxs[c] = maxs[c].max(row[c]);
            }
        }
        for c in 0..width {
            if mins[c] > maxs[c] {
                mins[c] = 0.0;
                maxs[c] = 0.0;
            }
        }
        Self { mins, maxs }
    }

    /// `(x - min) / (max - min)`; constant columns map to 0. Out-of-range
    /// values are not clipped.
    pub fn scale(&self, col: usize, x: f64) -> f64 {
        let (lo, hi) = (self.mins[col], self.maxs[col]);
        if hi > lo {
            (x - lo) / (hi - lo)
        } else {
            0.0
        }
    }

    pub fn width(&self) -> usize {
        self.mins.len()
    }
}

fn encode_dataset(encoder: &CategoricalEncoder, dataset: &Dataset) -> Result<Vec<f64>, PreprocessError> {
    let mut raw = Vec::with_capacity(dataset.len() * encoder.output_width());
    for r in &dataset.records {
        encoder.encode_into(r, &mut raw)?;
    }
    Ok(raw)
}

/// Fits a scaler on the encoded training set.
pub fn fit_scaler(encoder: &CategoricalEncoder, train: &Dataset) -> Result<MinMaxScaler, PreprocessError> {
    if train.is_empty() {
        return Err(PreprocessError::EmptyTrainingSet);
    }
    let raw = encode_dataset(encoder, train)?;
    Ok(MinMaxScaler::fit(&raw, encoder.output_width(), encoder.scaled_width()))
}

fn scale_row(scaler: &MinMaxScaler, raw: &[f64], out: &mut Vec<f32>) {
    for (c, &x) in raw.iter().enumerate() {
        let v = if c < scaler.width() { scaler.scale(c, x) } else { x };
        out.push(v as f32);
    }
}

/// Encodes and scales `dataset`. Labels become category codes.
pub fn transform(
    encoder: &CategoricalEncoder,
    scaler: &MinMaxScaler,
    dataset: &Dataset,
) -> Result<FeatureMatrix, PreprocessError> {
    if scaler.width() != encoder.scaled_width() {
        return Err(PreprocessError::ColumnMismatch {
            expected: encoder.scaled_width(),
            found: scaler.width(),
        });
    }
    let width = encoder.output_width();
    let raw = encode_dataset(encoder, dataset)?;
    let mut values = Vec::with_capacity(raw.len());
    for row in raw.chunks_exact(width) {
        scale_row(scaler, row, &mut values);
    }
    FeatureMatrix::new(
        values,
        dataset.len(),
        width,
        dataset.records.iter().map(|r| r.category.code()).collect(),
        encoder.column_names(),
    )
}

/// Divides each nonzero row by its Euclidean norm. Zero rows are unchanged.
pub fn l2_normalize_rows(m: &FeatureMatrix) -> FeatureMatrix {
    let mut out = m.clone();
    if out.n_cols > 0 {
        for row in out.values.chunks_exact_mut(out.n_cols) {
            normalize_row(row);
        }
    }
    out
}

fn normalize_row(row: &mut [f32]) {
    let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in row {
            *v = ((*v as f64) / norm) as f32;
        }
    }
}

/// Complete fitted preprocessing state for one detector family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub encoder: CategoricalEncoder,
    pub scaler: MinMaxScaler,
    pub l2_normalize: bool,
}

impl Preprocessor {
    pub fn fit(
        train: &Dataset,
        kind: EncodingKind,
        l2_normalize: bool,
        lenient: bool,
    ) -> Result<Self, PreprocessError> {
        if train.is_empty() {
            return Err(PreprocessError::EmptyTrainingSet);
        }
        let mut encoder = CategoricalEncoder::fit(train, kind);
        encoder.lenient = lenient;
        let scaler = fit_scaler(&encoder, train)?;
        Ok(Self {
            encoder,
            scaler,
            l2_normalize,
        })
    }

    pub fn transform(&self, dataset: &Dataset) -> Result<FeatureMatrix, PreprocessError> {
        let m = transform(&self.encoder, &self.scaler, dataset)?;
        Ok(if self.l2_normalize {
            l2_normalize_rows(&m)
        } else {
            m
        })
    }

    /// Transforms a single record, for per-record scoring.
    pub fn transform_record(&self, record: &Record) -> Result<Vec<f32>, PreprocessError> {
        let mut raw = Vec::with_capacity(self.encoder.output_width());
        self.encoder.encode_into(record, &mut raw)?;
        let mut out = Vec::with_capacity(raw.len());
        scale_row(&self.scaler, &raw, &mut out);
        if self.l2_normalize {
            normalize_row(&mut out);
        }
        Ok(out)
    }

    pub fn n_features(&self) -> usize {
        self.encoder.output_width()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::parse_dataset;
    use crate::synth::{generate_dataset, SynthConfig};
    use proptest::prelude::*;

    fn small() -> Dataset {
        generate_dataset(&SynthConfig::new(600, 2)).unwrap()
    }

    #[test]
    fn vocabularies_are_sorted_and_deduplicated() {
        let enc = fit_label_encoder(&small());
        for v in &enc.vocabularies {
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
        assert!(enc.code(0, "tcp").is_some());
        assert_eq!(enc.decode(0, enc.code(0, "udp").unwrap()), Some("udp"));
    }

    #[test]
    fn widths_and_names() {
        let ds = small();
        let label = Preprocessor::fit(&ds, EncodingKind::Label, false, false).unwrap();
        assert_eq!(label.n_features(), 41);
        let onehot = Preprocessor::fit(&ds, EncodingKind::OneHot, false, false).unwrap();
        let vocab: usize = onehot.encoder.vocabularies.iter().map(Vec::len).sum();
        assert_eq!(onehot.n_features(), 38 + vocab);
        let m = onehot.transform(&ds).unwrap();
        assert_eq!(m.columns.len(), m.n_cols());
        assert!(m.columns.iter().any(|c| c == "protocol_type=icmp"));
    }

    #[test]
    fn one_hot_groups_have_exactly_one_bit() {
        let ds = small();
        let p = Preprocessor::fit(&ds, EncodingKind::OneHot, false, false).unwrap();
        let m = p.transform(&ds).unwrap();
        let sizes: Vec<usize> = p.encoder.vocabularies.iter().map(Vec::len).collect();
        for row in m.rows() {
            let mut at = 38;
            for s in &sizes {
                let group = &row[at..at + s];
                assert_eq!(group.iter().filter(|&&v| v == 1.0).count(), 1);
                assert_eq!(group.iter().filter(|&&v| v == 0.0).count(), s - 1);
                at += s;
            }
        }
    }

    #[test]
    fn training_rows_scale_into_unit_interval() {
        let ds = small();
        let m = Preprocessor::fit(&ds, EncodingKind::Label, false, false)
            .unwrap()
            .transform(&ds)
            .unwrap();
        assert!(m.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(m.labels, ds.records.iter().map(|r| r.category.code()).collect::<Vec<_>>());
    }

    #[test]
    fn unseen_tokens_fail_strict_and_pass_lenient() {
        let ds = small();
        let line = ds.records[0].to_line().to_string();
        let mut fields: Vec<&str> = line.split(',').collect();
        fields[2] = "not_a_service";
        let odd = parse_dataset(&fields.join(","), "mem", String::new()).unwrap();
        let strict = Preprocessor::fit(&ds, EncodingKind::OneHot, false, false).unwrap();
        assert_eq!(
            strict.transform(&odd).unwrap_err(),
            PreprocessError::UnseenCategory {
                column: "service",
                token: "not_a_service".into()
            }
        );
        let lenient = Preprocessor::fit(&ds, EncodingKind::OneHot, false, true).unwrap();
        assert_eq!(lenient.transform(&odd).unwrap().n_rows(), 1);
        let label = Preprocessor::fit(&ds, EncodingKind::Label, false, true).unwrap();
        let row = label.transform_record(&odd.records[0]).unwrap();
        let lo = label.scaler.mins[2];
        let hi = label.scaler.maxs[2];
        assert_eq!(row[2], ((-1.0 - lo) / (hi - lo)) as f32);
    }

    #[test]
    fn record_and_batch_transforms_agree() {
        let ds = small();
        for kind in [EncodingKind::Label, EncodingKind::OneHot] {
            let p = Preprocessor::fit(&ds, kind, true, false).unwrap();
            let m = p.transform(&ds).unwrap();
            for (i, r) in ds.records.iter().enumerate().step_by(37) {
                assert_eq!(p.transform_record(r).unwrap(), m.row(i));
            }
        }
    }

    #[test]
    fn scaler_constant_and_empty_columns() {
        let s = MinMaxScaler::fit(&[3.0, 1.0, 3.0, 5.0], 2, 2);
        assert_eq!(s.scale(0, 3.0), 0.0);
        assert_eq!(s.scale(1, 3.0), 0.5);
        assert_eq!(s.scale(1, 9.0), 2.0);
        let e = MinMaxScaler::fit(&[], 2, 2);
        assert_eq!((e.mins[0], e.maxs[0]), (0.0, 0.0));
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let empty = parse_dataset("", "mem", String::new()).unwrap();
        assert_eq!(
            Preprocessor::fit(&empty, EncodingKind::Label, false, false).unwrap_err(),
            PreprocessError::EmptyTrainingSet
        );
    }

    #[test]
    fn matrix_constructor_validates() {
        assert!(matches!(
            FeatureMatrix::new(vec![1.0; 5], 2, 3, vec![0, 0], vec![]),
            Err(PreprocessError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            FeatureMatrix::new(vec![1.0; 6], 2, 3, vec![0], vec![]),
            Err(PreprocessError::LabelMismatch { .. })
        ));
        assert_eq!(
            FeatureMatrix::new(vec![1.0, f32::NAN, 0.0, 0.0], 2, 2, vec![0, 0], vec![]).unwrap_err(),
            PreprocessError::NonFinite { row: 0, col: 1 }
        );
        let m = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 2, 1]).unwrap();
        assert_eq!(m.binary_labels(), vec![0, 1, 1]);
        assert_eq!(m.filter_labels(|l| l > 0).values(), &[2.0, 3.0]);
        assert_eq!(m.select_rows(&[2, 0]).labels, vec![1, 0]);
    }

    proptest! {
        #[test]
        fn l2_rows_have_unit_norm_or_stay_zero(
            rows in prop::collection::vec(prop::collection::vec(-100.0f32..100.0, 4), 1..20)
        ) {
            let n = rows.len();
            let m = FeatureMatrix::from_rows(&rows, vec![0; n]).unwrap();
            let out = l2_normalize_rows(&m);
            for (a, b) in m.rows().zip(out.rows()) {
                let na: f64 = a.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
                if na == 0.0 {
                    prop_assert_eq!(nb, 0.0);
                } else {
                    prop_assert!((nb - 1.0).abs() < 1e-5);
                }
            }
        }

        #[test]
        fn scaling_is_monotone(xs in prop::collection::vec(-1e6f64..1e6, 2..30)) {
            let s = MinMaxScaler::fit(&xs, 1, 1);
            let mut sorted = xs.clone();
            sorted.sort_by(f64::total_cmp);
            let scaled: Vec<f64> = sorted.iter().map(|&x| s.scale(0, x)).collect();
            prop_assert!(scaled.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(scaled.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
