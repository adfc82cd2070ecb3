//! KDD Cup 99 ingestion.
//!
//! The 10% file has one connection record per line: 41 comma-separated
//! features followed by the label with a trailing period, and no header.
//! Records keep their file index so that set membership after splitting is
//! defined by identity rather than value (the file contains many duplicate
//! rows).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Column names in canonical KDD order (41 features).
pub const FEATURE_NAMES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

/// Positions of the categorical columns within [`FEATURE_NAMES`].
pub const CATEGORICAL_COLUMNS: [usize; 3] = [1, 2, 3];

pub const NUM_FEATURES: usize = 41;
pub const NUM_NUMERIC: usize = 38;

/// Index into [`FEATURE_NAMES`] of each numeric feature, in order.
pub fn numeric_columns() -> impl Iterator<Item = usize> {
    (0..NUM_FEATURES).filter(|c| !CATEGORICAL_COLUMNS.contains(c))
}

fn is_rate_column(col: usize) -> bool {
    FEATURE_NAMES[col].ends_with("_rate")
}

/// The five traffic categories. Codes are fixed: Normal=0 .. U2R=4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Normal,
    DoS,
    Probe,
    R2L,
    U2R,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Normal,
        Category::DoS,
        Category::Probe,
        Category::R2L,
        Category::U2R,
    ];
    pub const COUNT: usize = 5;

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Category> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Normal => "normal",
            Category::DoS => "dos",
            Category::Probe => "probe",
            Category::R2L => "r2l",
            Category::U2R => "u2r",
        }
    }

    pub fn is_attack(self) -> bool {
        self != Category::Normal
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Normal => "Normal",
            Category::DoS => "DoS",
            Category::Probe => "Probe",
            Category::R2L => "R2L",
            Category::U2R => "U2R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty line")]
    EmptyLine,
    #[error("expected {expected} fields, found {found}")]
    WrongFieldCount { expected: usize, found: usize },
    #[error("column {column} ({name}) is empty")]
    EmptyField { column: usize, name: &'static str },
    #[error("column {column} ({name}) is not numeric: {value:?}")]
    NonNumericField {
        column: usize,
        name: &'static str,
        value: String,
    },
    #[error("column {column} ({name}) out of range: {value}")]
    OutOfRange {
        column: usize,
        name: &'static str,
        value: f64,
    },
    #[error("column 42 (label): unknown label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: ParseError,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("cannot split an empty dataset")]
    EmptyDataset,
}

fn category_table() -> &'static HashMap<&'static str, Category> {
    static TABLE: OnceLock<HashMap<&'static str, Category>> = OnceLock::new();
    TABLE.get_or_init(|| {
        include_str!("../data/attack_categories.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let mut parts = l.split_whitespace();
                let label = parts.next().expect("fixture label");
                let category = match parts.next().expect("fixture category") {
                    "normal" => Category::Normal,
                    "dos" => Category::DoS,
                    "probe" => Category::Probe,
                    "r2l" => Category::R2L,
                    "u2r" => Category::U2R,
                    other => panic!("bad category {other:?} in mapping fixture"),
                };
                (label, category)
            })
            .collect()
    })
}

/// Maps a raw KDD label (trailing period already stripped) to its category.
pub fn map_attack_category(raw_label: &str) -> Result<Category, ParseError> {
    category_table()
        .get(raw_label)
        .copied()
        .ok_or_else(|| ParseError::UnknownLabel(raw_label.to_string()))
}

/// All raw labels known to the mapping fixture, sorted.
pub fn known_labels() -> Vec<&'static str> {
    let mut labels: Vec<_> = category_table().keys().copied().collect();
    labels.sort_unstable();
    labels
}

/// One parsed connection record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Zero-based position in the source file.
    pub index: usize,
    pub protocol_type: Arc<str>,
    pub service: Arc<str>,
    pub flag: Arc<str>,
    /// The 38 numeric features in canonical order (duration first).
    pub numeric: [f64; NUM_NUMERIC],
    pub raw_label: Arc<str>,
    pub category: Category,
    line: Box<str>,
}

impl Record {
    pub fn duration(&self) -> u64 {
        self.numeric[0] as u64
    }

    /// The categorical token for one of the three categorical columns, by
    /// position within [`CATEGORICAL_COLUMNS`].
    pub fn categorical(&self, which: usize) -> &str {
        match which {
            0 => &self.protocol_type,
            1 => &self.service,
            2 => &self.flag,
            _ => panic!("categorical column {which} out of range"),
        }
    }

    /// The source line, byte-for-byte (label and trailing period included).
    pub fn to_line(&self) -> &str {
        &self.line
    }
}

#[derive(Default)]
struct Interner(HashMap<Box<str>, Arc<str>>);

impl Interner {
    fn intern(&mut self, s: &str) -> Arc<str> {
        if let Some(a) = self.0.get(s) {
            return a.clone();
        }
        let a: Arc<str> = Arc::from(s);
        self.0.insert(s.into(), a.clone());
        a
    }
}

/// Parses the 41 feature fields. Shared by labelled and unlabelled parsing.
fn parse_fields<'a>(fields: &[&'a str]) -> Result<([f64; NUM_NUMERIC], [&'a str; 3]), ParseError> {
    let mut numeric = [0.0; NUM_NUMERIC];
    let mut cats = [""; 3];
    let mut n = 0;
    for (col, raw) in fields.iter().enumerate().take(NUM_FEATURES) {
        let name = FEATURE_NAMES[col];
        let field = raw.trim();
        if field.is_empty() {
            return Err(ParseError::EmptyField {
                column: col + 1,
                name,
            });
        }
        if let Some(slot) = CATEGORICAL_COLUMNS.iter().position(|&c| c == col) {
            cats[slot] = field;
            continue;
        }
        let value: f64 = field.parse().map_err(|_| ParseError::NonNumericField {
            column: col + 1,
            name,
            value: field.to_string(),
        })?;
        let in_range = value.is_finite()
            && value >= 0.0
            && (!is_rate_column(col) || value <= 1.0)
            && (col != 0 || value.fract() == 0.0);
        if !in_range {
            return Err(ParseError::OutOfRange {
                column: col + 1,
                name,
                value,
            });
        }
        numeric[n] = value;
        n += 1;
    }
    Ok((numeric, cats))
}

fn parse_record_with(
    line: &str,
    index: usize,
    interner: &mut Interner,
) -> Result<Record, ParseError> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() {
        return Err(ParseError::EmptyLine);
    }
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != NUM_FEATURES + 1 {
        return Err(ParseError::WrongFieldCount {
            expected: NUM_FEATURES + 1,
            found: fields.len(),
        });
    }
    let (numeric, [protocol, service, flag]) = parse_fields(&fields)?;
    let label_field = fields[NUM_FEATURES].trim();
    let label = label_field.strip_suffix('.').unwrap_or(label_field);
    if label.is_empty() {
        return Err(ParseError::EmptyField {
            column: NUM_FEATURES + 1,
            name: "label",
        });
    }
    let category = map_attack_category(label)?;
    Ok(Record {
        index,
        protocol_type: interner.intern(protocol),
        service: interner.intern(service),
        flag: interner.intern(flag),
        numeric,
        raw_label: interner.intern(label),
        category,
        line: line.into(),
    })
}

/// Parses one labelled KDD line. The record's index is 0.
pub fn parse_record(line: &str) -> Result<Record, ParseError> {
    parse_record_with(line, 0, &mut Interner::default())
}

/// Parses a line that may or may not carry the trailing label field. Used for
/// scoring files; an unlabelled record gets category Normal and an empty
/// raw label.
pub fn parse_unlabelled(line: &str, index: usize) -> Result<Record, ParseError> {
    let line = line.trim_end_matches(['\r', '\n']);
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() == NUM_FEATURES + 1 {
        let mut rec = parse_record_with(line, index, &mut Interner::default())?;
        rec.index = index;
        return Ok(rec);
    }
    if line.trim().is_empty() {
        return Err(ParseError::EmptyLine);
    }
    if fields.len() != NUM_FEATURES {
        return Err(ParseError::WrongFieldCount {
            expected: NUM_FEATURES + 1,
            found: fields.len(),
        });
    }
    let (numeric, [protocol, service, flag]) = parse_fields(&fields)?;
    Ok(Record {
        index,
        protocol_type: protocol.into(),
        service: service.into(),
        flag: flag.into(),
        numeric,
        raw_label: "".into(),
        category: Category::Normal,
        line: line.into(),
    })
}

/// An ordered, immutable collection of records.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub source_path: String,
    /// Hex SHA-256 of the source file bytes.
    pub checksum: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn category_counts(&self) -> BTreeMap<Category, usize> {
        let mut counts: BTreeMap<Category, usize> =
            Category::ALL.iter().map(|&c| (c, 0)).collect();
        for r in &self.records {
            *counts.get_mut(&r.category).unwrap() += 1;
        }
        counts
    }

    fn subset(&self, mut indices: Vec<usize>) -> Dataset {
        indices.sort_unstable();
        Dataset {
            records: indices.into_iter().map(|i| self.records[i].clone()).collect(),
            source_path: self.source_path.clone(),
            checksum: self.checksum.clone(),
        }
    }

    /// Records matching a predicate, in order.
    pub fn filter(&self, keep: impl Fn(&Record) -> bool) -> Dataset {
        Dataset {
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
            source_path: self.source_path.clone(),
            checksum: self.checksum.clone(),
        }
    }
}

/// Parses already-read file contents. Lines are parsed in parallel; the
/// result keeps file order and reports the first failing line.
pub fn parse_dataset(text: &str, source_path: &str, checksum: String) -> Result<Dataset, IngestError> {
    let lines: Vec<&str> = text.lines().collect();
    // Trailing blank lines are not records.
    let end = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |p| p + 1);
    let parsed: Vec<Result<Record, ParseError>> = lines[..end]
        .par_iter()
        .enumerate()
        .map_init(Interner::default, |interner, (i, l)| {
            parse_record_with(l, i, interner)
        })
        .collect();
    let mut records = Vec::with_capacity(parsed.len());
    let mut shared = Interner::default();
    for (i, r) in parsed.into_iter().enumerate() {
        let mut rec = r.map_err(|source| IngestError::Parse {
            path: source_path.to_string(),
            line: i + 1,
            source,
        })?;
        // Re-intern so every record shares one allocation per token.
        rec.protocol_type = shared.intern(&rec.protocol_type);
        rec.service = shared.intern(&rec.service);
        rec.flag = shared.intern(&rec.flag);
        rec.raw_label = shared.intern(&rec.raw_label);
        records.push(rec);
    }
    Ok(Dataset {
        records,
        source_path: source_path.to_string(),
        checksum,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a file, transparently gunzipping `.gz` inputs. Returns the text and
/// the checksum of the on-disk bytes.
pub fn read_text(path: &Path) -> Result<(String, String), IngestError> {
    let io_err = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let bytes = std::fs::read(path).map_err(io_err)?;
    let checksum = sha256_hex(&bytes);
    let text = if path.extension().is_some_and(|e| e == "gz") {
        let mut out = String::new();
        flate2::read::GzDecoder::new(&bytes[..])
            .read_to_string(&mut out)
            .map_err(io_err)?;
        out
    } else {
        String::from_utf8(bytes)
            .map_err(|e| io_err(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?
    };
    Ok((text, checksum))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, IngestError> {
    let path = path.as_ref();
    let (text, checksum) = read_text(path)?;
    parse_dataset(&text, &path.display().to_string(), checksum)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    StratifiedExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self, SplitError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(SplitError::InvalidFraction(train_fraction));
        }
        Ok(Self {
            train_fraction,
            seed,
            mode: SplitMode::StratifiedExact,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self::new(0.8, 0).unwrap()
    }
}

/// `floor(fraction * n)`, robust to the representation error of `fraction`.
pub fn floor_share(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// Per-category exact stratified partition of positions `0..len` of `items`.
/// Returns (selected, rest) as positions into `items`.
pub(crate) fn stratified_partition<K: Ord + Copy>(
    keys: &[K],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        groups.entry(*k).or_default().push(i);
    }
    let mut selected = Vec::new();
    let mut rest = Vec::new();
    for (g, (_, mut members)) in groups.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(g as u64);
        members.shuffle(&mut rng);
        let take = floor_share(fraction, members.len());
        selected.extend_from_slice(&members[..take]);
        rest.extend_from_slice(&members[take..]);
    }
    selected.sort_unstable();
    rest.sort_unstable();
    (selected, rest)
}

/// Exact stratified split: per category, `floor(fraction * n)` records go to
/// train. Both halves keep file order.
pub fn split_train_test(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), SplitError> {
    if dataset.is_empty() {
        return Err(SplitError::EmptyDataset);
    }
    let keys: Vec<Category> = dataset.records.iter().map(|r| r.category).collect();
    let (train, test) = stratified_partition(&keys, spec.train_fraction, spec.seed);
    Ok((dataset.subset(train), dataset.subset(test)))
}

const SUBSAMPLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seeded stratified subsample keeping `floor(fraction * n)` records per
/// category. Used for desk-scale runs.
pub fn stratified_subsample(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset, SplitError> {
    if fraction >= 1.0 {
        return Ok(dataset.clone());
    }
    if fraction <= 0.0 || fraction.is_nan() {
        return Err(SplitError::InvalidFraction(fraction));
    }
    let keys: Vec<Category> = dataset.records.iter().map(|r| r.category).collect();
    let (keep, _) = stratified_partition(&keys, fraction, seed ^ SUBSAMPLE_SALT);
    Ok(dataset.subset(keep))
}
