//! Random forest of Gini-impurity decision trees on bootstrap resamples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{argmax_lowest, Classifier, ModelError};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// `None` means `ceil(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    /// Number of classes; `None` infers `max label + 1`.
    pub n_classes: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 16,
            min_samples_split: 2,
            features_per_split: None,
            n_classes: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f32,
        left: usize,
        right: usize,
    },
    Leaf {
        histogram: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf_for(&self, row: &[f32]) -> &[u32] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { histogram } => return histogram,
            }
        }
    }

    pub fn vote(&self, row: &[f32]) -> usize {
        argmax_lowest(self.leaf_for(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
    pub config: ForestConfig,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct SplitCandidate {
    feature: usize,
    threshold: f32,
    impurity: f64,
}

/// Midpoint of two consecutive distinct values that still separates them.
fn midpoint(lo: f32, hi: f32) -> f32 {
    let mid = ((lo as f64 + hi as f64) / 2.0) as f32;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

struct TreeBuilder<'a> {
    data: &'a FeatureMatrix,
    config: &'a ForestConfig,
    n_classes: usize,
    per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn histogram(&self, samples: &[usize]) -> Vec<usize> {
        let mut h = vec![0usize; self.n_classes];
        for &s in samples {
            h[self.data.labels[s]] += 1;
        }
        h
    }

    fn best_split_on(&self, feature: usize, samples: &[usize], total: &[usize]) -> Option<SplitCandidate> {
        let mut pairs: Vec<(f32, usize)> = samples
            .iter()
            .map(|&s| (self.data.row(s)[feature], self.data.labels[s]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut left = vec![0usize; self.n_classes];
        let mut right = total.to_vec();
        let mut best: Option<SplitCandidate> = None;
        for i in 0..n - 1 {
            left[pairs[i].1] += 1;
            right[pairs[i].1] -= 1;
            if pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let impurity = (nl * gini(&left) + nr * gini(&right)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(SplitCandidate {
                    feature,
                    threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                    impurity,
                });
            }
        }
        best
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let hist = self.histogram(&samples);
        let id = self.nodes.len();
        let leaf = |h: &[usize]| Node::Leaf {
            histogram: h.iter().map(|&c| c as u32).collect(),
        };
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.config.max_depth || pure || samples.len() < self.config.min_samples_split.max(2) {
            self.nodes.push(leaf(&hist));
            return id;
        }
        // Features in random order: the first `per_split` are candidates; if
        // none of them can split (all constant), keep drawing.
        let mut features: Vec<usize> = (0..self.data.n_cols()).collect();
        features.shuffle(&mut self.rng);
        let mut best: Option<SplitCandidate> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= self.per_split && best.is_some() {
                break;
            }
            if let Some(c) = self.best_split_on(f, &samples, &hist) {
                if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            self.nodes.push(leaf(&hist));
            return id;
        };
        debug_assert!(split.impurity <= gini(&hist) + 1e-12, "split increased impurity");
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.data.row(s)[split.feature] <= split.threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        if let Node::Split { left, right, .. } = &mut self.nodes[id] {
            *left = l;
            *right = r;
        }
        id
    }
}

fn tree_seed(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64 + 1);
    rng
}

pub fn forest_fit(train: &FeatureMatrix, config: &ForestConfig) -> Result<ForestModel, ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if config.n_trees == 0 {
        return Err(ModelError::InvalidConfig("n_trees must be positive".into()));
    }
    let inferred = train.labels.iter().max().map_or(1, |m| m + 1);
    let n_classes = config.n_classes.unwrap_or(inferred).max(inferred);
    let d = train.n_cols();
    let per_split = config
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
        .clamp(1, d.max(1));
    let n = train.n_rows();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_seed(config.seed, t);
            let bootstrap: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut builder = TreeBuilder {
                data: train,
                config,
                n_classes,
                per_split,
                rng,
                nodes: Vec::new(),
            };
            builder.build(bootstrap, 0);
            DecisionTree { nodes: builder.nodes }
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_classes,
        n_features: d,
        config: config.clone(),
    })
}

impl ForestModel {
    /// Per-query (class, vote fraction).
    pub fn predict_with_confidence(&self, queries: &FeatureMatrix) -> Result<Vec<(usize, f64)>, ModelError> {
        if self.trees.is_empty() {
            return Err(ModelError::EmptyForest);
        }
        if queries.n_cols() != self.n_features {
            return Err(ModelError::DimensionMismatch {
                expected: self.n_features,
                found: queries.n_cols(),
            });
        }
        Ok(queries
            .rows()
            .map(|row| {
                let mut votes = vec![0usize; self.n_classes];
                for tree in &self.trees {
                    votes[tree.vote(row)] += 1;
                }
                let class = argmax_lowest(&votes);
                (class, votes[class] as f64 / self.trees.len() as f64)
            })
            .collect())
    }
}

pub fn forest_predict(model: &ForestModel, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
    Ok(model
        .predict_with_confidence(queries)?
        .into_iter()
        .map(|(c, _)| c)
        .collect())
}

impl Classifier for ForestModel {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        forest_predict(self, queries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f32], labels: &[usize]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&values.iter().map(|&v| vec![v]).collect::<Vec<_>>(), labels.to_vec()).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[5, 0]), 0.0);
        assert!((gini(&[5, 5]) - 0.5).abs() < 1e-12);
        assert!((gini(&[1, 1, 1, 1]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_class_always_predicted() {
        let train = column(&[1.0, 2.0, 3.0], &[2, 2, 2]);
        let m = forest_fit(&train, &ForestConfig::default()).unwrap();
        let q = column(&[-5.0, 0.0, 99.0], &[0, 0, 0]);
        assert_eq!(forest_predict(&m, &q).unwrap(), vec![2, 2, 2]);
    }

    #[test]
    fn empty_inputs() {
        let train = FeatureMatrix::from_rows(&[], vec![]).unwrap();
        assert_eq!(forest_fit(&train, &ForestConfig::default()).unwrap_err(), ModelError::EmptyTrainingSet);
        let m = ForestModel {
            trees: vec![],
            n_classes: 2,
            n_features: 1,
            config: ForestConfig::default(),
        };
        assert_eq!(forest_predict(&m, &column(&[0.0], &[0])).unwrap_err(), ModelError::EmptyForest);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let lo = 1.0f32;
        let hi = f32::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(m >= lo && m < hi);
        assert_eq!(midpoint(0.0, 1.0), 0.5);
    }

    #[test]
    fn leaf_histograms_sum_to_bootstrap_size() {
        let values: Vec<f32> = (0..40).map(|i| (i % 7) as f32).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let train = column(&values, &labels);
        let cfg = ForestConfig {
            n_trees: 5,
            max_depth: 3,
            ..Default::default()
        };
        let m = forest_fit(&train, &cfg).unwrap();
        for tree in &m.trees {
            let total: u32 = tree
                .nodes
                .iter()
                .filter_map(|n| match n {
                    Node::Leaf { histogram } => Some(histogram.iter().sum::<u32>()),
                    _ => None,
                })
                .sum();
            assert_eq!(total, 40);
            assert!(tree.depth() <= 3);
        }
    }
}
