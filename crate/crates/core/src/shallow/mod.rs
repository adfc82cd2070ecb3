//! Shallow classifiers: k-nearest-neighbours and random forest.

pub mod forest;
pub mod knn;

pub use forest::{forest_fit, forest_predict, DecisionTree, ForestConfig, ForestModel, Node};
pub use knn::{knn_fit, knn_predict, Distance, KnnConfig, KnnModel};
