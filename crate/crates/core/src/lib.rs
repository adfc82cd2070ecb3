pub mod bundle;
pub mod cli;
pub mod config;
pub mod deep;
pub mod ensemble;
pub mod eval;
pub mod kdd;
pub mod model;
pub mod nn;
pub mod preprocess;
pub mod shallow;
pub mod synth;
