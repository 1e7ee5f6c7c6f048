//! Benchmarking toolkit for predicting whether (and by how much) online
//! assignments are submitted late.
//!
//! The crate bundles the whole experimental pipeline:
//!
//! * [`data`]: CSV ingest, cleaning, max-absolute normalization, repeated
//!   80/20 split plans, predictor projections and a seeded synthetic
//!   generator with a student × course × assignment hierarchy.
//! * [`metrics`]: sign-threshold confusion counts, PPV/TPR/ACC/MCC and the
//!   G-score that balances regression error against both classes' F1.
//! * [`clustering`]: k-means, random-swap refinement and silhouette-based
//!   choice of the cluster count (used for RBF network centers).
//! * [`models`]: nine regression families behind one fit/predict contract.
//! * [`tuning`]: K-fold grid search maximizing the mean G-score.
//! * [`report`]: aggregation over splits and table emission.
//! * [`experiment`]: run configuration and the end-to-end orchestration used
//!   by the `delaybench` binary.

pub mod clustering;
pub mod data;
pub mod experiment;
pub mod matrix;
pub mod metrics;
pub mod models;
pub mod report;
pub mod rng;
pub mod tuning;

pub use matrix::Matrix;
