//! Streaming open-set recognition.
//!
//! A closed-set incremental softmax classifier is paired with an incremental
//! k-means model. Every arriving instance is scored by the normalized entropy
//! of its inverse-square-distance affinities to the cluster centroids; high
//! entropy marks it as belonging to an unknown class, low entropy hands it to
//! the classifier.
//!
//! The crate also ships the pieces needed to benchmark that scheme against
//! single-classifier baselines: synthetic dataset generators, stream assembly
//! for a given missing-class ratio, and the evaluation metrics (KC/UC
//! accuracy, open macro F1, AUROC with Youden threshold selection, Wilcoxon
//! signed-rank test, Davies-Bouldin index).

pub mod classifier;
pub mod clustering;
pub mod datagen;
pub mod detector;
pub mod domain;
pub mod error;
pub mod framework;
pub mod metrics;
pub mod seed;

pub use classifier::ClassifierState;
pub use clustering::ClusterState;
pub use domain::{Baseline, Dataset, ExperimentConfig, Instance, Label};
pub use error::{Error, Result};
pub use framework::{ConsolidationPolicy, RunRecord};
pub use metrics::MetricsReport;
