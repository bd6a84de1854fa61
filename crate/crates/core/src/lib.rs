//! Post-hoc explanations for graph neural network node predictions.
//!
//! The crate provides the Zorro greedy explainer, a Monte-Carlo estimator of
//! RDT-Fidelity (expected validity under random resampling of the unselected
//! input), the evaluation metrics used to compare explainers, a synthetic
//! ground-truth benchmark, and remove-and-retrain evaluation.

pub mod baselines;
pub mod error;
pub mod explanation;
pub mod features;
pub mod fidelity;
pub mod gnn;
pub mod io;
pub mod graph;
pub mod matrix;
pub mod metrics;
pub mod rng;
pub mod roar;
pub mod synth;
pub mod zorro;

pub use error::{Error, Result};
pub use explanation::{Explanation, SoftMask};
pub use features::FeatureMatrix;
pub use fidelity::{rdt_fidelity, FidelityEstimate, FidelityEvaluator, NoiseSeed};
pub use gnn::{Model, NodeClassifier, Prediction};
pub use graph::{ComputationalGraph, Graph};
pub use matrix::Matrix;
pub use zorro::{zorro_explain, zorro_multi, ZorroConfig, ZorroExplanation};
