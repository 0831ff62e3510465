//! Consensus feature attributions weighted by training-point influence.
//!
//! The pipeline: load and standardize tabular data ([`data`]), train a model
//! ([`models`]), find the training points most influential on a test
//! prediction ([`influence`]), attribute the prediction at those points
//! ([`attribution`]), and aggregate the per-point attributions into a
//! consensus explanation ([`aggregation`]). [`evaluation`] scores
//! explanations against decision-tree gold sets.

pub mod aggregation;
pub mod attribution;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod influence;
pub mod linalg;
pub mod models;

pub use aggregation::{ava_ig, ava_shap, AvaConfig, ConsensusAttribution};
pub use error::{AvaError, Result};
