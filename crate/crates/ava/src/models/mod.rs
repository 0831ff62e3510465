//! Model zoo behind one predictor contract.
//!
//! Every model exposes class probabilities through [`Predictor::predict`].
//! Differential capabilities (input gradients, per-example parameter
//! gradients, Hessian-vector products) are gated by [`Capabilities`]; calling
//! an unsupported capability is an error, never silent garbage.

mod knn;
mod mlp;
mod svm;
mod tree;

pub use knn::{train_knn, Knn};
pub use mlp::{train_mlp, Activation, LossKind, Mlp, MlpConfig};
pub use svm::{train_svm_rbf, train_svm_rbf_with, SvmConfig, SvmRbf};
pub use tree::{train_decision_tree, DecisionTree, TreeConfig};

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::data::{Dataset, Preprocessing};
use crate::error::{AvaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub input_gradient: bool,
    pub param_gradient: bool,
    pub hvp: bool,
}

pub trait Predictor {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn name(&self) -> &'static str;
    fn capabilities(&self) -> Capabilities;

    /// Class probabilities (nonnegative, sum to 1).
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// The scalar the input gradient differentiates. Defaults to the
    /// predicted probability; smoothed models (soft-kNN) override it.
    fn smooth_output(&self, x: &[f64], output_index: usize) -> Result<f64> {
        Ok(self.predict(x)?[output_index])
    }

    /// Gradient of `smooth_output` with respect to the input.
    fn grad_input(&self, _x: &[f64], _output_index: usize) -> Result<Vec<f64>> {
        Err(AvaError::CapabilityMissing {
            capability: "input_gradient",
            model: self.name(),
        })
    }

    fn n_params(&self) -> usize {
        0
    }

    /// Per-example training loss at the current parameters.
    fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
        let p = self.predict(x)?[y];
        Ok(-p.max(1e-12).ln())
    }

    /// Gradient of the per-example training loss with respect to parameters.
    fn grad_params(&self, _x: &[f64], _y: usize) -> Result<Vec<f64>> {
        Err(AvaError::CapabilityMissing {
            capability: "param_gradient",
            model: self.name(),
        })
    }

    /// `(H + damping I) v` where `H` is the Hessian of the mean training
    /// objective over `data`, computed matrix-free.
    fn hvp(&self, _data: &Dataset, _v: &[f64], _damping: f64) -> Result<Vec<f64>> {
        Err(AvaError::CapabilityMissing {
            capability: "hvp",
            model: self.name(),
        })
    }

    /// Surrogate influence for nonparametric models: the derivative of the
    /// test loss with respect to upweighting each training point. `None`
    /// means the model has no such surrogate.
    fn upweight_influence(
        &self,
        _train: &Dataset,
        _x_test: &[f64],
        _y_test: usize,
    ) -> Option<Result<Vec<f64>>> {
        None
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(AvaError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AvaError::InvalidArgument(
            "input contains non-finite values".into(),
        ));
    }
    Ok(())
}

/// Serializable model wrapper for checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Model {
    Mlp(Mlp),
    SvmRbf(SvmRbf),
    Knn(Knn),
    Tree(DecisionTree),
}

macro_rules! dispatch {
    ($self:ident, $m:ident, $e:expr) => {
        match $self {
            Model::Mlp($m) => $e,
            Model::SvmRbf($m) => $e,
            Model::Knn($m) => $e,
            Model::Tree($m) => $e,
        }
    };
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        dispatch!(self, m, m.n_features())
    }
    fn n_classes(&self) -> usize {
        dispatch!(self, m, m.n_classes())
    }
    fn name(&self) -> &'static str {
        dispatch!(self, m, m.name())
    }
    fn capabilities(&self) -> Capabilities {
        dispatch!(self, m, m.capabilities())
    }
    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, m, m.predict(x))
    }
    fn smooth_output(&self, x: &[f64], output_index: usize) -> Result<f64> {
        dispatch!(self, m, m.smooth_output(x, output_index))
    }
    fn grad_input(&self, x: &[f64], output_index: usize) -> Result<Vec<f64>> {
        dispatch!(self, m, m.grad_input(x, output_index))
    }
    fn n_params(&self) -> usize {
        dispatch!(self, m, m.n_params())
    }
    fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
        dispatch!(self, m, m.loss(x, y))
    }
    fn grad_params(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        dispatch!(self, m, m.grad_params(x, y))
    }
    fn hvp(&self, data: &Dataset, v: &[f64], damping: f64) -> Result<Vec<f64>> {
        dispatch!(self, m, m.hvp(data, v, damping))
    }
    fn upweight_influence(
        &self,
        train: &Dataset,
        x_test: &[f64],
        y_test: usize,
    ) -> Option<Result<Vec<f64>>> {
        dispatch!(self, m, m.upweight_influence(train, x_test, y_test))
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned model checkpoint; round-trips bit-exactly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: Model,
    pub preprocessing: Option<Preprocessing>,
    /// The resolved configuration that produced this model.
    pub config: serde_json::Value,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        let ck: Checkpoint = serde_json::from_reader(file)?;
        if ck.version > CHECKPOINT_VERSION {
            return Err(AvaError::Config(format!(
                "checkpoint version {} is newer than supported {}",
                ck.version, CHECKPOINT_VERSION
            )));
        }
        Ok(ck)
    }
}

/// Accuracy of a predictor on a dataset.
pub fn accuracy<P: Predictor + ?Sized>(p: &P, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for j in 0..data.n_points() {
        let probs = p.predict(&data.point(j))?;
        let pred = argmax(&probs);
        if pred == data.label(j) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.n_points() as f64)
}

/// Index of the maximum; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
