//! Consensus attributions: influence-weighted aggregation of per-point
//! attributions over a test point's most influential training neighbors.
//!
//! Given the neighborhood N_k with rectified weights w_j and normalizer
//! rho = sum w_j, the consensus attribution is A = sum_j (w_j / rho) g^(j),
//! where g^(j) is a SHAP or IG attribution computed at training point x^(j).
//! Being a convex combination, every coordinate of A lies in the hull of the
//! per-point attributions; this is checked at runtime.

use serde::{Deserialize, Serialize};

use crate::attribution::{
    integrated_gradients, shapley_exact, shapley_sampled, Attribution, AttributionMethod,
};
use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::influence::{
    select_neighborhood, InfluenceEngine, InfluenceWeights, Neighborhood, RectifyMode,
    SolverConfig,
};
use crate::models::{argmax, Predictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    /// Influence-weighted mean of the neighborhood points (IG default).
    NeighborhoodMean,
    /// All-zeros vector (the origin of the standardized feature space).
    Zero,
    /// Mean of the full training set.
    TrainingMean,
    /// A user-supplied vector.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapEstimator {
    Exact,
    Sampled { n_samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvaConfig {
    /// Neighborhood size.
    pub k: usize,
    pub rectify: RectifyMode,
    /// Fall back to uniform weights when the rectified neighborhood sums
    /// to zero instead of erroring.
    pub uniform_fallback: bool,
    pub solver: SolverConfig,
    pub shap: ShapEstimator,
    pub ig_steps: usize,
    pub baseline: BaselinePolicy,
}

impl Default for AvaConfig {
    fn default() -> Self {
        AvaConfig {
            k: 10,
            rectify: RectifyMode::Abs,
            uniform_fallback: false,
            solver: SolverConfig::default(),
            shap: ShapEstimator::Exact,
            ig_steps: 64,
            baseline: BaselinePolicy::NeighborhoodMean,
        }
    }
}

/// A consensus attribution with full provenance: the neighborhood it was
/// aggregated over, the per-point attributions, and the influence weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsensusAttribution {
    pub values: Vec<f64>,
    pub method: AttributionMethod,
    pub output_index: usize,
    pub baseline: Vec<f64>,
    pub neighborhood: Neighborhood,
    pub influence: InfluenceWeights,
    pub per_point: Vec<Attribution>,
}

impl ConsensusAttribution {
    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Convex combination of per-point attributions with the neighborhood's
/// normalized weights. Verifies the convex-hull invariant coordinatewise
/// (1e-9 slack relative to the coordinate's hull width).
pub fn aggregate_weighted(per_point: &[Attribution], nb: &Neighborhood) -> Result<Vec<f64>> {
    if per_point.len() != nb.indices.len() {
        return Err(AvaError::InvalidArgument(format!(
            "{} attributions for a neighborhood of {}",
            per_point.len(),
            nb.indices.len()
        )));
    }
    if per_point.is_empty() {
        return Err(AvaError::InvalidArgument("empty neighborhood".into()));
    }
    if nb.normalizer <= 0.0 {
        return Err(AvaError::ZeroWeightNeighborhood);
    }
    let d = per_point[0].values.len();
    let mut acc = vec![0.0; d];
    for (attr, &w) in per_point.iter().zip(&nb.weights) {
        if attr.values.len() != d {
            return Err(AvaError::DimensionMismatch {
                expected: d,
                got: attr.values.len(),
            });
        }
        let coef = w / nb.normalizer;
        crate::linalg::axpy(coef, &attr.values, &mut acc);
    }
    for (i, &agg) in acc.iter().enumerate() {
        let lo = per_point.iter().map(|a| a.values[i]).fold(f64::INFINITY, f64::min);
        let hi = per_point.iter().map(|a| a.values[i]).fold(f64::NEG_INFINITY, f64::max);
        let slack = 1e-9 * (hi - lo).max(1.0);
        if agg < lo - slack || agg > hi + slack {
            return Err(AvaError::Invariant(format!(
                "aggregate coordinate {i} ({agg}) escaped the hull [{lo}, {hi}]"
            )));
        }
    }
    Ok(acc)
}

/// Influence-weighted mean of the neighborhood's feature vectors.
pub fn neighborhood_mean(train: &Dataset, nb: &Neighborhood) -> Vec<f64> {
    let mut mean = vec![0.0; train.n_features()];
    for (&j, &w) in nb.indices.iter().zip(&nb.weights) {
        crate::linalg::axpy(w / nb.normalizer, &train.point(j), &mut mean);
    }
    mean
}

fn resolve_baseline(
    policy: &BaselinePolicy,
    train: &Dataset,
    nb: &Neighborhood,
) -> Result<Vec<f64>> {
    match policy {
        BaselinePolicy::NeighborhoodMean => Ok(neighborhood_mean(train, nb)),
        BaselinePolicy::Zero => Ok(vec![0.0; train.n_features()]),
        BaselinePolicy::TrainingMean => Ok(train.mean_point()),
        BaselinePolicy::Fixed(v) => {
            if v.len() != train.n_features() {
                return Err(AvaError::DimensionMismatch {
                    expected: train.n_features(),
                    got: v.len(),
                });
            }
            Ok(v.clone())
        }
    }
}

/// Which per-point attribution a consensus is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusMethod {
    Shap,
    Ig,
}

fn resolve_output_index<P: Predictor + ?Sized>(
    p: &P,
    x_test: &[f64],
    output_index: Option<usize>,
) -> Result<usize> {
    match output_index {
        Some(i) if i < p.n_classes() => Ok(i),
        Some(i) => Err(AvaError::InvalidArgument(format!(
            "output index {i} out of range for {} classes",
            p.n_classes()
        ))),
        None => Ok(argmax(&p.predict(x_test)?)),
    }
}

/// Build a consensus attribution from precomputed influence weights. The
/// expensive influence solve can thereby be shared across several calls
/// (e.g. a sweep over k).
pub fn consensus_from_weights<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    influence: &InfluenceWeights,
    output_index: usize,
    method: ConsensusMethod,
    config: &AvaConfig,
) -> Result<ConsensusAttribution> {
    let nb = select_neighborhood(influence, config.k, config.uniform_fallback)?;
    let (baseline, attr_method) = match method {
        ConsensusMethod::Shap => (train.mean_point(), AttributionMethod::ShapExact),
        ConsensusMethod::Ig => (resolve_baseline(&config.baseline, train, &nb)?, AttributionMethod::Ig),
    };
    let per_point = nb
        .indices
        .iter()
        .map(|&j| {
            let xj = train.point(j);
            let mut attr = match method {
                ConsensusMethod::Shap => match config.shap {
                    ShapEstimator::Exact => shapley_exact(p, &xj, &baseline, output_index)?,
                    ShapEstimator::Sampled { n_samples, seed } => shapley_sampled(
                        p,
                        &xj,
                        &baseline,
                        output_index,
                        n_samples,
                        // decorrelate neighbors while staying deterministic
                        seed.wrapping_add(j as u64),
                    )?,
                },
                ConsensusMethod::Ig => {
                    integrated_gradients(p, &xj, &baseline, output_index, config.ig_steps)?
                }
            };
            attr.point_id = Some(j);
            Ok(attr)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = aggregate_weighted(&per_point, &nb)?;
    Ok(ConsensusAttribution {
        values,
        method: match method {
            ConsensusMethod::Shap => per_point[0].method,
            ConsensusMethod::Ig => attr_method,
        },
        output_index,
        baseline,
        neighborhood: nb,
        influence: influence.clone(),
        per_point,
    })
}

/// Influence weights of every training point on `(x_test, y_test)`.
pub fn influence_weights<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    x_test: &[f64],
    y_test: usize,
    config: &AvaConfig,
) -> Result<InfluenceWeights> {
    let engine = InfluenceEngine::new(p, train, x_test, y_test, &config.solver)?;
    Ok(InfluenceWeights::new(
        engine.influence_all()?,
        config.rectify,
        None,
    ))
}

/// Consensus SHAP: Shapley attributions at the k most influential training
/// points, aggregated with normalized influence weights. The coalition
/// background is the training mean; `output_index` defaults to the class
/// predicted for `x_test`.
pub fn ava_shap<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    x_test: &[f64],
    y_test: usize,
    output_index: Option<usize>,
    config: &AvaConfig,
) -> Result<ConsensusAttribution> {
    let weights = influence_weights(p, train, x_test, y_test, config)?;
    let out = resolve_output_index(p, x_test, output_index)?;
    consensus_from_weights(p, train, &weights, out, ConsensusMethod::Shap, config)
}

/// Consensus IG: Integrated Gradients at the k most influential training
/// points, all from the same baseline (by default the influence-weighted
/// neighborhood mean), aggregated with normalized influence weights.
pub fn ava_ig<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    x_test: &[f64],
    y_test: usize,
    output_index: Option<usize>,
    config: &AvaConfig,
) -> Result<ConsensusAttribution> {
    let weights = influence_weights(p, train, x_test, y_test, config)?;
    let out = resolve_output_index(p, x_test, output_index)?;
    consensus_from_weights(p, train, &weights, out, ConsensusMethod::Ig, config)
}
