//! Gold-set evaluation protocol and the benchmark grid.
//!
//! The gold set of a training split is the set of features a pruned decision
//! tree actually splits on, ranked by weighted impurity decrease. An
//! attribution is scored by the recall of its top-m features (by magnitude)
//! against the gold set, and by the mean normalized importance it assigns to
//! gold features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{
    consensus_from_weights, influence_weights, AvaConfig, ConsensusMethod, ShapEstimator,
};
use crate::attribution::{integrated_gradients, shapley_exact, shapley_sampled};
use crate::data::{split_dataset, Dataset};
use crate::error::{AvaError, Result};
use crate::models::{
    train_decision_tree, train_knn, train_mlp, train_svm_rbf_with, Model, MlpConfig, Predictor,
    SvmConfig,
};

/// Features a pruned decision tree relies on, strongest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSet {
    pub features: Vec<usize>,
}

impl GoldSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Gold set from a tree pruned to at most `m` distinct split features.
pub fn gold_set(train: &Dataset, m: usize) -> Result<GoldSet> {
    let (_, ranked) = train_decision_tree(train, m)?;
    if ranked.is_empty() {
        return Err(AvaError::EmptyGoldSet);
    }
    Ok(GoldSet { features: ranked })
}

/// Indices of the `m` largest values by magnitude; ties resolve to the
/// lower feature index.
pub fn top_m_features(values: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order.truncate(m);
    order
}

/// |top-m(attribution) intersect gold| / |gold|.
pub fn recall_at_gold(values: &[f64], gold: &GoldSet) -> f64 {
    let top = top_m_features(values, gold.len());
    let hits = top.iter().filter(|i| gold.features.contains(i)).count();
    hits as f64 / gold.len() as f64
}

/// Mean share of total attribution magnitude assigned to gold features.
/// A uniform attribution scores 1/d; mass concentrated evenly on the gold
/// features scores 1/m.
pub fn mean_feature_importance(values: &[f64], gold: &GoldSet) -> f64 {
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    gold.features
        .iter()
        .map(|&i| values[i].abs() / total)
        .sum::<f64>()
        / gold.len() as f64
}

/// Monte-Carlo expected recall of a uniformly random size-m feature subset
/// (analytically m/d); deterministic under the seed.
pub fn random_baseline(d: usize, gold: &GoldSet, n_trials: usize, seed: u64) -> f64 {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..d).collect();
    let m = gold.len().min(d);
    let mut acc = 0.0;
    for _ in 0..n_trials {
        indices.shuffle(&mut rng);
        let hits = indices[..m].iter().filter(|i| gold.features.contains(i)).count();
        acc += hits as f64 / gold.len() as f64;
    }
    acc / n_trials as f64
}

/// Choose the gold-set size by cross-validated accuracy of the pruned tree.
/// Ties resolve to the smallest candidate.
pub fn select_m(train: &Dataset, candidates: &[usize], n_folds: usize, seed: u64) -> Result<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if candidates.is_empty() {
        return Err(AvaError::InvalidArgument("no candidate values for m".into()));
    }
    if n_folds < 2 || n_folds > train.n_points() {
        return Err(AvaError::InvalidArgument(format!(
            "n_folds must lie in [2, {}], got {n_folds}",
            train.n_points()
        )));
    }
    let mut order: Vec<usize> = (0..train.n_points()).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(usize, f64)> = None;
    for &m in &sorted {
        let mut acc = 0.0;
        for fold in 0..n_folds {
            let held: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % n_folds == fold)
                .map(|(_, &j)| j)
                .collect();
            let kept: Vec<usize> = order
                .iter()
                .enumerate()
                .filter(|(i, _)| i % n_folds != fold)
                .map(|(_, &j)| j)
                .collect();
            let (tree, _) = train_decision_tree(&train.select(&kept), m)?;
            acc += crate::models::accuracy(&tree, &train.select(&held))?;
        }
        acc /= n_folds as f64;
        if best.is_none_or(|(_, b)| acc > b + 1e-12) {
            best = Some((m, acc));
        }
    }
    Ok(best.unwrap().0)
}

/// One point of a k-sweep: mean scores over the evaluated test points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub recall: f64,
    pub mfi: f64,
}

/// Sweep the neighborhood size. Influence weights are computed once per test
/// point (at the full training set) and reused for every k.
#[allow(clippy::too_many_arguments)]
pub fn k_sweep<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    test: &Dataset,
    n_test_points: usize,
    gold: &GoldSet,
    ks: &[usize],
    method: ConsensusMethod,
    config: &AvaConfig,
) -> Result<Vec<SweepPoint>> {
    if ks.is_empty() {
        return Err(AvaError::InvalidArgument("empty k list".into()));
    }
    let n_test = n_test_points.min(test.n_points());
    if n_test == 0 {
        return Err(AvaError::InvalidArgument("no test points".into()));
    }
    let weights: Vec<_> = (0..n_test)
        .map(|t| influence_weights(p, train, &test.point(t), test.label(t), config))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut recall = 0.0;
        let mut mfi = 0.0;
        for (t, w) in weights.iter().enumerate() {
            let cfg = AvaConfig {
                k,
                ..config.clone()
            };
            let output_index = crate::models::argmax(&p.predict(&test.point(t))?);
            let cons = consensus_from_weights(p, train, w, output_index, method, &cfg)?;
            recall += recall_at_gold(&cons.values, gold);
            mfi += mean_feature_importance(&cons.values, gold);
        }
        out.push(SweepPoint {
            k,
            recall: recall / n_test as f64,
            mfi: mfi / n_test as f64,
        });
    }
    Ok(out)
}

/// A model family plus hyperparameters for the benchmark grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSpec {
    Mlp(MlpConfig),
    Knn { n_neighbors: usize },
    SvmRbf(SvmConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Mlp(_) => "mlp",
            ModelSpec::Knn { .. } => "knn",
            ModelSpec::SvmRbf(_) => "svm_rbf",
        }
    }
}

/// Train the model a spec describes; MLP initialization is re-seeded by
/// `seed` so benchmark cells differ across seeds.
pub fn train_model(train: &Dataset, spec: &ModelSpec, seed: u64) -> Result<Model> {
    match spec {
        ModelSpec::Mlp(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            Ok(Model::Mlp(train_mlp(train, &cfg)?))
        }
        ModelSpec::Knn { n_neighbors } => Ok(Model::Knn(train_knn(train, *n_neighbors)?)),
        ModelSpec::SvmRbf(cfg) => Ok(Model::SvmRbf(train_svm_rbf_with(train, cfg)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Shap,
    Ig,
    AvaShap,
    AvaIg,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Shap => "shap",
            MethodKind::Ig => "ig",
            MethodKind::AvaShap => "ava_shap",
            MethodKind::AvaIg => "ava_ig",
        }
    }

    pub const ALL: [MethodKind; 4] = [
        MethodKind::Shap,
        MethodKind::Ig,
        MethodKind::AvaShap,
        MethodKind::AvaIg,
    ];
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub models: Vec<ModelSpec>,
    pub methods: Vec<MethodKind>,
    pub seeds: Vec<u64>,
    pub test_fraction: f64,
    /// Attributions are scored on the first `n_test_points` of each split.
    pub n_test_points: usize,
    /// Gold-set size; `None` selects it by cross-validation from
    /// `m_candidates`.
    pub m: Option<usize>,
    pub m_candidates: Vec<usize>,
    pub random_trials: usize,
    pub ava: AvaConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            models: vec![ModelSpec::Mlp(MlpConfig::default())],
            methods: MethodKind::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
            test_fraction: 0.2,
            n_test_points: 10,
            m: Some(2),
            m_candidates: vec![1, 2, 3, 4],
            random_trials: 1000,
            ava: AvaConfig::default(),
        }
    }
}

/// One (model, method, seed) cell of the benchmark grid. `error` is set and
/// the scores are `None` when the cell failed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub model: String,
    pub method: String,
    pub seed: u64,
    pub gold_features: Vec<usize>,
    pub recall: Option<f64>,
    pub mfi: Option<f64>,
    pub random_recall: f64,
    pub n_test_points: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub m: usize,
    /// The resolved configuration that produced this report.
    pub config: BenchmarkConfig,
    pub cells: Vec<CellResult>,
}

impl EvalReport {
    /// Mean recall over seeds for one (model, method); `None` if every cell
    /// failed.
    pub fn mean_recall(&self, model: &str, method: &str) -> Option<f64> {
        let scores: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.model == model && c.method == method)
            .filter_map(|c| c.recall)
            .collect();
        if scores.is_empty() {
            None
        } else {
            Some(scores.iter().sum::<f64>() / scores.len() as f64)
        }
    }

    pub fn mean_random_recall(&self) -> f64 {
        let n = self.cells.len().max(1);
        self.cells.iter().map(|c| c.random_recall).sum::<f64>() / n as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "model",
            "method",
            "seed",
            "recall",
            "mfi",
            "random_recall",
            "n_test_points",
            "error",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.model.clone(),
                c.method.clone(),
                c.seed.to_string(),
                c.recall.map_or(String::new(), |v| format!("{v}")),
                c.mfi.map_or(String::new(), |v| format!("{v}")),
                format!("{}", c.random_recall),
                c.n_test_points.to_string(),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: std::io::Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Tab-separated summary: mean recall per (model, method) over seeds.
    pub fn summary_tsv(&self) -> String {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for c in &self.cells {
            let key = (c.model.clone(), c.method.clone());
            if !pairs.contains(&key) {
                pairs.push(key);
            }
        }
        let mut out = String::from("model\tmethod\tmean_recall\trandom\n");
        let random = self.mean_random_recall();
        for (model, method) in pairs {
            let mean = self
                .mean_recall(&model, &method)
                .map_or(String::from("failed"), |v| format!("{v:.4}"));
            out.push_str(&format!("{model}\t{method}\t{mean}\t{random:.4}\n"));
        }
        out
    }
}

fn attribution_for_method(
    model: &Model,
    train: &Dataset,
    x_test: &[f64],
    y_test: usize,
    method: MethodKind,
    ava: &AvaConfig,
) -> Result<Vec<f64>> {
    let output_index = crate::models::argmax(&model.predict(x_test)?);
    match method {
        MethodKind::Shap => {
            let background = train.mean_point();
            let attr = match ava.shap {
                ShapEstimator::Exact => shapley_exact(model, x_test, &background, output_index)?,
                ShapEstimator::Sampled { n_samples, seed } => {
                    shapley_sampled(model, x_test, &background, output_index, n_samples, seed)?
                }
            };
            Ok(attr.values)
        }
        MethodKind::Ig => {
            let baseline = train.mean_point();
            Ok(integrated_gradients(model, x_test, &baseline, output_index, ava.ig_steps)?.values)
        }
        MethodKind::AvaShap => Ok(crate::aggregation::ava_shap(
            model,
            train,
            x_test,
            y_test,
            Some(output_index),
            ava,
        )?
        .values),
        MethodKind::AvaIg => Ok(crate::aggregation::ava_ig(
            model,
            train,
            x_test,
            y_test,
            Some(output_index),
            ava,
        )?
        .values),
    }
}

fn run_cell_group(data: &Dataset, config: &BenchmarkConfig, spec: &ModelSpec, seed: u64, m: usize) -> Vec<CellResult> {
    let shell = |error: String| {
        config
            .methods
            .iter()
            .map(|method| CellResult {
                model: spec.name().into(),
                method: method.name().into(),
                seed,
                gold_features: vec![],
                recall: None,
                mfi: None,
                random_recall: f64::NAN,
                n_test_points: 0,
                error: Some(error.clone()),
            })
            .collect::<Vec<_>>()
    };
    let split = match split_dataset(data, config.test_fraction, seed) {
        Ok(s) => s,
        Err(e) => return shell(e.to_string()),
    };
    let gold = match gold_set(&split.train, m) {
        Ok(g) => g,
        Err(e) => return shell(e.to_string()),
    };
    let model = match train_model(&split.train, spec, seed) {
        Ok(m) => m,
        Err(e) => return shell(e.to_string()),
    };
    let n_test = config.n_test_points.min(split.test.n_points());
    let random_recall = random_baseline(data.n_features(), &gold, config.random_trials, seed);
    config
        .methods
        .iter()
        .map(|&method| {
            let mut recall = 0.0;
            let mut mfi = 0.0;
            let mut error = None;
            for t in 0..n_test {
                match attribution_for_method(
                    &model,
                    &split.train,
                    &split.test.point(t),
                    split.test.label(t),
                    method,
                    &config.ava,
                ) {
                    Ok(values) => {
                        recall += recall_at_gold(&values, &gold);
                        mfi += mean_feature_importance(&values, &gold);
                    }
                    Err(e) => {
                        error = Some(e.to_string());
                        break;
                    }
                }
            }
            let ok = error.is_none();
            CellResult {
                model: spec.name().into(),
                method: method.name().into(),
                seed,
                gold_features: gold.features.clone(),
                recall: ok.then(|| recall / n_test as f64),
                mfi: ok.then(|| mfi / n_test as f64),
                random_recall,
                n_test_points: n_test,
                error,
            }
        })
        .collect()
}

/// Run the benchmark grid: every (model, seed) pair gets its own train/test
/// split, gold set, and trained model; each configured method is scored on
/// the same test points. Cells run in parallel and the report is
/// deterministic for a fixed configuration.
pub fn run_benchmark(data: &Dataset, config: &BenchmarkConfig) -> Result<EvalReport> {
    if config.models.is_empty() || config.methods.is_empty() || config.seeds.is_empty() {
        return Err(AvaError::InvalidArgument(
            "benchmark needs at least one model, method, and seed".into(),
        ));
    }
    let m = match config.m {
        Some(m) => m,
        None => select_m(data, &config.m_candidates, 5, config.seeds[0])?,
    };
    let groups: Vec<(&ModelSpec, u64)> = config
        .models
        .iter()
        .flat_map(|spec| config.seeds.iter().map(move |&s| (spec, s)))
        .collect();
    let cells: Vec<CellResult> = groups
        .par_iter()
        .map(|(spec, seed)| run_cell_group(data, config, spec, *seed, m))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(EvalReport {
        m,
        config: config.clone(),
        cells,
    })
}
