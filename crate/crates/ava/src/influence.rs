//! Influence of training points on a test point.
//!
//! The raw influence of training point j on a test point is
//! -grad L(test)^T H^{-1} grad L(x_j), where H is the (damped) Hessian of the
//! mean training objective. The test-side solve H^{-1} grad L(test) is
//! computed once per test point and reused across all j. Models without
//! parameter gradients (kNN) supply a surrogate through
//! `Predictor::upweight_influence`.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::linalg::{axpy, dot, norm2, solve_dense};
use crate::models::{MlpConfig, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RectifyMode {
    /// rectified = |raw| (default: magnitude of influence)
    Abs,
    /// rectified = max(raw, 0)
    ClampPositive,
    /// select by signed value, clamp after selection
    SignedTopk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Exact,
    Cg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub damping: f64,
    pub tol: f64,
    /// CG iteration cap; `None` means 10 * p.
    pub max_iter: Option<usize>,
    /// Largest p the exact path will materialize.
    pub exact_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::Cg,
            damping: 0.01,
            tol: 1e-6,
            max_iter: None,
            exact_cap: 2000,
        }
    }
}

/// Signed and rectified influence values for every training point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfluenceWeights {
    pub raw: Vec<f64>,
    pub rectified: Vec<f64>,
    pub mode: RectifyMode,
    pub test_point_id: Option<usize>,
}

impl InfluenceWeights {
    pub fn new(raw: Vec<f64>, mode: RectifyMode, test_point_id: Option<usize>) -> Self {
        let rectified = rectify_weights(&raw, mode);
        InfluenceWeights {
            raw,
            rectified,
            mode,
            test_point_id,
        }
    }
}

/// The k most influential training points and their rectified weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Neighborhood {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub normalizer: f64,
}

/// Solve (H + damping I) v = b matrix-free (CG) or by materializing H
/// column-by-column (exact; the test-oracle path).
pub fn inverse_hvp<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    b: &[f64],
    config: &SolverConfig,
) -> Result<Vec<f64>> {
    let n = b.len();
    if norm2(b) == 0.0 {
        return Ok(vec![0.0; n]);
    }
    match config.method {
        SolverMethod::Exact => {
            if n > config.exact_cap {
                return Err(AvaError::InvalidArgument(format!(
                    "exact inverse-HVP capped at p <= {}, got {n}",
                    config.exact_cap
                )));
            }
            let mut h = vec![vec![0.0; n]; n];
            let mut e = vec![0.0; n];
            for i in 0..n {
                e[i] = 1.0;
                let col = p.hvp(train, &e, config.damping)?;
                e[i] = 0.0;
                for (row, &v) in h.iter_mut().zip(&col) {
                    row[i] = v;
                }
            }
            solve_dense(&h, b)
        }
        SolverMethod::Cg => {
            let max_iter = config.max_iter.unwrap_or(10 * n);
            let target = config.tol * norm2(b);
            let mut x = vec![0.0; n];
            let mut r = b.to_vec();
            let mut dir = r.clone();
            let mut rs = dot(&r, &r);
            for _ in 0..max_iter {
                if rs.sqrt() <= target {
                    return Ok(x);
                }
                let ad = p.hvp(train, &dir, config.damping)?;
                let dad = dot(&dir, &ad);
                if dad <= 0.0 {
                    return Err(AvaError::SolverFailed(format!(
                        "CG hit non-positive curvature ({dad:.3e}); increase damping"
                    )));
                }
                let alpha = rs / dad;
                axpy(alpha, &dir, &mut x);
                axpy(-alpha, &ad, &mut r);
                let rs_new = dot(&r, &r);
                let beta = rs_new / rs;
                rs = rs_new;
                for (d, &ri) in dir.iter_mut().zip(&r) {
                    *d = ri + beta * *d;
                }
            }
            if rs.sqrt() <= target {
                Ok(x)
            } else {
                Err(AvaError::SolverFailed(format!(
                    "CG did not reach tolerance in {max_iter} iterations (residual {:.3e})",
                    rs.sqrt()
                )))
            }
        }
    }
}

/// Per-test-point influence computer. The test-side solve is performed once
/// at construction and shared across all training points.
pub struct InfluenceEngine<'a, P: Predictor + ?Sized> {
    predictor: &'a P,
    train: &'a Dataset,
    /// H^{-1} grad L(test) for the parametric path
    test_solve: Option<Vec<f64>>,
    /// precomputed raw influences for the surrogate path
    surrogate: Option<Vec<f64>>,
}

impl<'a, P: Predictor + ?Sized> InfluenceEngine<'a, P> {
    pub fn new(
        predictor: &'a P,
        train: &'a Dataset,
        x_test: &[f64],
        y_test: usize,
        solver: &SolverConfig,
    ) -> Result<Self> {
        let caps = predictor.capabilities();
        if caps.param_gradient && caps.hvp {
            let g_test = predictor.grad_params(x_test, y_test)?;
            let test_solve = inverse_hvp(predictor, train, &g_test, solver)?;
            Ok(InfluenceEngine {
                predictor,
                train,
                test_solve: Some(test_solve),
                surrogate: None,
            })
        } else if let Some(raw) = predictor.upweight_influence(train, x_test, y_test) {
            Ok(InfluenceEngine {
                predictor,
                train,
                test_solve: None,
                surrogate: Some(raw?),
            })
        } else {
            Err(AvaError::CapabilityMissing {
                capability: "influence (param gradients, hvp, or a surrogate)",
                model: predictor.name(),
            })
        }
    }

    /// I_up,loss of training point `j` on the engine's test point.
    pub fn influence(&self, j: usize) -> Result<f64> {
        if let Some(raw) = &self.surrogate {
            return Ok(raw[j]);
        }
        let v = self.test_solve.as_ref().unwrap();
        let g_j = self
            .predictor
            .grad_params(&self.train.point(j), self.train.label(j))?;
        Ok(-dot(v, &g_j))
    }

    pub fn influence_all(&self) -> Result<Vec<f64>> {
        (0..self.train.n_points()).map(|j| self.influence(j)).collect()
    }
}

/// One-shot form of the engine; prefer the engine when looping over j.
pub fn influence_up_loss<P: Predictor + ?Sized>(
    p: &P,
    train: &Dataset,
    j: usize,
    x_test: &[f64],
    y_test: usize,
    solver: &SolverConfig,
) -> Result<f64> {
    InfluenceEngine::new(p, train, x_test, y_test, solver)?.influence(j)
}

pub fn rectify_weights(raw: &[f64], mode: RectifyMode) -> Vec<f64> {
    match mode {
        RectifyMode::Abs => raw.iter().map(|v| v.abs()).collect(),
        RectifyMode::ClampPositive => raw.iter().map(|v| v.max(0.0)).collect(),
        // rectification happens after selection
        RectifyMode::SignedTopk => raw.to_vec(),
    }
}

/// Top-k selection by rectified weight (signed value for `SignedTopk`),
/// ties broken by lower training index.
pub fn select_neighborhood(
    weights: &InfluenceWeights,
    k: usize,
    uniform_fallback: bool,
) -> Result<Neighborhood> {
    let n = weights.raw.len();
    if k == 0 || k > n {
        return Err(AvaError::InvalidArgument(format!(
            "k must lie in [1, {n}], got {k}"
        )));
    }
    let key: &[f64] = match weights.mode {
        RectifyMode::SignedTopk => &weights.raw,
        _ => &weights.rectified,
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]).then(a.cmp(&b)));
    let indices: Vec<usize> = order[..k].to_vec();
    let mut selected: Vec<f64> = indices
        .iter()
        .map(|&j| match weights.mode {
            RectifyMode::SignedTopk => weights.raw[j].max(0.0),
            _ => weights.rectified[j],
        })
        .collect();
    let mut normalizer: f64 = selected.iter().sum();
    if normalizer <= 0.0 {
        if !uniform_fallback {
            return Err(AvaError::ZeroWeightNeighborhood);
        }
        selected = vec![1.0 / k as f64; k];
        normalizer = 1.0;
    }
    Ok(Neighborhood {
        indices,
        weights: selected,
        normalizer,
    })
}

/// Leave-one-out retraining oracle: exact change in test loss caused by
/// removing training point `j` and retraining from the same initialization.
type LossAt<'a> = Box<dyn Fn(&[f64], usize) -> Result<f64> + 'a>;

pub struct LooOracle<'a> {
    train: &'a Dataset,
    config: MlpConfig,
    base_loss_at: LossAt<'a>,
}

impl<'a> LooOracle<'a> {
    pub fn new(train: &'a Dataset, config: &MlpConfig) -> Result<Self> {
        let base = crate::models::train_mlp(train, config)?;
        Ok(LooOracle {
            train,
            config: config.clone(),
            base_loss_at: Box::new(move |x, y| base.loss(x, y)),
        })
    }

    /// L(f_{-j}, x_test) - L(f, x_test)
    pub fn delta(&self, j: usize, x_test: &[f64], y_test: usize) -> Result<f64> {
        let reduced = self.train.without_point(j);
        let retrained = crate::models::train_mlp(&reduced, &self.config)?;
        Ok(retrained.loss(x_test, y_test)? - (self.base_loss_at)(x_test, y_test)?)
    }
}

pub fn loo_influence_oracle(
    train: &Dataset,
    config: &MlpConfig,
    j: usize,
    x_test: &[f64],
    y_test: usize,
) -> Result<f64> {
    LooOracle::new(train, config)?.delta(j, x_test, y_test)
}

/// One row per training point for the audit CSV dump.
pub fn write_influence_csv<W: std::io::Write>(
    out: W,
    test_id: usize,
    weights: &InfluenceWeights,
    neighborhood: &Neighborhood,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["test_id", "train_id", "raw_influence", "rectified_weight", "selected"])?;
    for j in 0..weights.raw.len() {
        let selected = neighborhood.indices.contains(&j);
        w.write_record([
            test_id.to_string(),
            j.to_string(),
            format!("{}", weights.raw[j]),
            format!("{}", weights.rectified[j]),
            (selected as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic;
    use crate::models::{Capabilities, Mlp};
    use ndarray::Array2;

    /// Quadratic objective L(theta) = 1/2 theta^T A theta; constant Hessian A.
    struct Quadratic {
        a: Vec<Vec<f64>>,
        theta: Vec<f64>,
    }

    impl Predictor for Quadratic {
        fn n_features(&self) -> usize {
            1
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn name(&self) -> &'static str {
            "quadratic"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                input_gradient: false,
                param_gradient: true,
                hvp: true,
            }
        }
        fn predict(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.5, 0.5])
        }
        fn n_params(&self) -> usize {
            self.theta.len()
        }
        fn grad_params(&self, _x: &[f64], _y: usize) -> Result<Vec<f64>> {
            Ok(self
                .a
                .iter()
                .map(|row| dot(row, &self.theta))
                .collect())
        }
        fn hvp(&self, _data: &Dataset, v: &[f64], damping: f64) -> Result<Vec<f64>> {
            let mut out: Vec<f64> = self.a.iter().map(|row| dot(row, v)).collect();
            axpy(damping, v, &mut out);
            Ok(out)
        }
    }

    fn dummy_dataset() -> Dataset {
        let features = Array2::from_shape_vec((1, 2), vec![0.0, 1.0]).unwrap();
        Dataset::new(
            features,
            vec![0, 1],
            vec!["x".into()],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap()
    }

    fn solver(method: SolverMethod, damping: f64) -> SolverConfig {
        SolverConfig {
            method,
            damping,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn diagonal_solve() {
        let q = Quadratic {
            a: vec![vec![2.0, 0.0], vec![0.0, 4.0]],
            theta: vec![0.0, 0.0],
        };
        let data = dummy_dataset();
        for method in [SolverMethod::Exact, SolverMethod::Cg] {
            let v = inverse_hvp(&q, &data, &[2.0, 4.0], &solver(method, 0.0)).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-9);
            assert!((v[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_is_zero_in_zero_iterations() {
        let q = Quadratic {
            a: vec![vec![2.0]],
            theta: vec![1.0],
        };
        let cfg = SolverConfig {
            max_iter: Some(0),
            ..solver(SolverMethod::Cg, 0.0)
        };
        let v = inverse_hvp(&q, &dummy_dataset(), &[0.0], &cfg).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn cg_matches_exact_on_random_spd() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let p = 50;
        // A = M^T M + I is SPD
        let m: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut a = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..p).map(|k| m[k][i] * m[k][j]).sum::<f64>()
                    + if i == j { 1.0 } else { 0.0 };
            }
        }
        let q = Quadratic {
            a,
            theta: vec![0.0; p],
        };
        let b: Vec<f64> = (0..p).map(|i| ((i + 1) as f64 * 0.37).sin()).collect();
        let data = dummy_dataset();
        let exact = inverse_hvp(&q, &data, &b, &solver(SolverMethod::Exact, 0.0)).unwrap();
        let cg_cfg = SolverConfig {
            tol: 1e-10,
            ..solver(SolverMethod::Cg, 0.0)
        };
        let cg = inverse_hvp(&q, &data, &b, &cg_cfg).unwrap();
        let scale = norm2(&exact);
        let diff: Vec<f64> = exact.iter().zip(&cg).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) / scale < 1e-6);
    }

    #[test]
    fn damping_drives_solution_to_zero() {
        let q = Quadratic {
            a: vec![vec![3.0, 1.0], vec![1.0, 2.0]],
            theta: vec![0.0, 0.0],
        };
        let data = dummy_dataset();
        let mut last = f64::INFINITY;
        for damping in [0.0, 1.0, 100.0, 1e6] {
            let v = inverse_hvp(&q, &data, &[1.0, 1.0], &solver(SolverMethod::Exact, damping))
                .unwrap();
            let n = norm2(&v);
            assert!(n < last);
            last = n;
        }
        assert!(last < 1e-5);
    }

    /// 1-parameter regression f(x) = theta * x with squared loss.
    struct Linear1D {
        theta: f64,
        xs: Vec<f64>,
        ys: Vec<f64>,
    }

    impl Predictor for Linear1D {
        fn n_features(&self) -> usize {
            1
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn name(&self) -> &'static str {
            "linear1d"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                input_gradient: false,
                param_gradient: true,
                hvp: true,
            }
        }
        fn predict(&self, _x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.5, 0.5])
        }
        fn n_params(&self) -> usize {
            1
        }
        fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
            // y encodes an index into ys for this toy model
            let target = self.ys[y];
            Ok((self.theta * x[0] - target).powi(2))
        }
        fn grad_params(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
            let target = self.ys[y];
            Ok(vec![2.0 * (self.theta * x[0] - target) * x[0]])
        }
        fn hvp(&self, _data: &Dataset, v: &[f64], damping: f64) -> Result<Vec<f64>> {
            // H = mean(2 x^2)
            let h = self.xs.iter().map(|x| 2.0 * x * x).sum::<f64>() / self.xs.len() as f64;
            Ok(vec![(h + damping) * v[0]])
        }
    }

    #[test]
    fn hand_worked_one_parameter_influence() {
        // train {(1,1),(2,2)}, theta = 1 (optimal); test point (1, 2)
        let model = Linear1D {
            theta: 1.0,
            xs: vec![1.0, 2.0],
            ys: vec![1.0, 2.0, 2.0], // targets; index 2 is the test target
        };
        let features = Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
        let train = Dataset::new(
            features,
            vec![0, 1],
            vec!["x".into()],
            vec!["t0".into(), "t1".into(), "t2".into()],
            None,
        )
        .unwrap();
        // H = mean(2x^2) = 5; grad at test (1, target 2) = 2(1-2)*1 = -2;
        // grad at train j=0 is 0 (perfectly fit) -> influence 0
        let cfg = solver(SolverMethod::Exact, 0.0);
        let inf = influence_up_loss(&model, &train, 0, &[1.0], 2, &cfg).unwrap();
        assert!(inf.abs() < 1e-12);
        let inf1 = influence_up_loss(&model, &train, 1, &[1.0], 2, &cfg).unwrap();
        assert!(inf1.abs() < 1e-12); // (2,2) also perfectly fit at theta=1
    }

    #[test]
    fn zero_train_gradient_means_zero_influence_and_bilinearity() {
        let model = Linear1D {
            theta: 0.8,
            xs: vec![1.0, 2.0],
            ys: vec![1.0, 2.0, 2.0],
        };
        let features = Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
        let train = Dataset::new(
            features,
            vec![0, 1],
            vec!["x".into()],
            vec!["t0".into(), "t1".into(), "t2".into()],
            None,
        )
        .unwrap();
        let cfg = solver(SolverMethod::Exact, 0.0);
        let engine = InfluenceEngine::new(&model, &train, &[1.0], 2, &cfg).unwrap();
        let i0 = engine.influence(0).unwrap();
        // influence is linear in the training-point gradient: doubling the
        // residual via a model with doubled gradient doubles the value
        let g0 = model.grad_params(&[1.0], 0).unwrap()[0];
        assert!(g0 != 0.0);
        let v = inverse_hvp(&model, &train, &model.grad_params(&[1.0], 2).unwrap(), &cfg).unwrap();
        assert!((i0 - (-v[0] * g0)).abs() < 1e-12);
        assert!(((-v[0] * (2.0 * g0)) - 2.0 * i0).abs() < 1e-12);
    }

    #[test]
    fn caching_matches_fresh_computation_bitwise() {
        let data = synthetic::gaussian_blobs(10, &[vec![0.0, 0.0], vec![2.0, 2.0]], 0.6, 3);
        let mlp = Mlp::new_seeded(
            vec![2, 4, 2],
            crate::models::Activation::Sigmoid,
            crate::models::LossKind::CrossEntropy,
            7,
        );
        // heavy damping keeps the untrained network's Hessian positive definite
        let cfg = solver(SolverMethod::Cg, 1.0);
        let x_test = [1.0, 1.0];
        let engine = InfluenceEngine::new(&mlp, &data, &x_test, 1, &cfg).unwrap();
        for j in 0..data.n_points() {
            let cached = engine.influence(j).unwrap();
            let fresh = influence_up_loss(&mlp, &data, j, &x_test, 1, &cfg).unwrap();
            assert_eq!(cached.to_bits(), fresh.to_bits());
        }
    }

    #[test]
    fn rectify_modes() {
        let raw = [-1.0, 2.0, -3.0];
        assert_eq!(rectify_weights(&raw, RectifyMode::Abs), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            rectify_weights(&raw, RectifyMode::ClampPositive),
            vec![0.0, 2.0, 0.0]
        );
        assert_eq!(rectify_weights(&[0.0; 3], RectifyMode::Abs), vec![0.0; 3]);
    }

    #[test]
    fn select_topk() {
        let w = InfluenceWeights::new(vec![0.1, 0.5, 0.3, 0.5], RectifyMode::Abs, None);
        let n = select_neighborhood(&w, 2, false).unwrap();
        assert_eq!(n.indices, vec![1, 3]);
        assert!((n.normalizer - 1.0).abs() < 1e-12);
    }

    #[test]
    fn select_tiebreak_lower_index() {
        let w = InfluenceWeights::new(vec![0.5, 0.5, 0.1], RectifyMode::Abs, None);
        let n = select_neighborhood(&w, 1, false).unwrap();
        assert_eq!(n.indices, vec![0]);
    }

    #[test]
    fn select_all_points() {
        let w = InfluenceWeights::new(vec![0.2, 0.3, 0.5], RectifyMode::Abs, None);
        let n = select_neighborhood(&w, 3, false).unwrap();
        assert_eq!(n.indices.len(), 3);
        assert!((n.normalizer - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_error_and_fallback() {
        let w = InfluenceWeights::new(vec![0.0; 4], RectifyMode::Abs, None);
        assert!(matches!(
            select_neighborhood(&w, 2, false),
            Err(AvaError::ZeroWeightNeighborhood)
        ));
        let n = select_neighborhood(&w, 2, true).unwrap();
        assert_eq!(n.weights, vec![0.5, 0.5]);
        assert_eq!(n.normalizer, 1.0);
    }

    #[test]
    fn signed_topk_selects_by_signed_value() {
        let w = InfluenceWeights::new(vec![-5.0, 1.0, 0.5], RectifyMode::SignedTopk, None);
        let n = select_neighborhood(&w, 2, false).unwrap();
        assert_eq!(n.indices, vec![1, 2]);
        assert_eq!(n.weights, vec![1.0, 0.5]);
    }

    #[test]
    fn selection_is_subset_argmax() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = 10;
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = InfluenceWeights::new(raw, RectifyMode::Abs, None);
            let k = rng.random_range(1..=n);
            let sel = select_neighborhood(&w, k, false).unwrap();
            // brute force over all size-k subsets
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != k {
                    continue;
                }
                let s: f64 = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| w.rectified[i])
                    .sum();
                best = best.max(s);
            }
            assert!((sel.normalizer - best).abs() < 1e-12);
        }
    }

    #[test]
    fn loo_removing_fit_point_changes_little() {
        // well-separated blobs: every point is well fit after training
        let data = synthetic::gaussian_blobs(15, &[vec![-2.0, -2.0], vec![2.0, 2.0]], 0.4, 5);
        let config = MlpConfig {
            hidden: vec![],
            epochs: 800,
            learning_rate: 0.05,
            seed: 3,
            ..MlpConfig::default()
        };
        let oracle = LooOracle::new(&data, &config).unwrap();
        let delta = oracle.delta(0, &[2.0, 2.0], 1).unwrap();
        assert!(delta.abs() < 1e-2, "delta = {delta}");
    }

    #[test]
    fn loo_duplicate_less_important_than_unique() {
        // class-0 cluster plus a duplicated pair; the unique boundary point
        // of class 1 matters more than either duplicate
        let features = Array2::from_shape_vec(
            (1, 6),
            vec![-2.0, -2.0, -1.8, 1.0, 1.0, 0.8],
        )
        .unwrap();
        let data = Dataset::new(
            features,
            vec![0, 0, 0, 1, 1, 1],
            vec!["x".into()],
            vec!["a".into(), "b".into()],
            None,
        )
        .unwrap();
        let config = MlpConfig {
            hidden: vec![],
            epochs: 1500,
            learning_rate: 0.05,
            seed: 1,
            ..MlpConfig::default()
        };
        let oracle = LooOracle::new(&data, &config).unwrap();
        let dup = oracle.delta(3, &[0.5], 1).unwrap();
        let unique = oracle.delta(5, &[0.5], 1).unwrap();
        // removing one of a duplicated pair matters less than removing the
        // unique support-region point
        assert!(dup.abs() < unique.abs(), "dup {dup} unique {unique}");
    }
}
