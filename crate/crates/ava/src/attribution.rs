//! Per-point feature attribution: Shapley values (exact enumeration and
//! permutation sampling), Harsanyi dividends, and Integrated Gradients.
//!
//! Coalition values use substitution semantics: absent features take the
//! background vector's values (the training mean in the evaluation pipeline).

use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{AvaError, Result};
use crate::models::Predictor;

/// Largest d the exact enumeration will accept.
pub const SHAPLEY_EXACT_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMethod {
    ShapExact,
    ShapSampled,
    Ig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AttrMetadata {
    pub steps: Option<usize>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub completeness_residual: Option<f64>,
    pub std_errors: Option<Vec<f64>>,
}

/// A length-d attribution vector with its provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attribution {
    pub values: Vec<f64>,
    pub method: AttributionMethod,
    pub point_id: Option<usize>,
    /// The baseline (IG) or background (SHAP) the attribution is relative to.
    pub baseline: Vec<f64>,
    pub metadata: AttrMetadata,
}

impl Attribution {
    fn check_finite(self) -> Result<Attribution> {
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(AvaError::Invariant("attribution has non-finite values".into()));
        }
        Ok(self)
    }
}

/// A coalition value function over feature subsets (bitmask encoded).
pub trait Game {
    fn n_players(&self) -> usize;
    fn value(&self, mask: u64) -> Result<f64>;
}

/// Fully enumerated game: `values[mask]` for every subset.
#[derive(Debug, Clone)]
pub struct TabularGame {
    pub n: usize,
    pub values: Vec<f64>,
}

impl Game for TabularGame {
    fn n_players(&self) -> usize {
        self.n
    }
    fn value(&self, mask: u64) -> Result<f64> {
        Ok(self.values[mask as usize])
    }
}

/// Coalition value via substitution: features in the mask come from `x`,
/// the rest from `background`. Evaluations are memoized.
pub struct MaskedGame<'a, P: Predictor + ?Sized> {
    predictor: &'a P,
    x: &'a [f64],
    background: &'a [f64],
    output_index: usize,
    cache: RefCell<HashMap<u64, f64>>,
}

impl<'a, P: Predictor + ?Sized> MaskedGame<'a, P> {
    pub fn new(
        predictor: &'a P,
        x: &'a [f64],
        background: &'a [f64],
        output_index: usize,
    ) -> Result<Self> {
        if x.len() != predictor.n_features() || background.len() != x.len() {
            return Err(AvaError::DimensionMismatch {
                expected: predictor.n_features(),
                got: x.len().min(background.len()),
            });
        }
        Ok(MaskedGame {
            predictor,
            x,
            background,
            output_index,
            cache: RefCell::new(HashMap::new()),
        })
    }
}

impl<'a, P: Predictor + ?Sized> Game for MaskedGame<'a, P> {
    fn n_players(&self) -> usize {
        self.x.len()
    }

    fn value(&self, mask: u64) -> Result<f64> {
        if let Some(&v) = self.cache.borrow().get(&mask) {
            return Ok(v);
        }
        let mut point = self.background.to_vec();
        for (i, p) in point.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *p = self.x[i];
            }
        }
        let v = self.predictor.predict(&point)?[self.output_index];
        self.cache.borrow_mut().insert(mask, v);
        Ok(v)
    }
}

fn binom(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Exact Shapley values of a fully enumerated game.
pub fn shapley_exact_game(game: &TabularGame) -> Vec<f64> {
    let d = game.n;
    // weight of a subset of size s: s!(d-s-1)!/d! = 1/(d * C(d-1, s))
    let weights: Vec<f64> = (0..d).map(|s| 1.0 / (d as f64 * binom(d - 1, s))).collect();
    let mut phi = vec![0.0; d];
    for mask in 0..(1u64 << d) {
        let s = mask.count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            let bit = 1u64 << i;
            if mask & bit == 0 {
                *p += weights[s] * (game.values[(mask | bit) as usize] - game.values[mask as usize]);
            }
        }
    }
    phi
}

/// Enumerate every coalition value of a game into a [`TabularGame`].
pub fn enumerate_game<G: Game + ?Sized>(game: &G) -> Result<TabularGame> {
    let d = game.n_players();
    if d > SHAPLEY_EXACT_CAP {
        return Err(AvaError::InvalidArgument(format!(
            "exact enumeration capped at d <= {SHAPLEY_EXACT_CAP}, got {d}; use shapley_sampled"
        )));
    }
    let values = (0..(1u64 << d)).map(|m| game.value(m)).collect::<Result<Vec<f64>>>()?;
    Ok(TabularGame { n: d, values })
}

/// Exact Shapley attribution of a prediction via powerset enumeration.
pub fn shapley_exact<P: Predictor + ?Sized>(
    p: &P,
    x: &[f64],
    background: &[f64],
    output_index: usize,
) -> Result<Attribution> {
    let game = MaskedGame::new(p, x, background, output_index)?;
    let table = enumerate_game(&game)?;
    Attribution {
        values: shapley_exact_game(&table),
        method: AttributionMethod::ShapExact,
        point_id: None,
        baseline: background.to_vec(),
        metadata: AttrMetadata::default(),
    }
    .check_finite()
}

/// Unbiased permutation-sampling Shapley estimator with per-feature
/// standard errors; deterministic under the seed.
pub fn shapley_sampled<P: Predictor + ?Sized>(
    p: &P,
    x: &[f64],
    background: &[f64],
    output_index: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    if n_samples == 0 {
        return Err(AvaError::InvalidArgument("n_samples must be >= 1".into()));
    }
    let game = MaskedGame::new(p, x, background, output_index)?;
    let d = x.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..d).collect();
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for t in 1..=n_samples {
        order.shuffle(&mut rng);
        let mut mask = 0u64;
        let mut prev = game.value(0)?;
        for &i in &order {
            mask |= 1 << i;
            let cur = game.value(mask)?;
            let marginal = cur - prev;
            prev = cur;
            // Welford update
            let delta = marginal - mean[i];
            mean[i] += delta / t as f64;
            m2[i] += delta * (marginal - mean[i]);
        }
    }
    let std_errors = if n_samples > 1 {
        Some(
            m2.iter()
                .map(|v| (v / (n_samples as f64 - 1.0) / n_samples as f64).sqrt())
                .collect(),
        )
    } else {
        None
    };
    Attribution {
        values: mean,
        method: AttributionMethod::ShapSampled,
        point_id: None,
        baseline: background.to_vec(),
        metadata: AttrMetadata {
            n_samples: Some(n_samples),
            seed: Some(seed),
            std_errors,
            ..AttrMetadata::default()
        },
    }
    .check_finite()
}

/// Harsanyi dividend of subset `s_mask`: the Moebius transform of the
/// coalition value, sum_{T subseteq S} (-1)^{|S \ T|} v(T).
pub fn harsanyi_dividend<G: Game + ?Sized>(game: &G, s_mask: u64) -> Result<f64> {
    let size = s_mask.count_ones() as usize;
    if size > SHAPLEY_EXACT_CAP {
        return Err(AvaError::InvalidArgument(format!(
            "dividend enumeration capped at |S| <= {SHAPLEY_EXACT_CAP}"
        )));
    }
    let mut acc = 0.0;
    let mut sub = s_mask;
    loop {
        let sign = if (size - sub.count_ones() as usize).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += sign * game.value(sub)?;
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & s_mask;
    }
    Ok(acc)
}

/// Shapley values reconstructed from dividends: phi_i = sum_{S ni i} D(S)/|S|.
pub fn shapley_from_dividends<G: Game + ?Sized>(game: &G) -> Result<Vec<f64>> {
    let d = game.n_players();
    let mut phi = vec![0.0; d];
    for mask in 1..(1u64 << d) {
        let dividend = harsanyi_dividend(game, mask)?;
        let size = mask.count_ones() as f64;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                *p += dividend / size;
            }
        }
    }
    Ok(phi)
}

/// Integrated Gradients with midpoint quadrature along the straight path
/// from `baseline` to `x`. The completeness residual
/// |sum_i g_i - (f(x) - f(baseline))| is recorded in the metadata.
pub fn integrated_gradients<P: Predictor + ?Sized>(
    p: &P,
    x: &[f64],
    baseline: &[f64],
    output_index: usize,
    steps: usize,
) -> Result<Attribution> {
    if steps == 0 {
        return Err(AvaError::InvalidArgument("steps must be >= 1".into()));
    }
    if baseline.len() != x.len() {
        return Err(AvaError::DimensionMismatch {
            expected: x.len(),
            got: baseline.len(),
        });
    }
    let d = x.len();
    let mut acc = vec![0.0; d];
    for t in 0..steps {
        let alpha = (t as f64 + 0.5) / steps as f64;
        let point: Vec<f64> = baseline
            .iter()
            .zip(x)
            .map(|(&b, &xi)| b + alpha * (xi - b))
            .collect();
        let grad = p.grad_input(&point, output_index)?;
        crate::linalg::axpy(1.0, &grad, &mut acc);
    }
    let values: Vec<f64> = (0..d)
        .map(|i| (x[i] - baseline[i]) * acc[i] / steps as f64)
        .collect();
    let f_x = p.smooth_output(x, output_index)?;
    let f_b = p.smooth_output(baseline, output_index)?;
    let residual = (values.iter().sum::<f64>() - (f_x - f_b)).abs();
    Attribution {
        values,
        method: AttributionMethod::Ig,
        point_id: None,
        baseline: baseline.to_vec(),
        metadata: AttrMetadata {
            steps: Some(steps),
            completeness_residual: Some(residual),
            ..AttrMetadata::default()
        },
    }
    .check_finite()
}

/// CSV dump: one row per feature.
pub fn write_attribution_csv<W: std::io::Write>(
    out: W,
    point_id: usize,
    feature_names: &[String],
    attr: &Attribution,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point_id", "method", "feature_name", "value"])?;
    let method = match attr.method {
        AttributionMethod::ShapExact => "shap_exact",
        AttributionMethod::ShapSampled => "shap_sampled",
        AttributionMethod::Ig => "ig",
    };
    for (name, v) in feature_names.iter().zip(&attr.values) {
        w.write_record([point_id.to_string(), method.into(), name.clone(), format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod test_models {
    use super::*;
    use crate::models::Capabilities;

    /// Raw linear scorer f(x) = w . x exposed as output 0.
    pub struct LinearModel {
        pub w: Vec<f64>,
    }

    impl Predictor for LinearModel {
        fn n_features(&self) -> usize {
            self.w.len()
        }
        fn n_classes(&self) -> usize {
            1
        }
        fn name(&self) -> &'static str {
            "linear"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                input_gradient: true,
                param_gradient: false,
                hvp: false,
            }
        }
        fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![crate::linalg::dot(&self.w, x)])
        }
        fn grad_input(&self, _x: &[f64], _i: usize) -> Result<Vec<f64>> {
            Ok(self.w.clone())
        }
    }

    /// f(x) = x0 * x1
    pub struct ProductModel;

    impl Predictor for ProductModel {
        fn n_features(&self) -> usize {
            2
        }
        fn n_classes(&self) -> usize {
            1
        }
        fn name(&self) -> &'static str {
            "product"
        }
        fn capabilities(&self) -> Capabilities {
            Capabilities {
                input_gradient: true,
                param_gradient: false,
                hvp: false,
            }
        }
        fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![x[0] * x[1]])
        }
        fn grad_input(&self, x: &[f64], _i: usize) -> Result<Vec<f64>> {
            Ok(vec![x[1], x[0]])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_models::{LinearModel, ProductModel};
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_game(d: usize, rng: &mut ChaCha8Rng) -> TabularGame {
        TabularGame {
            n: d,
            values: (0..(1usize << d)).map(|_| rng.random_range(-2.0..2.0)).collect(),
        }
    }

    #[test]
    fn linear_model_exact_closed_form() {
        let model = LinearModel {
            w: vec![1.5, -2.0, 0.5],
        };
        let x = [2.0, 1.0, -1.0];
        let mu = [0.5, 0.5, 0.5];
        let attr = shapley_exact(&model, &x, &mu, 0).unwrap();
        for i in 0..3 {
            assert!((attr.values[i] - model.w[i] * (x[i] - mu[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn product_game_splits_evenly() {
        let attr = shapley_exact(&ProductModel, &[1.0, 1.0], &[0.0, 0.0], 0).unwrap();
        assert!((attr.values[0] - 0.5).abs() < 1e-12);
        assert!((attr.values[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn x_equal_background_gives_zero() {
        let model = LinearModel {
            w: vec![3.0, -1.0],
        };
        let attr = shapley_exact(&model, &[0.7, 0.7], &[0.7, 0.7], 0).unwrap();
        assert!(attr.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn sampled_linear_matches_closed_form() {
        let model = LinearModel {
            w: vec![1.0, 2.0, -1.0, 0.3],
        };
        let x = [1.0, -1.0, 0.5, 2.0];
        let mu = [0.0; 4];
        let attr = shapley_sampled(&model, &x, &mu, 0, 50, 7).unwrap();
        // linear games have zero-variance marginals: exact at any sample count
        for (i, &v) in attr.values.iter().enumerate() {
            assert!((v - model.w[i] * x[i]).abs() < 1e-12);
            assert!(attr.metadata.std_errors.as_ref().unwrap()[i] < 1e-12);
        }
    }

    #[test]
    fn sampled_is_seed_deterministic() {
        let a = shapley_sampled(&ProductModel, &[1.0, 2.0], &[0.0, 0.0], 0, 1, 42).unwrap();
        let b = shapley_sampled(&ProductModel, &[1.0, 2.0], &[0.0, 0.0], 0, 1, 42).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn dividend_base_case_singleton() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_game(4, &mut rng);
        let d = harsanyi_dividend(&g, 0b0100).unwrap();
        assert!((d - (g.values[0b0100] - g.values[0])).abs() < 1e-12);
    }

    #[test]
    fn additive_game_has_no_interactions() {
        let c = [0.5, -1.0, 2.0];
        let values: Vec<f64> = (0..8u64)
            .map(|m| (0..3).filter(|i| m & (1 << i) != 0).map(|i| c[i]).sum())
            .collect();
        let g = TabularGame { n: 3, values };
        for mask in 0..8u64 {
            if mask.count_ones() >= 2 {
                assert!(harsanyi_dividend(&g, mask).unwrap().abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_dividend_concentrates_on_pair() {
        let game = MaskedGame::new(&ProductModel, &[1.0, 1.0], &[0.0, 0.0], 0).unwrap();
        assert!((harsanyi_dividend(&game, 0b11).unwrap() - 1.0).abs() < 1e-12);
        assert!(harsanyi_dividend(&game, 0b01).unwrap().abs() < 1e-12);
        assert!(harsanyi_dividend(&game, 0b10).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shapley_matches_dividend_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=6 {
            let g = random_game(d, &mut rng);
            let phi = shapley_exact_game(&g);
            let phi_div = shapley_from_dividends(&g).unwrap();
            for (a, b) in phi.iter().zip(&phi_div) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn efficiency_symmetry_null_player() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let g = random_game(5, &mut rng);
            let phi = shapley_exact_game(&g);
            let total: f64 = phi.iter().sum();
            assert!((total - (g.values[31] - g.values[0])).abs() < 1e-10);
        }
        // null player: feature 2 never changes v
        let mut g = random_game(3, &mut rng);
        for mask in 0..8usize {
            if mask & 0b100 != 0 {
                g.values[mask] = g.values[mask & 0b011];
            }
        }
        let phi = shapley_exact_game(&g);
        assert_eq!(phi[2], 0.0);
    }

    #[test]
    fn additivity_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g1 = random_game(4, &mut rng);
        let g2 = random_game(4, &mut rng);
        let sum = TabularGame {
            n: 4,
            values: g1.values.iter().zip(&g2.values).map(|(a, b)| a + b).collect(),
        };
        let scaled = TabularGame {
            n: 4,
            values: g1.values.iter().map(|v| -2.5 * v).collect(),
        };
        let p1 = shapley_exact_game(&g1);
        let p2 = shapley_exact_game(&g2);
        let ps = shapley_exact_game(&sum);
        let pc = shapley_exact_game(&scaled);
        for (i, &s) in ps.iter().enumerate() {
            assert!((s - (p1[i] + p2[i])).abs() < 1e-10);
            assert!((pc[i] - (-2.5 * p1[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn ig_exact_on_linear_models() {
        let model = LinearModel {
            w: vec![2.0, -1.0],
        };
        for steps in [1, 3, 64] {
            let attr = integrated_gradients(&model, &[1.0, 2.0], &[0.5, -0.5], 0, steps).unwrap();
            assert!((attr.values[0] - 2.0 * 0.5).abs() < 1e-12);
            assert!((attr.values[1] - -2.5).abs() < 1e-12);
            assert!(attr.metadata.completeness_residual.unwrap() < 1e-12);
        }
    }

    #[test]
    fn ig_product_closed_form() {
        let (a, b) = (3.0, -2.0);
        // closed form: integral of a * alpha*b over [0,1] = ab/2 per coordinate
        let attr = integrated_gradients(&ProductModel, &[a, b], &[0.0, 0.0], 0, 1).unwrap();
        assert!((attr.values[0] - a * b / 2.0).abs() < 1e-12);
        assert!((attr.values[1] - a * b / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ig_zero_path() {
        let attr = integrated_gradients(&ProductModel, &[1.0, 1.0], &[1.0, 1.0], 0, 16).unwrap();
        assert!(attr.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn exact_cap_enforced() {
        let model = LinearModel { w: vec![1.0; 21] };
        let x = vec![1.0; 21];
        let err = shapley_exact(&model, &x, &[0.0; 21], 0).unwrap_err();
        assert!(err.to_string().contains("shapley_sampled"));
    }
}
