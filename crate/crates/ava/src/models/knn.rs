//! k-nearest-neighbor classifier with a smooth soft-kNN surrogate.
//!
//! Hard predictions are majority votes (distance ties broken by training
//! index, class ties by smallest class index). The surrogate replaces the
//! vote with distance-weighted softmax weights at temperature `tau`; it
//! supplies input gradients for IG and an upweighting derivative that stands
//! in for parameter-space influence, since the model has no parameters.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::linalg::{softmax, squared_distance};
use crate::models::{check_dim, Capabilities, Predictor};

pub const DEFAULT_TAU: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Knn {
    pub n_neighbors: usize,
    pub tau: f64,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<usize>,
    n_classes: usize,
}

pub fn train_knn(train: &Dataset, n_neighbors: usize) -> Result<Knn> {
    if n_neighbors == 0 || n_neighbors > train.n_points() {
        return Err(AvaError::InvalidArgument(format!(
            "n_neighbors must lie in [1, {}], got {n_neighbors}",
            train.n_points()
        )));
    }
    Ok(Knn {
        n_neighbors,
        tau: DEFAULT_TAU,
        train_x: (0..train.n_points()).map(|j| train.point(j)).collect(),
        train_y: train.labels().to_vec(),
        n_classes: train.n_classes(),
    })
}

impl Knn {
    /// softmax(-||x - x_j||^2 / tau) over all training points
    fn soft_weights(&self, x: &[f64]) -> Vec<f64> {
        let scores: Vec<f64> = self
            .train_x
            .iter()
            .map(|xj| -squared_distance(x, xj) / self.tau)
            .collect();
        softmax(&scores)
    }

    pub fn soft_predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        let w = self.soft_weights(x);
        let mut p = vec![0.0; self.n_classes];
        for (wj, &yj) in w.iter().zip(&self.train_y) {
            p[yj] += wj;
        }
        Ok(p)
    }

    /// Hard-vote label among the n nearest neighbors.
    pub fn hard_label(&self, x: &[f64]) -> usize {
        crate::models::argmax(&self.vote_fractions(x))
    }

    fn vote_fractions(&self, x: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..self.train_x.len()).collect();
        order.sort_by(|&a, &b| {
            squared_distance(x, &self.train_x[a])
                .total_cmp(&squared_distance(x, &self.train_x[b]))
                .then(a.cmp(&b))
        });
        let mut votes = vec![0.0; self.n_classes];
        for &j in order.iter().take(self.n_neighbors) {
            votes[self.train_y[j]] += 1.0;
        }
        let total: f64 = votes.iter().sum();
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}

impl Predictor for Knn {
    fn n_features(&self) -> usize {
        self.train_x[0].len()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn name(&self) -> &'static str {
        "knn"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            input_gradient: true, // via the soft surrogate
            param_gradient: false,
            hvp: false,
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(self.vote_fractions(x))
    }

    fn smooth_output(&self, x: &[f64], output_index: usize) -> Result<f64> {
        Ok(self.soft_predict(x)?[output_index])
    }

    fn grad_input(&self, x: &[f64], output_index: usize) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        if output_index >= self.n_classes {
            return Err(AvaError::InvalidArgument(format!(
                "output index {output_index} out of range"
            )));
        }
        let w = self.soft_weights(x);
        let p_c: f64 = w
            .iter()
            .zip(&self.train_y)
            .filter(|(_, &y)| y == output_index)
            .map(|(wj, _)| wj)
            .sum();
        // dp_c/dx = sum_j w_j (1[y_j=c] - p_c) * ds_j/dx, s_j = -||x-x_j||^2/tau
        let mut g = vec![0.0; x.len()];
        for (j, xj) in self.train_x.iter().enumerate() {
            let ind = if self.train_y[j] == output_index { 1.0 } else { 0.0 };
            let coeff = w[j] * (ind - p_c) * (-2.0 / self.tau);
            for (gi, (&xi, &xji)) in g.iter_mut().zip(x.iter().zip(xj)) {
                *gi += coeff * (xi - xji);
            }
        }
        Ok(g)
    }

    fn upweight_influence(
        &self,
        _train: &Dataset,
        x_test: &[f64],
        y_test: usize,
    ) -> Option<Result<Vec<f64>>> {
        Some((|| {
            check_dim(self.n_features(), x_test)?;
            let w = self.soft_weights(x_test);
            let p_y: f64 = w
                .iter()
                .zip(&self.train_y)
                .filter(|(_, &y)| y == y_test)
                .map(|(wj, _)| wj)
                .sum();
            let p_y = p_y.max(1e-12);
            // d/de of -ln p_y when point j's softmax weight scales by (1+e)
            Ok(self
                .train_y
                .iter()
                .zip(&w)
                .map(|(&yj, &wj)| {
                    let ind = if yj == y_test { 1.0 } else { 0.0 };
                    -wj * (ind - p_y) / p_y
                })
                .collect())
        })())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic;
    use ndarray::Array2;

    fn toy() -> Dataset {
        // class 0 near origin, class 1 near (2,2)
        let features = Array2::from_shape_vec(
            (2, 5),
            vec![
                0.0, 0.1, 2.0, 2.1, 1.9, // x0
                0.0, 0.2, 2.0, 1.9, 2.2, // x1
            ],
        )
        .unwrap();
        Dataset::new(
            features,
            vec![0, 0, 1, 1, 1],
            vec!["a".into(), "b".into()],
            vec!["c0".into(), "c1".into()],
            None,
        )
        .unwrap()
    }

    #[test]
    fn own_training_point_with_one_neighbor() {
        let data = toy();
        let knn = train_knn(&data, 1).unwrap();
        let p = knn.predict(&data.point(2)).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
    }

    #[test]
    fn majority_vote_beats_closer_minority() {
        // 2 points of class A at distance 1, 1 point of class B at distance 0.5
        let features =
            Array2::from_shape_vec((1, 3), vec![1.0, -1.0, 0.5]).unwrap();
        let data = Dataset::new(
            features,
            vec![0, 0, 1],
            vec!["x".into()],
            vec!["A".into(), "B".into()],
            None,
        )
        .unwrap();
        let knn = train_knn(&data, 3).unwrap();
        assert_eq!(knn.hard_label(&[0.0]), 0);
    }

    #[test]
    fn n_neighbors_bounds_enforced() {
        let data = toy();
        assert!(train_knn(&data, 0).is_err());
        assert!(train_knn(&data, 6).is_err());
    }

    #[test]
    fn soft_knn_low_temperature_agrees_with_hard() {
        let data = synthetic::gaussian_blobs(20, &[vec![0.0, 0.0], vec![3.0, 3.0]], 0.5, 3);
        let mut knn = train_knn(&data, 1).unwrap();
        knn.tau = 1e-3;
        let mut agree = 0;
        let mut total = 0;
        for gx in 0..10 {
            for gy in 0..10 {
                let x = [gx as f64 * 0.4 - 0.5, gy as f64 * 0.4 - 0.5];
                total += 1;
                let soft = crate::models::argmax(&knn.soft_predict(&x).unwrap());
                if soft == knn.hard_label(&x) {
                    agree += 1;
                }
            }
        }
        assert_eq!(agree, total);
    }

    #[test]
    fn soft_grad_matches_finite_differences() {
        let data = toy();
        let knn = train_knn(&data, 3).unwrap();
        let x = [1.0, 0.8];
        let g = knn.grad_input(&x, 1).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut xp = x.to_vec();
            xp[i] += h;
            let mut xm = x.to_vec();
            xm[i] -= h;
            let fd = (knn.soft_predict(&xp).unwrap()[1] - knn.soft_predict(&xm).unwrap()[1])
                / (2.0 * h);
            assert!((g[i] - fd).abs() < 1e-5, "{} vs {}", g[i], fd);
        }
    }

    #[test]
    fn upweight_influence_helps_same_class() {
        let data = toy();
        let mut knn = train_knn(&data, 3).unwrap();
        // soften the weights so both classes hold probability mass
        knn.tau = 2.0;
        let raw = knn.upweight_influence(&data, &[1.0, 1.0], 0).unwrap().unwrap();
        // same-class neighbors reduce test loss when upweighted
        assert!(raw[0] < 0.0);
        assert!(raw[1] < 0.0);
        assert!(raw[2] >= 0.0);
    }

    #[test]
    fn param_capabilities_gated() {
        let data = toy();
        let knn = train_knn(&data, 1).unwrap();
        assert!(knn.grad_params(&[0.0, 0.0], 0).is_err());
        assert!(knn.hvp(&data, &[], 0.0).is_err());
    }
}
