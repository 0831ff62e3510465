//! RBF-kernel support vector machine trained on the smooth squared-hinge
//! primal.
//!
//! The decision function is f(x) = sum_i beta_i K(x_i, x) + b with
//! K(x, z) = exp(-gamma ||x - z||^2). Training minimizes
//! (C/N) sum_i max(0, 1 - t_i f(x_i))^2 + 1/2 beta^T K beta by full-batch
//! ADAM; the squared hinge keeps the loss twice differentiable almost
//! everywhere, which is what the influence machinery needs. Multiclass is
//! one-vs-rest with one machine per class.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::linalg::{dot, softmax, squared_distance};
use crate::models::{check_dim, Capabilities, Predictor};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub learning_rate: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            gamma: 0.5,
            max_iter: 20_000,
            tol: 1e-6,
            learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Machine {
    beta: Vec<f64>,
    bias: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmRbf {
    pub c: f64,
    pub gamma: f64,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<usize>,
    n_classes: usize,
    machines: Vec<Machine>,
    /// Training kernel matrix, row-major N x N.
    kernel: Vec<f64>,
}

pub fn train_svm_rbf(train: &Dataset, c: f64, gamma: f64) -> Result<SvmRbf> {
    train_svm_rbf_with(
        train,
        &SvmConfig {
            c,
            gamma,
            ..SvmConfig::default()
        },
    )
}

pub fn train_svm_rbf_with(train: &Dataset, config: &SvmConfig) -> Result<SvmRbf> {
    if config.c.is_nan() || config.c <= 0.0 {
        return Err(AvaError::InvalidArgument(format!(
            "C must be > 0, got {}",
            config.c
        )));
    }
    if config.gamma.is_nan() || config.gamma <= 0.0 {
        return Err(AvaError::InvalidArgument(format!(
            "gamma must be > 0, got {}",
            config.gamma
        )));
    }
    let n = train.n_points();
    let train_x: Vec<Vec<f64>> = (0..n).map(|j| train.point(j)).collect();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = (-config.gamma * squared_distance(&train_x[i], &train_x[j])).exp();
            kernel[i * n + j] = k;
            kernel[j * n + i] = k;
        }
    }

    let n_classes = train.n_classes();
    let n_machines = if n_classes == 2 { 1 } else { n_classes };
    let mut machines = Vec::with_capacity(n_machines);
    for m in 0..n_machines {
        let positive = if n_classes == 2 { 1 } else { m };
        let targets: Vec<f64> = train
            .labels()
            .iter()
            .map(|&y| if y == positive { 1.0 } else { -1.0 })
            .collect();
        machines.push(fit_machine(&kernel, &targets, config)?);
    }
    Ok(SvmRbf {
        c: config.c,
        gamma: config.gamma,
        train_x,
        train_y: train.labels().to_vec(),
        n_classes,
        machines,
        kernel,
    })
}

fn fit_machine(kernel: &[f64], targets: &[f64], config: &SvmConfig) -> Result<Machine> {
    let n = targets.len();
    let mut beta = vec![0.0; n];
    let mut bias = 0.0;
    let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut converged = false;
    for t in 1..=config.max_iter {
        // f = K beta + b, hinge h_i = max(0, 1 - t_i f_i)
        let mut q = vec![0.0; n]; // dJ/df_i
        for i in 0..n {
            let f_i = dot(&kernel[i * n..(i + 1) * n], &beta) + bias;
            let h = (1.0 - targets[i] * f_i).max(0.0);
            q[i] = -(2.0 * config.c / n as f64) * h * targets[i];
        }
        let mut grad = vec![0.0; n + 1];
        for i in 0..n {
            // K (q + beta) for the beta block
            grad[i] = (0..n).map(|j| kernel[i * n + j] * (q[j] + beta[j])).sum();
        }
        grad[n] = q.iter().sum();
        let gmax = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if gmax <= config.tol {
            converged = true;
            break;
        }
        let bc1 = 1.0 - b1.powi(t as i32);
        let bc2 = 1.0 - b2.powi(t as i32);
        for i in 0..=n {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let step = config.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
            if i < n {
                beta[i] -= step;
            } else {
                bias -= step;
            }
        }
        if !bias.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(AvaError::TrainingDiverged("non-finite SVM parameters".into()));
        }
    }
    if !converged {
        // accept near-stationary solutions, reject anything far from optimal
        let mut q = vec![0.0; n];
        for i in 0..n {
            let f_i = dot(&kernel[i * n..(i + 1) * n], &beta) + bias;
            let h = (1.0 - targets[i] * f_i).max(0.0);
            q[i] = -(2.0 * config.c / n as f64) * h * targets[i];
        }
        let gmax = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| kernel[i * n + j] * (q[j] + beta[j]))
                    .sum::<f64>()
                    .abs()
            })
            .fold(q.iter().sum::<f64>().abs(), f64::max);
        if gmax > 1000.0 * config.tol {
            return Err(AvaError::SolverFailed(format!(
                "squared-hinge primal did not converge: gradient norm {gmax:.3e} after {} iterations",
                config.max_iter
            )));
        }
    }
    Ok(Machine { beta, bias })
}

impl SvmRbf {
    fn n_train(&self) -> usize {
        self.train_x.len()
    }

    fn n_machines(&self) -> usize {
        self.machines.len()
    }

    fn kernel_vector(&self, x: &[f64]) -> Vec<f64> {
        self.train_x
            .iter()
            .map(|xi| (-self.gamma * squared_distance(xi, x)).exp())
            .collect()
    }

    /// Real-valued decision function of machine `m` at `x`.
    pub fn decision(&self, m: usize, x: &[f64]) -> f64 {
        let k = self.kernel_vector(x);
        dot(&self.machines[m].beta, &k) + self.machines[m].bias
    }

    /// Per-class scores the probabilities are a softmax of.
    fn scores(&self, x: &[f64]) -> Vec<f64> {
        if self.n_classes == 2 {
            let f = self.decision(0, x);
            vec![-f, f]
        } else {
            (0..self.n_machines()).map(|m| self.decision(m, x)).collect()
        }
    }

    /// d score_c / dx for every class c.
    fn score_grads(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let k = self.kernel_vector(x);
        let mut per_machine = Vec::with_capacity(self.n_machines());
        for machine in &self.machines {
            let mut g = vec![0.0; x.len()];
            for (i, xi) in self.train_x.iter().enumerate() {
                let coeff = machine.beta[i] * k[i] * (-2.0 * self.gamma);
                for (gi, (&xv, &xiv)) in g.iter_mut().zip(x.iter().zip(xi)) {
                    *gi += coeff * (xv - xiv);
                }
            }
            per_machine.push(g);
        }
        if self.n_classes == 2 {
            let pos = per_machine.pop().unwrap();
            let neg: Vec<f64> = pos.iter().map(|v| -v).collect();
            vec![neg, pos]
        } else {
            per_machine
        }
    }

    fn machine_target(&self, m: usize, y: usize) -> f64 {
        let positive = if self.n_classes == 2 { 1 } else { m };
        if y == positive {
            1.0
        } else {
            -1.0
        }
    }

    /// Per-machine parameter block (beta..., bias) inside the flat vector.
    fn block(&self, m: usize) -> std::ops::Range<usize> {
        let width = self.n_train() + 1;
        m * width..(m + 1) * width
    }
}

impl Predictor for SvmRbf {
    fn n_features(&self) -> usize {
        self.train_x[0].len()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn name(&self) -> &'static str {
        "svm_rbf"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            input_gradient: true,
            param_gradient: true,
            hvp: true,
        }
    }

    fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(softmax(&self.scores(x)))
    }

    fn grad_input(&self, x: &[f64], output_index: usize) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        if output_index >= self.n_classes {
            return Err(AvaError::InvalidArgument(format!(
                "output index {output_index} out of range"
            )));
        }
        let p = softmax(&self.scores(x));
        let sg = self.score_grads(x);
        let mut g = vec![0.0; x.len()];
        for (k, gk) in sg.iter().enumerate() {
            let jac = p[output_index] * (if k == output_index { 1.0 } else { 0.0 } - p[k]);
            crate::linalg::axpy(jac, gk, &mut g);
        }
        Ok(g)
    }

    fn n_params(&self) -> usize {
        self.n_machines() * (self.n_train() + 1)
    }

    fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
        check_dim(self.n_features(), x)?;
        let mut acc = 0.0;
        for m in 0..self.n_machines() {
            let t = self.machine_target(m, y);
            let h = (1.0 - t * self.decision(m, x)).max(0.0);
            acc += self.c * h * h;
        }
        Ok(acc)
    }

    fn grad_params(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        let k = self.kernel_vector(x);
        let mut grad = vec![0.0; self.n_params()];
        for m in 0..self.n_machines() {
            let t = self.machine_target(m, y);
            let h = (1.0 - t * self.decision(m, x)).max(0.0);
            let coeff = -2.0 * self.c * h * t;
            let block = self.block(m);
            let n = self.n_train();
            for i in 0..n {
                grad[block.start + i] = coeff * k[i];
            }
            grad[block.start + n] = coeff;
        }
        Ok(grad)
    }

    fn hvp(&self, data: &Dataset, v: &[f64], damping: f64) -> Result<Vec<f64>> {
        check_dim(self.n_params(), v)?;
        if data.n_points() != self.n_train() {
            return Err(AvaError::InvalidArgument(
                "hvp dataset must be the SVM's training set".into(),
            ));
        }
        let n = self.n_train();
        let mut out = vec![0.0; v.len()];
        for m in 0..self.n_machines() {
            let block = self.block(m);
            let v_m = &v[block.clone()];
            let out_m = &mut out[block];
            // loss block: (2C/N) sum_i 1[h_i > 0] (k_i^T v) k_i over (beta, bias)
            for i in 0..n {
                let t = self.machine_target(m, self.train_y[i]);
                let f_i = dot(
                    &self.kernel[i * n..(i + 1) * n],
                    &self.machines[m].beta,
                ) + self.machines[m].bias;
                if 1.0 - t * f_i <= 0.0 {
                    continue;
                }
                let kv = dot(&self.kernel[i * n..(i + 1) * n], &v_m[..n]) + v_m[n];
                let coeff = 2.0 * self.c / n as f64 * kv;
                for (j, o) in out_m[..n].iter_mut().enumerate() {
                    *o += coeff * self.kernel[i * n + j];
                }
                out_m[n] += coeff;
            }
            // regularizer block: K v_beta
            for (i, o) in out_m[..n].iter_mut().enumerate() {
                *o += dot(&self.kernel[i * n..(i + 1) * n], &v_m[..n]);
            }
        }
        crate::linalg::axpy(damping, v, &mut out);
        Ok(out)
    }
}
