//! Dense multilayer perceptron trained with ADAM.
//!
//! Parameters live in one flat vector so the influence machinery can treat
//! the model as a point in R^p. Input gradients, per-example parameter
//! gradients, and Hessian-vector products (Pearlmutter's forward-over-reverse
//! pass, no explicit Hessian) are all analytic.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{AvaError, Result};
use crate::linalg::softmax;
use crate::models::{check_dim, Capabilities, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
        }
    }

    // derivative expressed through z, not the activation value
    fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s)
            }
            // subgradient at 0 is 0
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.apply(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
            Activation::Relu => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    SquaredError,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    /// Hidden layer widths; two entries gives the three-weight-layer network
    /// used for reproduction runs.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub loss: LossKind,
    pub epochs: usize,
    /// `None`: full batch for N <= 1000, otherwise 64.
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: vec![16, 16],
            activation: Activation::Sigmoid,
            loss: LossKind::CrossEntropy,
            epochs: 500,
            batch_size: None,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps_adam", self.eps_adam),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(AvaError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(AvaError::Config("beta1/beta2 must be < 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(AvaError::Config("hidden widths must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(AvaError::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub loss_kind: LossKind,
    pub params: Vec<f64>,
}

struct Forward {
    /// pre-activations per weight layer
    zs: Vec<Vec<f64>>,
    /// acts[0] = input, acts[l+1] = activation(zs[l]); last entry are logits
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new_seeded(
        layer_sizes: Vec<usize>,
        activation: Activation,
        loss_kind: LossKind,
        seed: u64,
    ) -> Mlp {
        let n_params = Self::param_count(&layer_sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; n_params];
        let mut offset = 0;
        for l in 0..layer_sizes.len() - 1 {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in &mut params[offset..offset + n_in * n_out] {
                *w = rng.random_range(-limit..limit);
            }
            offset += n_in * n_out + n_out; // biases stay zero
        }
        Mlp {
            layer_sizes,
            activation,
            loss_kind,
            params,
        }
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// (weight offset, bias offset) of weight layer `l` in the flat vector.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for k in 0..l {
            off += self.layer_sizes[k] * self.layer_sizes[k + 1] + self.layer_sizes[k + 1];
        }
        (off, off + self.layer_sizes[l] * self.layer_sizes[l + 1])
    }

    fn weights<'a>(&self, params: &'a [f64], l: usize) -> (&'a [f64], &'a [f64]) {
        let (wo, bo) = self.offsets(l);
        let n_out = self.layer_sizes[l + 1];
        (&params[wo..bo], &params[bo..bo + n_out])
    }

    fn forward(&self, x: &[f64]) -> Forward {
        let mut zs = Vec::with_capacity(self.n_layers());
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let (w, b) = self.weights(&self.params, l);
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let input = acts.last().unwrap();
            let mut z = b.to_vec();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                z[o] += crate::linalg::dot(row, input);
            }
            let a = if l + 1 < self.n_layers() {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            zs.push(z);
            acts.push(a);
        }
        Forward { zs, acts }
    }

    fn probs_from(&self, fwd: &Forward) -> Vec<f64> {
        softmax(fwd.acts.last().unwrap())
    }

    /// Loss gradient with respect to the output logits.
    fn output_delta(&self, p: &[f64], y: usize) -> Vec<f64> {
        match self.loss_kind {
            LossKind::CrossEntropy => {
                let mut d = p.to_vec();
                d[y] -= 1.0;
                d
            }
            LossKind::SquaredError => {
                // delta = J (p - t), J = diag(p) - p p^T
                let mut q = p.to_vec();
                q[y] -= 1.0;
                jac_softmax_apply(p, &q)
            }
        }
    }

    fn loss_value(&self, p: &[f64], y: usize) -> f64 {
        match self.loss_kind {
            LossKind::CrossEntropy => -p[y].max(1e-300).ln(),
            LossKind::SquaredError => {
                let mut acc = 0.0;
                for (c, &pc) in p.iter().enumerate() {
                    let t = if c == y { 1.0 } else { 0.0 };
                    acc += 0.5 * (pc - t) * (pc - t);
                }
                acc
            }
        }
    }

    /// Per-example parameter gradient via backpropagation.
    fn grad_params_inner(&self, x: &[f64], y: usize) -> Vec<f64> {
        let fwd = self.forward(x);
        let p = self.probs_from(&fwd);
        let mut delta = self.output_delta(&p, y);
        let mut grad = vec![0.0; self.params.len()];
        for l in (0..self.n_layers()).rev() {
            let (wo, bo) = self.offsets(l);
            let n_in = self.layer_sizes[l];
            let input = &fwd.acts[l];
            for (o, &dv) in delta.iter().enumerate() {
                let row = &mut grad[wo + o * n_in..wo + (o + 1) * n_in];
                for (gi, &xi) in row.iter_mut().zip(input) {
                    *gi += dv * xi;
                }
                grad[bo + o] = dv;
            }
            if l > 0 {
                let (w, _) = self.weights(&self.params, l);
                let mut prev = vec![0.0; n_in];
                for (o, &dv) in delta.iter().enumerate() {
                    for (pi, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *pi += dv * wv;
                    }
                }
                for (pi, &z) in prev.iter_mut().zip(&fwd.zs[l - 1]) {
                    *pi *= self.activation.d1(z);
                }
                delta = prev;
            }
        }
        grad
    }

    /// Hessian-vector product of the per-example loss (Pearlmutter pass).
    fn hvp_example(&self, x: &[f64], y: usize, v: &[f64]) -> Vec<f64> {
        let fwd = self.forward(x);
        let n_layers = self.n_layers();

        // forward R pass: directional derivatives of z and a along v
        let mut rzs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut ra: Vec<f64> = vec![0.0; x.len()];
        let mut ras: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        ras.push(ra.clone());
        for l in 0..n_layers {
            let (w, _) = self.weights(&self.params, l);
            let (vw, vb) = self.weights(v, l);
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let a_in = &fwd.acts[l];
            let mut rz = vec![0.0; n_out];
            for o in 0..n_out {
                rz[o] = crate::linalg::dot(&w[o * n_in..(o + 1) * n_in], &ra)
                    + crate::linalg::dot(&vw[o * n_in..(o + 1) * n_in], a_in)
                    + vb[o];
            }
            if l + 1 < n_layers {
                ra = rz
                    .iter()
                    .zip(&fwd.zs[l])
                    .map(|(&r, &z)| self.activation.d1(z) * r)
                    .collect();
            } else {
                ra = rz.clone();
            }
            rzs.push(rz);
            ras.push(ra.clone());
        }

        let p = self.probs_from(&fwd);
        let rz_out = rzs.last().unwrap();
        let rp = jac_softmax_apply(&p, rz_out);

        let mut delta = self.output_delta(&p, y);
        let mut rdelta = match self.loss_kind {
            LossKind::CrossEntropy => rp.clone(),
            LossKind::SquaredError => {
                let mut q = p.to_vec();
                q[y] -= 1.0;
                // R{J q} + J R{q} with R{q} = rp
                let pq = crate::linalg::dot(&p, &q);
                let rpq = crate::linalg::dot(&rp, &q);
                let jrp = jac_softmax_apply(&p, &rp);
                (0..p.len())
                    .map(|c| rp[c] * q[c] - rp[c] * pq - p[c] * rpq + jrp[c])
                    .collect()
            }
        };

        let mut hv = vec![0.0; self.params.len()];
        for l in (0..n_layers).rev() {
            let (wo, bo) = self.offsets(l);
            let n_in = self.layer_sizes[l];
            let a_in = &fwd.acts[l];
            let ra_in = &ras[l];
            for o in 0..delta.len() {
                let row = &mut hv[wo + o * n_in..wo + (o + 1) * n_in];
                for i in 0..n_in {
                    row[i] += rdelta[o] * a_in[i] + delta[o] * ra_in[i];
                }
                hv[bo + o] = rdelta[o];
            }
            if l > 0 {
                let (w, _) = self.weights(&self.params, l);
                let (vw, _) = self.weights(v, l);
                let mut u = vec![0.0; n_in];
                let mut ru = vec![0.0; n_in];
                for o in 0..delta.len() {
                    let wrow = &w[o * n_in..(o + 1) * n_in];
                    let vrow = &vw[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        u[i] += wrow[i] * delta[o];
                        ru[i] += vrow[i] * delta[o] + wrow[i] * rdelta[o];
                    }
                }
                let z_prev = &fwd.zs[l - 1];
                let rz_prev = &rzs[l - 1];
                delta = (0..n_in).map(|i| u[i] * self.activation.d1(z_prev[i])).collect();
                rdelta = (0..n_in)
                    .map(|i| {
                        ru[i] * self.activation.d1(z_prev[i])
                            + u[i] * self.activation.d2(z_prev[i]) * rz_prev[i]
                    })
                    .collect();
            }
        }
        hv
    }

    fn mean_loss(&self, data: &Dataset) -> f64 {
        let mut acc = 0.0;
        for j in 0..data.n_points() {
            let fwd = self.forward(&data.point(j));
            acc += self.loss_value(&self.probs_from(&fwd), data.label(j));
        }
        acc / data.n_points() as f64
    }
}

/// Apply the softmax Jacobian at probabilities `p` to `u`.
fn jac_softmax_apply(p: &[f64], u: &[f64]) -> Vec<f64> {
    let pu = crate::linalg::dot(p, u);
    p.iter().zip(u).map(|(&pi, &ui)| pi * (ui - pu)).collect()
}

impl Predictor for Mlp {
    fn n_features(&self) -> usize {
        self.layer_sizes[0]
    }

    fn n_classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn name(&self) -> &'static str {
        "mlp"
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
        Ok(self.probs_from(&self.forward(x)))
    }

    fn grad_input(&self, x: &[f64], output_index: usize) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        if output_index >= self.n_classes() {
            return Err(AvaError::InvalidArgument(format!(
                "output index {output_index} out of range"
            )));
        }
        let fwd = self.forward(x);
        let p = self.probs_from(&fwd);
        // d p_c / d logits = p_c (e_c - p)
        let mut g: Vec<f64> = p.iter().map(|&pk| -p[output_index] * pk).collect();
        g[output_index] += p[output_index];
        for l in (0..self.n_layers()).rev() {
            let (w, _) = self.weights(&self.params, l);
            let n_in = self.layer_sizes[l];
            let mut prev = vec![0.0; n_in];
            for (o, &gv) in g.iter().enumerate() {
                for (pi, &wv) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *pi += gv * wv;
                }
            }
            if l > 0 {
                for (pi, &z) in prev.iter_mut().zip(&fwd.zs[l - 1]) {
                    *pi *= self.activation.d1(z);
                }
            }
            g = prev;
        }
        Ok(g)
    }

    fn n_params(&self) -> usize {
        self.params.len()
    }

    fn loss(&self, x: &[f64], y: usize) -> Result<f64> {
        check_dim(self.n_features(), x)?;
        let fwd = self.forward(x);
        Ok(self.loss_value(&self.probs_from(&fwd), y))
    }

    fn grad_params(&self, x: &[f64], y: usize) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(self.grad_params_inner(x, y))
    }

    fn hvp(&self, data: &Dataset, v: &[f64], damping: f64) -> Result<Vec<f64>> {
        check_dim(self.n_params(), v)?;
        if damping < 0.0 {
            return Err(AvaError::InvalidArgument("damping must be >= 0".into()));
        }
        let mut acc = vec![0.0; v.len()];
        for j in 0..data.n_points() {
            let hv = self.hvp_example(&data.point(j), data.label(j), v);
            crate::linalg::axpy(1.0, &hv, &mut acc);
        }
        let n = data.n_points() as f64;
        for (a, &vi) in acc.iter_mut().zip(v) {
            *a = *a / n + damping * vi;
        }
        Ok(acc)
    }
}

/// Train an MLP with ADAM. Seeded runs are bit-reproducible.
pub fn train_mlp(train: &Dataset, config: &MlpConfig) -> Result<Mlp> {
    config.validate()?;
    let mut sizes = vec![train.n_features()];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(train.n_classes());
    let mut mlp = Mlp::new_seeded(sizes, config.activation, config.loss, config.seed);
    adam_fit(&mut mlp, train, config)?;
    Ok(mlp)
}

pub(crate) fn adam_fit(mlp: &mut Mlp, train: &Dataset, config: &MlpConfig) -> Result<()> {
    let n = train.n_points();
    let batch = config
        .batch_size
        .unwrap_or(if n <= 1000 { n } else { 64 })
        .min(n);
    let mut m = vec![0.0; mlp.params.len()];
    let mut v = vec![0.0; mlp.params.len()];
    let mut t = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    for epoch in 0..config.epochs {
        if batch < n {
            use rand::seq::SliceRandom;
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let mut grad = vec![0.0; mlp.params.len()];
            let mut batch_loss = 0.0;
            for &j in chunk {
                let x = train.point(j);
                let y = train.label(j);
                let g = mlp.grad_params_inner(&x, y);
                crate::linalg::axpy(1.0, &g, &mut grad);
                let fwd = mlp.forward(&x);
                batch_loss += mlp.loss_value(&mlp.probs_from(&fwd), y);
            }
            if !batch_loss.is_finite() {
                return Err(AvaError::TrainingDiverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            let scale = 1.0 / chunk.len() as f64;
            t += 1;
            let bc1 = 1.0 - config.beta1.powi(t as i32);
            let bc2 = 1.0 - config.beta2.powi(t as i32);
            for i in 0..mlp.params.len() {
                let g = grad[i] * scale;
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                mlp.params[i] -= config.learning_rate * mhat / (vhat.sqrt() + config.eps_adam);
            }
        }
    }
    if mlp.params.iter().any(|p| !p.is_finite()) {
        return Err(AvaError::TrainingDiverged("non-finite parameters".into()));
    }
    let _ = mlp.mean_loss(train);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic;
    use crate::models::{accuracy, argmax};

    fn finite_diff_grad_params(mlp: &Mlp, x: &[f64], y: usize, h: f64) -> Vec<f64> {
        let mut g = vec![0.0; mlp.params.len()];
        let mut m = mlp.clone();
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = m.params[i];
            m.params[i] = orig + h;
            let fp = m.loss(x, y).unwrap();
            m.params[i] = orig - h;
            let fm = m.loss(x, y).unwrap();
            m.params[i] = orig;
            *gi = (fp - fm) / (2.0 * h);
        }
        g
    }

    fn small_mlp(seed: u64, loss: LossKind, act: Activation) -> Mlp {
        Mlp::new_seeded(vec![3, 5, 4, 2], act, loss, seed)
    }

    #[test]
    fn softmax_of_zero_final_layer_is_uniform() {
        let mut mlp = small_mlp(0, LossKind::CrossEntropy, Activation::Sigmoid);
        let (wo, _) = mlp.offsets(2);
        for p in &mut mlp.params[wo..] {
            *p = 0.0;
        }
        let p = mlp.predict(&[0.3, -0.2, 0.9]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12);
        assert!((p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mlp = small_mlp(3, LossKind::CrossEntropy, Activation::Relu);
        let p = mlp.predict(&[1.0, 2.0, -1.5]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn grad_params_matches_finite_differences() {
        for (seed, loss) in [(1, LossKind::CrossEntropy), (2, LossKind::SquaredError)] {
            let mlp = small_mlp(seed, loss, Activation::Sigmoid);
            let x = [0.4, -1.1, 0.7];
            let g = mlp.grad_params(&x, 1).unwrap();
            let fd = finite_diff_grad_params(&mlp, &x, 1, 1e-5);
            let scale = g.iter().map(|v| v.abs()).fold(1e-8, f64::max);
            for (a, b) in g.iter().zip(&fd) {
                assert!((a - b).abs() / scale < 1e-4, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn grad_input_matches_finite_differences() {
        for act in [Activation::Sigmoid, Activation::Relu] {
            let mlp = small_mlp(5, LossKind::CrossEntropy, act);
            let x = [0.4, -1.1, 0.7];
            let g = mlp.grad_input(&x, 0).unwrap();
            let scale = g.iter().map(|v| v.abs()).fold(1e-8, f64::max);
            for i in 0..x.len() {
                let h = 1e-5;
                let mut xp = x.to_vec();
                xp[i] += h;
                let mut xm = x.to_vec();
                xm[i] -= h;
                let fd = (mlp.predict(&xp).unwrap()[0] - mlp.predict(&xm).unwrap()[0]) / (2.0 * h);
                assert!((g[i] - fd).abs() / scale < 1e-4, "{} vs {}", g[i], fd);
            }
        }
    }

    #[test]
    fn hvp_matches_fd_of_grad() {
        for loss in [LossKind::CrossEntropy, LossKind::SquaredError] {
            let mlp = small_mlp(7, loss, Activation::Sigmoid);
            let x = [0.2, 0.5, -0.3];
            let y = 0;
            let mut v = vec![0.0; mlp.n_params()];
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = ((i * 37 + 11) % 13) as f64 / 13.0 - 0.5;
            }
            let hv = mlp.hvp_example(&x, y, &v);
            // central finite difference of grad along direction v
            let h = 1e-6;
            let mut mp = mlp.clone();
            crate::linalg::axpy(h, &v, &mut mp.params);
            let gp = mp.grad_params(&x, y).unwrap();
            let mut mm = mlp.clone();
            crate::linalg::axpy(-h, &v, &mut mm.params);
            let gm = mm.grad_params(&x, y).unwrap();
            let scale = hv.iter().map(|a| a.abs()).fold(1e-8, f64::max);
            for i in 0..hv.len() {
                let fd = (gp[i] - gm[i]) / (2.0 * h);
                assert!((hv[i] - fd).abs() / scale < 1e-3, "{} vs {}", hv[i], fd);
            }
        }
    }

    #[test]
    fn hvp_is_linear() {
        let data = synthetic::gaussian_blobs(10, &[vec![0.0, 0.0], vec![2.0, 2.0]], 0.5, 1);
        let mlp = Mlp::new_seeded(
            vec![2, 4, 3, 2],
            Activation::Sigmoid,
            LossKind::CrossEntropy,
            9,
        );
        let p = mlp.n_params();
        let v: Vec<f64> = (0..p).map(|i| (i as f64 * 0.1).sin()).collect();
        let w: Vec<f64> = (0..p).map(|i| (i as f64 * 0.2).cos()).collect();
        let (a, b) = (2.0, -0.7);
        let combo: Vec<f64> = v.iter().zip(&w).map(|(&x, &y)| a * x + b * y).collect();
        let hv = mlp.hvp(&data, &v, 0.0).unwrap();
        let hw = mlp.hvp(&data, &w, 0.0).unwrap();
        let hc = mlp.hvp(&data, &combo, 0.0).unwrap();
        for i in 0..p {
            assert!((hc[i] - (a * hv[i] + b * hw[i])).abs() < 1e-10);
        }
    }

    #[test]
    fn hvp_is_symmetric() {
        let data = synthetic::gaussian_blobs(8, &[vec![0.0, 1.0], vec![1.5, -0.5]], 0.6, 2);
        let mlp = Mlp::new_seeded(
            vec![2, 4, 2],
            Activation::Sigmoid,
            LossKind::CrossEntropy,
            3,
        );
        let p = mlp.n_params();
        let v: Vec<f64> = (0..p).map(|i| ((i + 1) as f64 * 0.3).sin()).collect();
        let w: Vec<f64> = (0..p).map(|i| ((i + 2) as f64 * 0.5).cos()).collect();
        let hv = mlp.hvp(&data, &v, 0.0).unwrap();
        let hw = mlp.hvp(&data, &w, 0.0).unwrap();
        let lhs = crate::linalg::dot(&w, &hv);
        let rhs = crate::linalg::dot(&v, &hw);
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0));
    }

    #[test]
    fn zero_epochs_equals_seeded_init() {
        let data = synthetic::xor();
        let config = MlpConfig {
            epochs: 0,
            hidden: vec![4],
            ..MlpConfig::default()
        };
        let trained = train_mlp(&data, &config).unwrap();
        let init = Mlp::new_seeded(
            vec![2, 4, 2],
            config.activation,
            config.loss,
            config.seed,
        );
        assert_eq!(trained.params, init.params);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let data = synthetic::gaussian_blobs(15, &[vec![0.0, 0.0], vec![2.0, 2.0]], 0.5, 4);
        let config = MlpConfig {
            epochs: 50,
            hidden: vec![6],
            seed: 11,
            ..MlpConfig::default()
        };
        let a = train_mlp(&data, &config).unwrap();
        let b = train_mlp(&data, &config).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn xor_reaches_perfect_training_accuracy() {
        let data = synthetic::xor();
        let config = MlpConfig {
            hidden: vec![8],
            epochs: 3000,
            learning_rate: 0.05,
            seed: 1,
            ..MlpConfig::default()
        };
        let mlp = train_mlp(&data, &config).unwrap();
        assert!((accuracy(&mlp, &data).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_loss() {
        let data = synthetic::gaussian_blobs(20, &[vec![0.0, 0.0], vec![3.0, 3.0]], 0.5, 6);
        let config = MlpConfig {
            epochs: 200,
            seed: 5,
            ..MlpConfig::default()
        };
        let init = Mlp::new_seeded(
            vec![2, 16, 16, 2],
            config.activation,
            config.loss,
            config.seed,
        );
        let trained = train_mlp(&data, &config).unwrap();
        assert!(trained.mean_loss(&data) < init.mean_loss(&data));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mlp = small_mlp(0, LossKind::CrossEntropy, Activation::Sigmoid);
        assert!(mlp.predict(&[1.0, 2.0]).is_err());
        assert!(mlp.grad_input(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn knn_like_argmax_tiebreak() {
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), 0);
    }
}
