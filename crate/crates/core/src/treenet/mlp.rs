//! Two-layer perceptron `Linear(k -> hidden) -> ReLU -> Linear(hidden -> P)`
//! with an Adam optimiser.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub hidden: usize,
    pub n_out: usize,
    /// Row-major `hidden x n_in`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `n_out x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Activations kept for the backward pass.
pub struct MlpCache {
    pub input: Array2<f64>,
    pub pre: Array2<f64>,
    pub act: Array2<f64>,
    pub out: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Mlp {
    /// Uniform fan-in initialisation: every weight and bias of a layer is
    /// drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng>(n_in: usize, hidden: usize, n_out: usize, rng: &mut R) -> Self {
        let mut layer = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        let w1 = layer(n_in, hidden * n_in);
        let b1 = layer(n_in, hidden);
        let w2 = layer(hidden, n_out * hidden);
        let b2 = layer(hidden, n_out);
        Mlp {
            n_in,
            hidden,
            n_out,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn zeroed(n_in: usize, hidden: usize, n_out: usize) -> Self {
        Mlp {
            n_in,
            hidden,
            n_out,
            w1: vec![0.0; hidden * n_in],
            b1: vec![0.0; hidden],
            w2: vec![0.0; n_out * hidden],
            b2: vec![0.0; n_out],
        }
    }

    fn w1(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.hidden, self.n_in), &self.w1).expect("w1 shape")
    }

    fn w2(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n_out, self.hidden), &self.w2).expect("w2 shape")
    }

    /// Forward pass over the rows of `input` (`n x n_in`).
    pub fn forward(&self, input: Array2<f64>) -> MlpCache {
        let pre = input.dot(&self.w1().t()) + &Array1::from(self.b1.clone());
        let act = pre.mapv(|v| v.max(0.0));
        let out = act.dot(&self.w2().t()) + &Array1::from(self.b2.clone());
        let out = if out.is_standard_layout() {
            out
        } else {
            out.as_standard_layout().into_owned()
        };
        MlpCache { input, pre, act, out }
    }

    /// Parameter gradients given `d_out = dL/d out` (`n x n_out`).
    pub fn backward(&self, cache: &MlpCache, d_out: &Array2<f64>) -> MlpGrads {
        let gw2 = d_out.t().dot(&cache.act);
        let gb2 = d_out.sum_axis(Axis(0));
        let mut d_pre = d_out.dot(&self.w2());
        d_pre.zip_mut_with(&cache.pre, |d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = d_pre.t().dot(&cache.input);
        let gb1 = d_pre.sum_axis(Axis(0));
        MlpGrads {
            w1: gw1.iter().copied().collect(),
            b1: gb1.to_vec(),
            w2: gw2.iter().copied().collect(),
            b2: gb2.to_vec(),
        }
    }

    /// `W1 m` for an `n_in x d` matrix `m`; the input to [`Mlp::input_jacobian`].
    pub fn first_layer_times(&self, m: &Array2<f64>) -> Array2<f64> {
        self.w1().dot(m)
    }

    /// Jacobians of the outputs at every cached row with respect to `e`,
    /// where the input is `m e` and `w1m = W1 m` (`hidden x d`). Entry `k`
    /// of the result is `rows x n_out`: the derivative along `e_k`.
    pub fn input_jacobians(&self, cache: &MlpCache, w1m: &Array2<f64>) -> Vec<Array2<f64>> {
        // W2 diag(relu'(pre_r)) W1 m, batched over rows
        w1m.axis_iter(Axis(1))
            .map(|col| {
                let mut gated = cache.pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                gated *= &col;
                let jac = gated.dot(&self.w2().t());
                if jac.is_standard_layout() {
                    jac
                } else {
                    jac.as_standard_layout().into_owned()
                }
            })
            .collect()
    }

    pub fn n_weights(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }
}

/// Adam with bias correction and no weight decay.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_weights: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_weights],
            v: vec![0.0; n_weights],
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &MlpGrads) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let params = [&mut mlp.w1, &mut mlp.b1, &mut mlp.w2, &mut mlp.b2];
        let gs = [&grads.w1, &grads.b1, &grads.w2, &grads.b2];
        let mut k = 0;
        for (p, g) in params.into_iter().zip(gs) {
            for (w, &gw) in p.iter_mut().zip(g.iter()) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gw;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gw * gw;
                let mhat = self.m[k] / c1;
                let vhat = self.v[k] / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
                k += 1;
            }
        }
    }
}
