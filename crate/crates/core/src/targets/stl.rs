//! Trend + Fourier target: `theta0 + theta1 * t + sum_i (a_i sin(2 pi i t / p) + b_i cos(2 pi i t / p))`
//! with a difference penalty on the time-ordered trend parameters.

use std::f64::consts::PI;

/// Regressors multiplying each parameter at time `t`:
/// `[1, t, sin_1, cos_1, ..., sin_n, cos_n]`.
pub fn stl_basis(t: f64, n_season: usize, period: f64) -> Vec<f64> {
    let mut b = Vec::with_capacity(2 + 2 * n_season);
    b.push(1.0);
    b.push(t);
    for i in 1..=n_season {
        let angle = 2.0 * PI * i as f64 * t / period;
        b.push(angle.sin());
        b.push(angle.cos());
    }
    b
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlComponents {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Splits the fitted values into trend and seasonal parts. `theta` is
/// row-major with `2 + 2 n_season` columns.
pub fn stl_components(theta: &[f64], t: &[f64], n_season: usize, period: f64) -> StlComponents {
    let p = 2 + 2 * n_season;
    let mut trend = Vec::with_capacity(t.len());
    let mut seasonal = Vec::with_capacity(t.len());
    for (i, &ti) in t.iter().enumerate() {
        let row = &theta[i * p..(i + 1) * p];
        let basis = stl_basis(ti, n_season, period);
        trend.push(row[0] + row[1] * ti);
        seasonal.push((2..p).map(|j| row[j] * basis[j]).sum());
    }
    let fitted = trend.iter().zip(&seasonal).map(|(a, b)| a + b).collect();
    StlComponents {
        trend,
        seasonal,
        fitted,
    }
}

/// Loss, gradient and Gauss-Newton Hessian diagonal of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct StlLoss {
    pub loss: f64,
    pub sse: f64,
    pub penalty: f64,
    pub fitted: Vec<f64>,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    /// Penalty curvature added to the trend columns.
    pub penalty_diag: Vec<f64>,
}

/// `sum (fitted - y)^2 + omega * sum [(D1 theta0)^2 + (D2 theta0)^2 + (D1 theta1)^2 + (D2 theta1)^2]`
/// over the active rows of one series, which must be ordered by `t`.
pub fn stl_loss_grad(
    theta: &[f64],
    t: &[f64],
    y: &[f64],
    active: &[bool],
    n_season: usize,
    period: f64,
    omega: f64,
) -> StlLoss {
    let p = 2 + 2 * n_season;
    let n = t.len();
    let comps = stl_components(theta, t, n_season, period);
    let mut fitted = comps.fitted;
    let mut grad = vec![0.0; n * p];
    let mut hess = vec![0.0; n * p];
    let mut penalty_diag = vec![0.0; n * p];
    let mut sse = 0.0;
    for i in 0..n {
        if !active[i] {
            fitted[i] = 0.0;
            continue;
        }
        let r = fitted[i] - y[i];
        sse += r * r;
        let basis = stl_basis(t[i], n_season, period);
        for j in 0..p {
            grad[i * p + j] = 2.0 * r * basis[j];
            hess[i * p + j] = 2.0 * basis[j] * basis[j];
        }
    }

    let rows: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    let mut penalty = 0.0;
    if omega > 0.0 {
        for col in 0..2 {
            let v = |k: usize| theta[rows[k] * p + col];
            for k in 1..rows.len() {
                let d = v(k) - v(k - 1);
                penalty += d * d;
                for (idx, c) in [(k, 1.0), (k - 1, -1.0)] {
                    grad[rows[idx] * p + col] += omega * 2.0 * d * c;
                    penalty_diag[rows[idx] * p + col] += omega * 2.0 * c * c;
                }
            }
            for k in 2..rows.len() {
                let d = v(k) - 2.0 * v(k - 1) + v(k - 2);
                penalty += d * d;
                for (idx, c) in [(k, 1.0), (k - 1, -2.0), (k - 2, 1.0)] {
                    grad[rows[idx] * p + col] += omega * 2.0 * d * c;
                    penalty_diag[rows[idx] * p + col] += omega * 2.0 * c * c;
                }
            }
        }
    }
    penalty *= omega;
    for (h, d) in hess.iter_mut().zip(&penalty_diag) {
        *h += d;
    }
    StlLoss {
        loss: sse + penalty,
        sse,
        penalty,
        fitted,
        grad,
        hess,
        penalty_diag,
    }
}
