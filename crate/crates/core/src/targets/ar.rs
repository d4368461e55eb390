//! AR(p) target: `y_t = sum_j theta_{j,t} * y_{t-j}`.

/// Fitted values `sum_j theta[i, j] * lags[i, j]`; inactive rows give 0.
/// `theta` and `lags` are row-major with `p` columns.
pub fn ar_fit_values(theta: &[f64], lags: &[f64], active: &[bool], p: usize) -> Vec<f64> {
    active
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if !a {
                return 0.0;
            }
            let row = &theta[i * p..(i + 1) * p];
            let lag = &lags[i * p..(i + 1) * p];
            row.iter().zip(lag).map(|(t, l)| t * l).sum()
        })
        .collect()
}

/// Fitted values and gradient only; see [`ar_derivatives`].
pub fn ar_gradient(theta: &[f64], lags: &[f64], y: &[f64], active: &[bool], p: usize) -> (Vec<f64>, Vec<f64>) {
    let fitted = ar_fit_values(theta, lags, active, p);
    let mut grad = Vec::with_capacity(active.len() * p);
    for (i, &a) in active.iter().enumerate() {
        if a {
            let r2 = 2.0 * (fitted[i] - y[i]);
            grad.extend(lags[i * p..(i + 1) * p].iter().map(|l| r2 * l));
        } else {
            grad.extend(std::iter::repeat_n(0.0, p));
        }
    }
    (fitted, grad)
}

/// Derivatives of `sum_t (yhat_t - y_t)^2` with respect to each
/// coefficient: gradient `2 r_t y_{t-j}`, Hessian `2 y_{t-j}^2`.
/// Returns `(fitted, grad, hess)`, the latter two row-major with `p` columns.
pub fn ar_derivatives(
    theta: &[f64],
    lags: &[f64],
    y: &[f64],
    active: &[bool],
    p: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let fitted = ar_fit_values(theta, lags, active, p);
    let n = active.len();
    let mut grad = Vec::with_capacity(n * p);
    let mut hess = Vec::with_capacity(n * p);
    for i in 0..n {
        let lag = &lags[i * p..(i + 1) * p];
        if active[i] {
            let r = fitted[i] - y[i];
            grad.extend(lag.iter().map(|l| 2.0 * r * l));
            hess.extend(lag.iter().map(|l| 2.0 * l * l));
        } else {
            grad.extend(std::iter::repeat_n(0.0, p));
            hess.extend(std::iter::repeat_n(0.0, p));
        }
    }
    (fitted, grad, hess)
}

/// Recursive multi-step forecast. `history` holds at least the last `p`
/// observations in time order; `theta_future` holds one row of `p`
/// coefficients per step. Forecasts feed back as lags once history runs out.
pub fn ar_forecast_recursive(theta_future: &[f64], history: &[f64], p: usize, h: usize) -> Vec<f64> {
    assert!(history.len() >= p, "AR forecast needs {p} history values");
    assert!(theta_future.len() >= h * p, "AR forecast needs {h} parameter rows");
    let mut buf: Vec<f64> = history[history.len() - p..].to_vec();
    let mut out = Vec::with_capacity(h);
    for k in 0..h {
        let row = &theta_future[k * p..(k + 1) * p];
        let n = buf.len();
        let yhat: f64 = (0..p).map(|j| row[j] * buf[n - 1 - j]).sum();
        buf.push(yhat);
        out.push(yhat);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_value_examples() {
        assert_eq!(ar_fit_values(&[0.5, 0.5], &[10.0, 20.0], &[true], 2), vec![15.0]);
        assert_eq!(ar_fit_values(&[1.0, 0.0, 0.0], &[7.0, 3.0, 1.0], &[true], 3), vec![7.0]);
        assert_eq!(ar_fit_values(&[0.0, 0.0], &[7.0, 3.0], &[true], 2), vec![0.0]);
        assert_eq!(ar_fit_values(&[1.0], &[7.0], &[false], 1), vec![0.0]);
    }

    #[test]
    fn derivative_example() {
        let (fitted, g, h) = ar_derivatives(&[1.0, 1.0], &[2.0, 3.0], &[10.0], &[true], 2);
        assert_eq!(fitted, vec![5.0]);
        assert_eq!(g, vec![-20.0, -30.0]);
        assert_eq!(h, vec![8.0, 18.0]);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let (_, g, h) = ar_derivatives(&[1.0, 1.0], &[2.0, 3.0], &[5.0], &[true], 2);
        assert_eq!(g, vec![0.0, 0.0]);
        assert_eq!(h, vec![8.0, 18.0]);
    }

    #[test]
    fn naive_parameters_give_flat_forecast() {
        let theta: Vec<f64> = (0..5).flat_map(|_| [1.0, 0.0, 0.0]).collect();
        assert_eq!(ar_forecast_recursive(&theta, &[1.0, 2.0, 9.0], 3, 5), vec![9.0; 5]);
        assert_eq!(ar_forecast_recursive(&[1.0; 4], &[5.0], 1, 4), vec![5.0; 4]);
    }

    #[test]
    fn one_step_forecast_matches_fit_value() {
        let theta = [0.3, -0.2, 0.7];
        let history = [4.0, 1.0, 2.0, 8.0];
        let lags = [8.0, 2.0, 1.0];
        let fc = ar_forecast_recursive(&theta, &history, 3, 1);
        assert_eq!(fc, ar_fit_values(&theta, &lags, &[true], 3));
    }
}
