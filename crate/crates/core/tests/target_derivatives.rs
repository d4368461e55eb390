use hypertrees::grad::{finite_diff_check, hessian_diag_check, DEFAULT_EPS};
use hypertrees::targets::{evaluate, objective, Span, TargetData, TargetModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_series(y: Vec<f64>, p: usize) -> TargetData {
    let n = y.len();
    let mut lags = vec![0.0; n * p];
    let mut active = vec![true; n];
    for t in 0..n {
        if t < p {
            active[t] = false;
            continue;
        }
        for j in 1..=p {
            lags[t * p + j - 1] = y[t - j];
        }
    }
    TargetData {
        spans: vec![Span {
            id: "s".into(),
            start: 0,
            len: n,
        }],
        y,
        active,
        time_index: (0..n).map(|t| t as f64).collect(),
        lags: lags.into(),
        lag_order: p,
    }
}

fn seasonal_series(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<f64> {
    let level = rng.random_range(2.0..5.0);
    let slope = rng.random_range(-0.02..0.05);
    (0..n)
        .map(|t| {
            let season = 1.0 + 0.3 * (2.0 * std::f64::consts::PI * t as f64 / m as f64).sin();
            (level + slope * t as f64) * season * rng.random_range(0.9..1.1)
        })
        .collect()
}

#[test]
fn ar_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = TargetModelSpec::ar(3);
    for _ in 0..100 {
        let y: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let data = single_series(y, 3);
        let raw: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let eval = evaluate(&spec, &data, &raw).unwrap();
        let err = finite_diff_check(|t| objective(&spec, &data, t), &raw, &eval.grad, DEFAULT_EPS).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn ar_hessian_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = TargetModelSpec::ar(2);
    let y: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
    let data = single_series(y, 2);
    let raw: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let eval = evaluate(&spec, &data, &raw).unwrap();
    let hess: Vec<f64> = eval
        .hess
        .iter()
        .enumerate()
        .map(|(i, &h)| if data.active[i / 2] { h } else { 0.0 })
        .collect();
    let err = hessian_diag_check(|t| objective(&spec, &data, t), &raw, &hess, 1e-4).unwrap();
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn stl_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let spec = TargetModelSpec::stl(2, 12.0, 1.0);
    for _ in 0..100 {
        let y: Vec<f64> = (0..24).map(|t| 0.1 * t as f64 + rng.random_range(-1.0..1.0)).collect();
        let mut data = single_series(y, 0);
        data.active = vec![true; 24];
        let raw: Vec<f64> = (0..24 * 6).map(|_| rng.random_range(-0.5..0.5)).collect();
        let eval = evaluate(&spec, &data, &raw).unwrap();
        let err = finite_diff_check(|t| objective(&spec, &data, t), &raw, &eval.grad, DEFAULT_EPS).unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }
}

#[test]
fn ets_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..100 {
        let spec = if case % 4 == 3 {
            TargetModelSpec::ets_linear(4)
        } else {
            TargetModelSpec::ets(4)
        };
        let p = spec.param_count();
        let n = rng.random_range(12..24);
        let mut data = single_series(seasonal_series(&mut rng, n, 4), 0);
        data.active = vec![true; n];
        let raw: Vec<f64> = (0..n * p).map(|_| rng.random_range(-2.5..1.0)).collect();
        let eval = evaluate(&spec, &data, &raw).unwrap();
        let err = finite_diff_check(|t| objective(&spec, &data, t), &raw, &eval.grad, DEFAULT_EPS).unwrap();
        assert!(err < 1e-3, "case {case}: relative error {err}");
    }
}

#[test]
fn ets_gradient_vanishes_on_model_generated_data() {
    use hypertrees::targets::{ets_filter, ets_init, EtsRow, EtsShape};
    let shape = EtsShape {
        m: 4,
        seasonal: true,
        damped: true,
    };
    let spec = TargetModelSpec::ets(4);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut y = seasonal_series(&mut rng, 8, 4);
    let init = ets_init(&y, &shape, "s").unwrap();
    let raw: Vec<f64> = (0..32 * 4).map(|_| rng.random_range(-2.0..1.0)).collect();
    let rows: Vec<EtsRow> = raw
        .chunks(4)
        .map(|c| {
            let s = |x: f64| 1.0 / (1.0 + (-x).exp());
            EtsRow {
                alpha: s(c[0]),
                beta: s(c[1]),
                gamma: s(c[2]),
                phi: s(c[3]),
            }
        })
        .collect();
    // generate each observation as the one-step fit of the recursion so far
    y.resize(32, 0.0);
    for t in 0..32 {
        let (fitted, _) = ets_filter(&y[..=t], &vec![true; t + 1], &rows[..=t], &init, &shape, "s").unwrap();
        if t >= 8 {
            y[t] = fitted[t];
        }
    }
    // the first 2m values define the initial state and are kept as drawn
    let mut data = single_series(y.clone(), 0);
    data.active = vec![true; 32];
    let eval = evaluate(&spec, &data, &raw).unwrap();
    let resid: f64 = (8..32).map(|t| (eval.fitted[t] - y[t]).abs()).fold(0.0, f64::max);
    assert!(resid < 1e-8, "{resid}");
    for t in 8..32 {
        for j in 0..4 {
            assert!(eval.grad[t * 4 + j].abs() < 1e-8, "row {t} param {j}: {}", eval.grad[t * 4 + j]);
        }
    }
}
