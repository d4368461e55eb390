//! Damped-trend, multiplicative-seasonality exponential smoothing with
//! per-step parameters.
//!
//! For step `t` (1-based) with `a = l + phi b` and `s_old` the seasonal state
//! from `m` steps earlier:
//!
//! ```text
//! fitted_t = a * s_old
//! l_t = alpha y_t / s_old + (1 - alpha) a
//! b_t = beta (l_t - l) + (1 - beta) phi b
//! s_t = gamma y_t / a + (1 - gamma) s_old
//! ```
//!
//! The non-seasonal variant keeps `s = 1`; the undamped one keeps `phi = 1`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Smallest admissible `l + phi b` and seasonal state.
pub const ETS_GUARD: f64 = 1e-8;

/// Parameter values for one step. Unused parameters are ignored: `gamma`
/// without seasonality, `phi` without damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtsRow {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl EtsRow {
    pub fn constant(v: f64) -> Self {
        EtsRow {
            alpha: v,
            beta: v,
            gamma: v,
            phi: v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtsShape {
    pub m: usize,
    pub seasonal: bool,
    pub damped: bool,
}

impl EtsShape {
    fn effective(&self, row: &EtsRow) -> EtsRow {
        EtsRow {
            alpha: row.alpha,
            beta: row.beta,
            gamma: if self.seasonal { row.gamma } else { 0.0 },
            phi: if self.damped { row.phi } else { 1.0 },
        }
    }
}

/// Level, trend and the ring of the last `m` seasonal states. The state for
/// step `t` lives in slot `(t - 1) mod m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsState {
    pub level: f64,
    pub trend: f64,
    pub seasonal: Vec<f64>,
    /// Number of observed steps consumed.
    pub steps: usize,
}

impl EtsState {
    fn season(&self, step: usize) -> f64 {
        self.seasonal[step % self.seasonal.len()]
    }
}

fn guard(series: &str, t: usize, what: String) -> Error {
    Error::NumericGuard {
        series: series.to_string(),
        t,
        what,
    }
}

/// Heuristic start state from the first `2m` observations: level is the mean
/// of the first season, trend the per-step change between the first two
/// season means, seasonal indices the first season divided by the level and
/// renormalised to mean one.
pub fn ets_init(y: &[f64], shape: &EtsShape, series: &str) -> Result<EtsState> {
    let m = shape.m.max(1);
    if y.len() < 2 * m {
        return Err(Error::InvalidArgument(format!(
            "series '{series}' has {} observations; ETS initialisation needs at least {}",
            y.len(),
            2 * m
        )));
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let level = mean(&y[..m]);
    let trend = (mean(&y[m..2 * m]) - level) / m as f64;
    let seasonal = if shape.seasonal {
        if !(level > ETS_GUARD) {
            return Err(guard(series, 0, format!("initial level {level} is not positive")));
        }
        let raw: Vec<f64> = y[..m].iter().map(|v| v / level).collect();
        let norm = mean(&raw);
        raw.iter().map(|s| s / norm).collect()
    } else {
        vec![1.0]
    };
    Ok(EtsState {
        level,
        trend,
        seasonal,
        steps: 0,
    })
}

/// One-step fitted values over a series. Inactive steps keep the state
/// frozen and report 0.
pub fn ets_filter(
    y: &[f64],
    active: &[bool],
    rows: &[EtsRow],
    init: &EtsState,
    shape: &EtsShape,
    series: &str,
) -> Result<(Vec<f64>, EtsState)> {
    let mut st = init.clone();
    let mut fitted = vec![0.0; y.len()];
    for i in 0..y.len() {
        if !active[i] {
            continue;
        }
        let p = shape.effective(&rows[i]);
        let slot = st.steps % st.seasonal.len();
        let s_old = st.seasonal[slot];
        let a = st.level + p.phi * st.trend;
        if !(a > ETS_GUARD) {
            return Err(guard(series, st.steps + 1, format!("level + phi * trend = {a} is not positive")));
        }
        if !(s_old > ETS_GUARD) {
            return Err(guard(series, st.steps + 1, format!("seasonal state {s_old} is not positive")));
        }
        fitted[i] = a * s_old;
        let level = p.alpha * y[i] / s_old + (1.0 - p.alpha) * a;
        st.trend = p.beta * (level - st.level) + (1.0 - p.beta) * p.phi * st.trend;
        st.level = level;
        if shape.seasonal {
            st.seasonal[slot] = p.gamma * y[i] / a + (1.0 - p.gamma) * s_old;
        }
        st.steps += 1;
    }
    Ok((fitted, st))
}

/// Derivatives of `sum_t (fitted_t - y_t)^2` with respect to the parameter
/// values `(alpha, beta, gamma, phi)` of every step.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsDerivatives {
    pub fitted: Vec<f64>,
    pub sse: f64,
    pub state: EtsState,
    pub grad: Vec<[f64; 4]>,
    /// Gauss-Newton curvature `2 sum_t J_t J_t^T` of each step's parameters.
    pub gram: Vec<[[f64; 4]; 4]>,
}

struct Step {
    row: usize,
    y: f64,
    level: f64,
    trend: f64,
    level_new: f64,
    slot: usize,
    s_old: f64,
    a: f64,
    p: EtsRow,
}

/// Forward-sensitivity derivatives: for each step the tangents of level,
/// trend and the seasonal ring with respect to that step's parameters are
/// carried through the rest of the series.
pub fn ets_derivatives(
    y: &[f64],
    active: &[bool],
    rows: &[EtsRow],
    init: &EtsState,
    shape: &EtsShape,
    series: &str,
) -> Result<EtsDerivatives> {
    let (fitted, state) = ets_filter(y, active, rows, init, shape, series)?;
    let mut steps = Vec::new();
    let mut st = init.clone();
    for i in 0..y.len() {
        if !active[i] {
            continue;
        }
        let p = shape.effective(&rows[i]);
        let slot = st.steps % st.seasonal.len();
        let s_old = st.seasonal[slot];
        let a = st.level + p.phi * st.trend;
        let level_new = p.alpha * y[i] / s_old + (1.0 - p.alpha) * a;
        steps.push(Step {
            row: i,
            y: y[i],
            level: st.level,
            trend: st.trend,
            level_new,
            slot,
            s_old,
            a,
            p,
        });
        st.trend = p.beta * (level_new - st.level) + (1.0 - p.beta) * p.phi * st.trend;
        st.level = level_new;
        if shape.seasonal {
            st.seasonal[slot] = p.gamma * y[i] / a + (1.0 - p.gamma) * s_old;
        }
        st.steps += 1;
    }

    let n = y.len();
    let m = init.seasonal.len();
    let mut grad = vec![[0.0; 4]; n];
    let mut gram = vec![[[0.0; 4]; 4]; n];
    let resid: Vec<f64> = steps.iter().map(|s| 2.0 * (fitted[s.row] - s.y)).collect();
    let sse = steps.iter().map(|s| (fitted[s.row] - s.y).powi(2)).sum();

    let mut dring = vec![[0.0f64; 4]; m];
    for q in 0..steps.len() {
        let mut dl = [0.0f64; 4];
        let mut db = [0.0f64; 4];
        dring.iter_mut().for_each(|d| *d = [0.0; 4]);
        let mut g = [0.0f64; 4];
        let mut c = [[0.0f64; 4]; 4];
        for (u, s) in steps.iter().enumerate().skip(q) {
            let seeded = u == q;
            let mut df = [0.0f64; 4];
            for k in 0..4 {
                let unit = |idx: usize| if seeded && k == idx { 1.0 } else { 0.0 };
                let (dalpha, dbeta, dgamma, dphi) = (unit(0), unit(1), unit(2), unit(3));
                let dso = dring[s.slot][k];
                let da = dl[k] + s.p.phi * db[k] + dphi * s.trend;
                df[k] = da * s.s_old + s.a * dso;
                let dl_new = dalpha * (s.y / s.s_old - s.a) - s.p.alpha * s.y * dso / (s.s_old * s.s_old)
                    + (1.0 - s.p.alpha) * da;
                let db_new = dbeta * (s.level_new - s.level - s.p.phi * s.trend)
                    + s.p.beta * (dl_new - dl[k])
                    + (1.0 - s.p.beta) * (s.p.phi * db[k] + dphi * s.trend);
                if shape.seasonal {
                    dring[s.slot][k] =
                        dgamma * (s.y / s.a - s.s_old) - s.p.gamma * s.y * da / (s.a * s.a) + (1.0 - s.p.gamma) * dso;
                }
                dl[k] = dl_new;
                db[k] = db_new;
            }
            for k in 0..4 {
                g[k] += resid[u] * df[k];
                for l in 0..4 {
                    c[k][l] += 2.0 * df[k] * df[l];
                }
            }
        }
        grad[steps[q].row] = g;
        gram[steps[q].row] = c;
    }
    Ok(EtsDerivatives {
        fitted,
        sse,
        state,
        grad,
        gram,
    })
}

/// How the damping factors of future steps combine in the h-step forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingConvention {
    /// Term `j` is `phi_{t+j}^j`.
    #[default]
    Power,
    /// Term `j` is `phi_{t+1} * ... * phi_{t+j}`.
    CumulativeProduct,
}

/// `yhat_{t+h} = [l_t + sum_{j<=h} d_j b_t] * s_{t+h-m(k+1)}` with
/// `k = floor((h - 1) / m)`; `future` holds the parameters of steps
/// `t+1..t+h`.
pub fn ets_forecast(
    state: &EtsState,
    future: &[EtsRow],
    h: usize,
    shape: &EtsShape,
    convention: DampingConvention,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(h);
    let mut damp_sum = 0.0;
    let mut cumulative = 1.0;
    for j in 1..=h {
        let phi = shape.effective(&future[j - 1]).phi;
        let term = match convention {
            DampingConvention::Power => phi.powi(j as i32),
            DampingConvention::CumulativeProduct => {
                cumulative *= phi;
                cumulative
            }
        };
        damp_sum += term;
        let season = state.season(state.steps + j - 1);
        out.push((state.level + damp_sum * state.trend) * season);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_state(level: f64, trend: f64) -> EtsState {
        EtsState {
            level,
            trend,
            seasonal: vec![1.0],
            steps: 0,
        }
    }

    const DAMPED: EtsShape = EtsShape {
        m: 1,
        seasonal: true,
        damped: true,
    };

    #[test]
    fn hand_recursion_example() {
        let row = EtsRow {
            alpha: 0.5,
            beta: 0.5,
            gamma: 0.0,
            phi: 1.0,
        };
        let (fitted, st) = ets_filter(&[120.0], &[true], &[row], &flat_state(100.0, 10.0), &DAMPED, "s").unwrap();
        assert_eq!(fitted, vec![110.0]);
        assert_eq!(st.level, 115.0);
        assert_eq!(st.trend, 12.5);
        assert_eq!(st.seasonal, vec![1.0]);
    }

    #[test]
    fn alpha_one_is_naive() {
        let row = EtsRow {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            phi: 1.0,
        };
        let y = [5.0, 7.0, 6.0, 9.0];
        let (fitted, st) = ets_filter(&y, &[true; 4], &[row; 4], &flat_state(5.0, 0.0), &DAMPED, "s").unwrap();
        assert_eq!(&fitted[1..], &y[..3]);
        assert_eq!(st.level, 9.0);
    }

    #[test]
    fn forecast_examples() {
        let linear = EtsShape {
            m: 1,
            seasonal: false,
            damped: false,
        };
        let fc = ets_forecast(&flat_state(100.0, 10.0), &[EtsRow::constant(0.3); 3], 3, &linear, DampingConvention::Power);
        assert_eq!(fc, vec![110.0, 120.0, 130.0]);

        let mut st = flat_state(100.0, 0.0);
        st.seasonal = vec![0.5, 1.5];
        st.steps = 3;
        let shape = EtsShape {
            m: 2,
            seasonal: true,
            damped: true,
        };
        let fc = ets_forecast(&st, &[EtsRow::constant(0.5); 3], 3, &shape, DampingConvention::Power);
        assert_eq!(fc, vec![150.0, 50.0, 150.0]);

        let fc = ets_forecast(&flat_state(100.0, 10.0), &[EtsRow::constant(0.5); 2], 2, &DAMPED, DampingConvention::Power);
        assert_eq!(fc[1], 107.5);
    }

    #[test]
    fn cumulative_convention_differs_for_varying_phi() {
        let rows = [
            EtsRow::constant(0.5),
            EtsRow {
                phi: 0.9,
                ..EtsRow::constant(0.5)
            },
        ];
        let st = flat_state(100.0, 10.0);
        let power = ets_forecast(&st, &rows, 2, &DAMPED, DampingConvention::Power);
        let cumulative = ets_forecast(&st, &rows, 2, &DAMPED, DampingConvention::CumulativeProduct);
        assert!((power[1] - (100.0 + (0.5 + 0.81) * 10.0)).abs() < 1e-12);
        assert!((cumulative[1] - (100.0 + (0.5 + 0.45) * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_level_is_guarded() {
        let row = EtsRow::constant(0.5);
        let err = ets_filter(&[1.0], &[true], &[row], &flat_state(-1.0, 0.0), &DAMPED, "abc").unwrap_err();
        assert!(matches!(err, Error::NumericGuard { ref series, t: 1, .. } if series == "abc"));
    }

    #[test]
    fn initial_state_heuristic() {
        let y = [2.0, 4.0, 4.0, 6.0];
        let shape = EtsShape {
            m: 2,
            seasonal: true,
            damped: true,
        };
        let st = ets_init(&y, &shape, "s").unwrap();
        assert_eq!(st.level, 3.0);
        assert_eq!(st.trend, 1.0);
        assert_eq!(st.seasonal, vec![2.0 / 3.0, 4.0 / 3.0]);
        assert!(ets_init(&y[..3], &shape, "s").is_err());
    }
}
