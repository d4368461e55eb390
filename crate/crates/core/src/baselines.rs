//! Deterministic reference models: least-squares AR(p), classical
//! moving-average decomposition and fixed-parameter ETS.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::metrics::wape;
use crate::targets::{ar_forecast_recursive, ets_filter, ets_forecast, ets_init, DampingConvention, EtsRow, EtsShape};
use crate::{Error, Result};

/// Columns whose QR diagonal falls below this fraction of the largest one
/// are treated as linearly dependent on earlier columns.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsArModel {
    /// `coefficients[j - 1]` multiplies `y_{t-j}`.
    pub coefficients: Vec<f64>,
    pub intercept: Option<f64>,
    pub residual_variance: f64,
}

impl OlsArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_next(&self, history: &[f64]) -> f64 {
        let n = history.len();
        let c = self.intercept.unwrap_or(0.0);
        c + self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, th)| th * history[n - 1 - j])
            .sum::<f64>()
    }

    /// Recursive `h`-step forecast from the end of `history`.
    pub fn forecast(&self, history: &[f64], h: usize) -> Vec<f64> {
        let p = self.order();
        match self.intercept {
            None => {
                let theta: Vec<f64> = (0..h).flat_map(|_| self.coefficients.iter().copied()).collect();
                ar_forecast_recursive(&theta, history, p, h)
            }
            Some(_) => {
                let mut buf = history.to_vec();
                for _ in 0..h {
                    let next = self.predict_next(&buf);
                    buf.push(next);
                }
                buf.split_off(history.len())
            }
        }
    }

    /// Sum of squared one-step residuals over `t >= p`.
    pub fn sse(&self, series: &[f64]) -> f64 {
        let p = self.order();
        (p..series.len())
            .map(|t| (series[t] - self.predict_next(&series[..t])).powi(2))
            .sum()
    }
}

/// Least-squares AR(p) via a Householder QR of the lagged design.
pub fn fit_ols_ar(series: &[f64], p: usize, intercept: bool) -> Result<OlsArModel> {
    if p == 0 {
        return Err(Error::InvalidArgument("AR order must be >= 1".into()));
    }
    if series.len() < 2 * p + 1 {
        return Err(Error::InvalidArgument(format!(
            "OLS AR({p}) needs at least {} observations, got {}",
            2 * p + 1,
            series.len()
        )));
    }
    let rows = series.len() - p;
    let cols = p + usize::from(intercept);
    let x = DMatrix::from_fn(rows, cols, |r, c| {
        let t = r + p;
        if c < p {
            series[t - 1 - c]
        } else {
            1.0
        }
    });
    let y = DVector::from_iterator(rows, series[p..].iter().copied());
    let qr = x.qr();
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let dependent: Vec<usize> = (0..cols)
        .filter(|&i| !(r[(i, i)].abs() > RANK_TOL * diag_max.max(f64::MIN_POSITIVE)))
        .collect();
    if !dependent.is_empty() {
        // report lags 1-based; the intercept column is reported as 0
        let columns = dependent.iter().map(|&c| if c < p { c + 1 } else { 0 }).collect();
        return Err(Error::RankDeficient { columns });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { columns: Vec::new() })?;
    let model = OlsArModel {
        coefficients: beta.iter().take(p).copied().collect(),
        intercept: intercept.then(|| beta[p]),
        residual_variance: 0.0,
    };
    let dof = rows.saturating_sub(cols).max(1);
    let residual_variance = model.sse(series) / dof as f64;
    Ok(OlsArModel {
        residual_variance,
        ..model
    })
}

/// Classical additive decomposition. Trend and remainder are `None` on the
/// edge points where the centred moving average is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub trend: Vec<Option<f64>>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<Option<f64>>,
    /// Zero-mean seasonal pattern indexed by position modulo `m`.
    pub pattern: Vec<f64>,
}

impl Decomposition {
    pub fn interior(&self) -> Vec<usize> {
        (0..self.trend.len()).filter(|&t| self.trend[t].is_some()).collect()
    }
}

/// Centred moving-average trend (2 x m for even `m`, m for odd `m`),
/// seasonal as per-position means of the detrended series shifted to mean
/// zero, and the remainder.
pub fn classical_decompose(series: &[f64], m: usize) -> Result<Decomposition> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("decomposition period must be >= 2, got {m}")));
    }
    let n = series.len();
    if n < 2 * m {
        return Err(Error::InvalidArgument(format!(
            "decomposition with period {m} needs at least {} observations, got {n}",
            2 * m
        )));
    }
    let half = m / 2;
    let mut trend = vec![None; n];
    for (t, slot) in trend.iter_mut().enumerate().take(n - half).skip(half) {
        let v = if m % 2 == 0 {
            let inner: f64 = series[t + 1 - half..t + half].iter().sum();
            (inner + 0.5 * (series[t - half] + series[t + half])) / m as f64
        } else {
            series[t - half..=t + half].iter().sum::<f64>() / m as f64
        };
        *slot = Some(v);
    }
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for t in 0..n {
        if let Some(tr) = trend[t] {
            sums[t % m] += series[t] - tr;
            counts[t % m] += 1;
        }
    }
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let centre = raw.iter().sum::<f64>() / m as f64;
    let pattern: Vec<f64> = raw.iter().map(|v| v - centre).collect();
    let seasonal: Vec<f64> = (0..n).map(|t| pattern[t % m]).collect();
    let remainder = (0..n).map(|t| trend[t].map(|tr| series[t] - tr - seasonal[t])).collect();
    Ok(Decomposition {
        trend,
        seasonal,
        remainder,
        pattern,
    })
}

/// ETS with constant parameters over history and horizon.
pub fn fixed_ets_forecast(
    series: &[f64],
    params: EtsRow,
    shape: &EtsShape,
    h: usize,
    convention: DampingConvention,
) -> Result<Vec<f64>> {
    let init = ets_init(series, shape, "fixed")?;
    let rows = vec![params; series.len()];
    let (_, state) = ets_filter(series, &vec![true; series.len()], &rows, &init, shape, "fixed")?;
    Ok(ets_forecast(&state, &vec![params; h], h, shape, convention))
}

/// The grid {0.1, ..., 0.9} of shared constant ETS parameter values.
pub fn ets_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

/// Picks the constant value shared by all ETS parameters that minimises the
/// mean hold-out WAPE over `series`, each given as `(train, holdout)`. Ties
/// go to the smaller value. Values whose recursion breaks down are skipped.
pub fn ets_grid_search(
    series: &[(Vec<f64>, Vec<f64>)],
    shape: &EtsShape,
    convention: DampingConvention,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut scores = Vec::new();
    for v in ets_grid() {
        let mut total = 0.0;
        let mut ok = true;
        for (train, holdout) in series {
            match fixed_ets_forecast(train, EtsRow::constant(v), shape, holdout.len(), convention) {
                Ok(fc) => total += wape(holdout, &fc)?,
                Err(Error::NumericGuard { .. }) => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if ok {
            scores.push((v, total / series.len() as f64));
        }
    }
    let best = scores
        .iter()
        .fold(None::<(f64, f64)>, |acc, &(v, s)| match acc {
            Some((_, bs)) if bs <= s => acc,
            _ => Some((v, s)),
        })
        .ok_or_else(|| Error::NumericGuard {
            series: String::new(),
            t: 0,
            what: "no grid value produced a valid ETS forecast".into(),
        })?;
    Ok((best.0, scores))
}
