//! Target time-series models that turn per-observation parameters into fitted
//! values, and the derivatives of their squared-error loss with respect to
//! the raw (pre-link) parameters.

mod ar;
mod ets;
mod stl;

pub use ar::{ar_derivatives, ar_fit_values, ar_forecast_recursive, ar_gradient};
pub use ets::{
    ets_derivatives, ets_filter, ets_forecast, ets_init, DampingConvention, EtsDerivatives, EtsRow, EtsShape,
    EtsState, ETS_GUARD,
};
pub use stl::{stl_basis, stl_components, stl_loss_grad, StlComponents, StlLoss};

use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::boosting::HESSIAN_FLOOR;
use crate::{Error, Result};

/// Raw values are clamped to this magnitude before a sigmoid link, keeping
/// the linked value strictly inside (0, 1).
pub const LINK_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Identity,
    Sigmoid,
}

impl Link {
    pub fn apply(self, raw: f64) -> f64 {
        match self {
            Link::Identity => raw,
            Link::Sigmoid => sigmoid(raw.clamp(-LINK_CLAMP, LINK_CLAMP)),
        }
    }

    /// Derivative of [`Link::apply`]; zero where the clamp is active.
    pub fn derivative(self, raw: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Sigmoid => {
                if raw.abs() > LINK_CLAMP {
                    0.0
                } else {
                    let s = sigmoid(raw);
                    s * (1.0 - s)
                }
            }
        }
    }

    pub fn inverse(self, value: f64) -> f64 {
        match self {
            Link::Identity => value,
            Link::Sigmoid => (value / (1.0 - value)).ln(),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKind {
    Ar {
        p: usize,
    },
    Ets {
        m: usize,
        damped: bool,
        seasonal: bool,
    },
    Stl {
        n_season: usize,
        period: f64,
        penalty: f64,
    },
    /// The single parameter is the forecast itself.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetModelSpec {
    pub kind: TargetKind,
    #[serde(default)]
    pub damping: DampingConvention,
}

impl TargetModelSpec {
    pub fn new(kind: TargetKind) -> Self {
        TargetModelSpec {
            kind,
            damping: DampingConvention::default(),
        }
    }

    pub fn ar(p: usize) -> Self {
        Self::new(TargetKind::Ar { p })
    }

    pub fn ets(m: usize) -> Self {
        Self::new(TargetKind::Ets {
            m,
            damped: true,
            seasonal: true,
        })
    }

    pub fn ets_linear(m: usize) -> Self {
        Self::new(TargetKind::Ets {
            m,
            damped: false,
            seasonal: false,
        })
    }

    pub fn stl(n_season: usize, period: f64, penalty: f64) -> Self {
        Self::new(TargetKind::Stl {
            n_season,
            period,
            penalty,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self.kind {
            TargetKind::Ar { p } if p == 0 => bad("AR order p must be >= 1".into()),
            TargetKind::Ets { m, .. } if m == 0 => bad("ETS season length m must be >= 1".into()),
            TargetKind::Stl { period, penalty, .. } if !(period > 0.0) || !(penalty >= 0.0) => bad(format!(
                "STL needs period > 0 and penalty >= 0, got {period} and {penalty}"
            )),
            _ => Ok(()),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param_names().len()
    }

    pub fn param_names(&self) -> Vec<String> {
        match self.kind {
            TargetKind::Ar { p } => (1..=p).map(|j| format!("theta_{j}")).collect(),
            TargetKind::Ets { damped, seasonal, .. } => {
                let mut names = vec!["alpha".to_string(), "beta".to_string()];
                if seasonal {
                    names.push("gamma".into());
                }
                if damped {
                    names.push("phi".into());
                }
                names
            }
            TargetKind::Stl { n_season, .. } => {
                let mut names = vec!["trend_level".to_string(), "trend_slope".to_string()];
                for i in 1..=n_season {
                    names.push(format!("sin_{i}"));
                    names.push(format!("cos_{i}"));
                }
                names
            }
            TargetKind::Direct => vec!["value".to_string()],
        }
    }

    pub fn links(&self) -> Vec<Link> {
        let link = match self.kind {
            TargetKind::Ets { .. } => Link::Sigmoid,
            _ => Link::Identity,
        };
        vec![link; self.param_count()]
    }

    pub fn ets_shape(&self) -> Option<EtsShape> {
        match self.kind {
            TargetKind::Ets { m, damped, seasonal } => Some(EtsShape { m, seasonal, damped }),
            _ => None,
        }
    }

    /// Position of each ETS parameter column within `(alpha, beta, gamma, phi)`.
    fn ets_slots(&self) -> Vec<usize> {
        match self.kind {
            TargetKind::Ets { damped, seasonal, .. } => {
                let mut slots = vec![0, 1];
                if seasonal {
                    slots.push(2);
                }
                if damped {
                    slots.push(3);
                }
                slots
            }
            _ => Vec::new(),
        }
    }

    /// Start values of the raw parameters: zeros for AR, raw values linking
    /// to 0.3 for ETS, the mean of the active targets as the STL level and
    /// the direct forecast.
    pub fn base_raw(&self, data: &TargetData) -> Vec<f64> {
        let p = self.param_count();
        match self.kind {
            TargetKind::Ar { .. } => vec![0.0; p],
            TargetKind::Ets { .. } => vec![Link::Sigmoid.inverse(0.3); p],
            TargetKind::Stl { .. } | TargetKind::Direct => {
                let mut base = vec![0.0; p];
                base[0] = data.active_mean();
                base
            }
        }
    }
}

/// Raw and linked per-row parameters, row-major `n_rows x n_params`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMatrix {
    pub n_rows: usize,
    pub names: Vec<String>,
    pub raw: Vec<f64>,
    pub values: Vec<f64>,
}

impl ParameterMatrix {
    pub fn from_raw(spec: &TargetModelSpec, raw: Vec<f64>) -> Result<Self> {
        let names = spec.param_names();
        let p = names.len();
        if raw.len() % p != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} raw values do not form rows of {p} parameters",
                raw.len()
            )));
        }
        let links = spec.links();
        let values = if links.iter().all(|l| *l == Link::Identity) {
            raw.clone()
        } else {
            raw.chunks_exact(p)
                .flat_map(|row| row.iter().zip(&links).map(|(&r, l)| l.apply(r)))
                .collect()
        };
        Ok(ParameterMatrix {
            n_rows: raw.len() / p,
            names,
            raw,
            values,
        })
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn ets_rows(&self, spec: &TargetModelSpec) -> Vec<EtsRow> {
        let slots = spec.ets_slots();
        (0..self.n_rows)
            .map(|i| {
                let mut full = [0.0, 0.0, 0.0, 1.0];
                for (c, &slot) in slots.iter().enumerate() {
                    full[slot] = self.row(i)[c];
                }
                EtsRow {
                    alpha: full[0],
                    beta: full[1],
                    gamma: full[2],
                    phi: full[3],
                }
            })
            .collect()
    }
}

/// Contiguous, time-ordered rows of one series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub id: String,
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Everything a target model reads besides its parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetData {
    pub spans: Vec<Span>,
    pub y: Vec<f64>,
    /// False for padded rows and rows without a full set of lags.
    pub active: Vec<bool>,
    pub time_index: Vec<f64>,
    /// Row-major `n_rows x lag_order`; lag `j` of row `t` is `y_{t-j}`.
    pub lags: Arc<Vec<f64>>,
    pub lag_order: usize,
}

impl TargetData {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_rows(&self) -> Vec<usize> {
        (0..self.n_rows()).filter(|&i| self.active[i]).collect()
    }

    fn active_mean(&self) -> f64 {
        let n = self.n_active();
        if n == 0 {
            return 0.0;
        }
        self.y.iter().zip(&self.active).filter(|(_, &a)| a).map(|(y, _)| y).sum::<f64>() / n as f64
    }

    /// Active observations of `span`, in time order.
    pub fn active_values(&self, span: &Span) -> Vec<f64> {
        span.range().filter(|&i| self.active[i]).map(|i| self.y[i]).collect()
    }
}

/// Gauss-Newton curvature of the loss with respect to each row's raw
/// parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Curvature {
    /// `2 v v^T + diag(d)` per row; `v` and `d` are row-major `n x P`.
    /// `diag: None` means `d = 0`. Rows of inactive observations are
    /// unspecified.
    RankOne { v: Arc<Vec<f64>>, diag: Option<Vec<f64>> },
    /// Dense `P x P` block per row, row-major `n x P x P`.
    Full { gram: Vec<f64> },
}

impl Curvature {
    /// Diagonal entry `C_row[j, j]`.
    pub fn diag(&self, row: usize, p: usize, j: usize) -> f64 {
        match self {
            Curvature::RankOne { v, diag } => {
                2.0 * v[row * p + j].powi(2) + diag.as_ref().map_or(0.0, |d| d[row * p + j])
            }
            Curvature::Full { gram } => gram[(row * p + j) * p + j],
        }
    }

    /// `u^T C_row u`.
    pub fn quad_form(&self, row: usize, p: usize, u: &[f64]) -> f64 {
        match self {
            Curvature::RankOne { v, diag } => {
                let v = &v[row * p..(row + 1) * p];
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                let extra = diag.as_ref().map_or(0.0, |d| {
                    d[row * p..(row + 1) * p].iter().zip(u).map(|(a, b)| a * b * b).sum::<f64>()
                });
                2.0 * dot * dot + extra
            }
            Curvature::Full { gram } => {
                let g = &gram[row * p * p..(row + 1) * p * p];
                let mut s = 0.0;
                for k in 0..p {
                    for l in 0..p {
                        s += u[k] * g[k * p + l] * u[l];
                    }
                }
                s
            }
        }
    }
}

/// Loss and derivatives of a target model at given raw parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEval {
    /// Total objective: squared error plus any penalty.
    pub objective: f64,
    pub sse: f64,
    pub n_obs: usize,
    pub fitted: Vec<f64>,
    /// Row-major `n x P` gradient of `objective` with respect to raw parameters.
    pub grad: Vec<f64>,
    /// Row-major `n x P` Gauss-Newton Hessian diagonal, floored at
    /// [`HESSIAN_FLOOR`] on active rows and zero elsewhere. Empty when not
    /// requested.
    pub hess: Vec<f64>,
    pub curvature: Curvature,
}

impl TargetEval {
    /// Objective per active observation.
    pub fn loss(&self) -> f64 {
        self.objective / self.n_obs as f64
    }
}

/// Fitted values, loss and derivatives of `spec` on `data` at raw
/// parameters `raw` (row-major `n x P`).
pub fn evaluate(spec: &TargetModelSpec, data: &TargetData, raw: &[f64]) -> Result<TargetEval> {
    evaluate_with(spec, data, raw, true)
}

/// As [`evaluate`]; with `hessian` false the `hess` field is left empty,
/// for callers that only need the gradient and curvature.
pub fn evaluate_with(spec: &TargetModelSpec, data: &TargetData, raw: &[f64], hessian: bool) -> Result<TargetEval> {
    let p = spec.param_count();
    let n = data.n_rows();
    if raw.len() != n * p {
        return Err(Error::InvalidArgument(format!(
            "expected {} raw parameters ({n} rows x {p}), got {}",
            n * p,
            raw.len()
        )));
    }
    let n_obs = data.n_active();
    if n_obs == 0 {
        return Err(Error::EmptyLoss);
    }
    let params = ParamView::new(spec, raw);
    let mut eval = match spec.kind {
        TargetKind::Ar { p } => {
            if data.lag_order != p {
                return Err(Error::InvalidArgument(format!(
                    "AR({p}) target needs lags of order {p}, data has {}",
                    data.lag_order
                )));
            }
            let (fitted, grad, hess) = if hessian {
                ar_derivatives(&params.values, &data.lags, &data.y, &data.active, p)
            } else {
                let (fitted, grad) = ar_gradient(&params.values, &data.lags, &data.y, &data.active, p);
                (fitted, grad, Vec::new())
            };
            let sse = sq_error(&fitted, data);
            TargetEval {
                objective: sse,
                sse,
                n_obs,
                fitted,
                grad,
                hess,
                curvature: Curvature::RankOne {
                    v: Arc::clone(&data.lags),
                    diag: None,
                },
            }
        }
        TargetKind::Stl {
            n_season,
            period,
            penalty,
        } => {
            let mut fitted = vec![0.0; n];
            let mut grad = vec![0.0; n * p];
            let mut hess = vec![0.0; n * p];
            let mut v = vec![0.0; n * p];
            let mut diag = vec![0.0; n * p];
            let (mut sse, mut objective) = (0.0, 0.0);
            for span in &data.spans {
                let r = span.range();
                let rp = r.start * p..r.end * p;
                let out = stl_loss_grad(
                    &params.values[rp.clone()],
                    &data.time_index[r.clone()],
                    &data.y[r.clone()],
                    &data.active[r.clone()],
                    n_season,
                    period,
                    penalty,
                );
                sse += out.sse;
                objective += out.loss;
                fitted[r.clone()].copy_from_slice(&out.fitted);
                grad[rp.clone()].copy_from_slice(&out.grad);
                hess[rp.clone()].copy_from_slice(&out.hess);
                diag[rp.clone()].copy_from_slice(&out.penalty_diag);
                for i in r {
                    if data.active[i] {
                        v[i * p..(i + 1) * p].copy_from_slice(&stl_basis(data.time_index[i], n_season, period));
                    }
                }
            }
            TargetEval {
                objective,
                sse,
                n_obs,
                fitted,
                grad,
                hess,
                curvature: Curvature::RankOne {
                    v: Arc::new(v),
                    diag: Some(diag),
                },
            }
        }
        TargetKind::Ets { .. } => {
            let shape = spec.ets_shape().expect("ETS shape");
            let slots = spec.ets_slots();
            let rows = ParameterMatrix::from_raw(spec, raw.to_vec())?.ets_rows(spec);
            let mut fitted = vec![0.0; n];
            let mut grad = vec![0.0; n * p];
            let mut gram = vec![0.0; n * p * p];
            let mut sse = 0.0;
            for span in &data.spans {
                let r = span.range();
                let init = ets_init(&data.active_values(span), &shape, &span.id)?;
                let d = ets_derivatives(
                    &data.y[r.clone()],
                    &data.active[r.clone()],
                    &rows[r.clone()],
                    &init,
                    &shape,
                    &span.id,
                )?;
                sse += d.sse;
                fitted[r.clone()].copy_from_slice(&d.fitted);
                for (k, i) in r.enumerate() {
                    for (c, &sc) in slots.iter().enumerate() {
                        grad[i * p + c] = d.grad[k][sc];
                        for (e, &se) in slots.iter().enumerate() {
                            gram[(i * p + c) * p + e] = d.gram[k][sc][se];
                        }
                    }
                }
            }
            TargetEval {
                objective: sse,
                sse,
                n_obs,
                fitted,
                grad,
                hess: vec![0.0; n * p],
                curvature: Curvature::Full { gram },
            }
        }
        TargetKind::Direct => {
            let fitted: Vec<f64> = (0..n).map(|i| if data.active[i] { params.values[i] } else { 0.0 }).collect();
            let grad = (0..n)
                .map(|i| if data.active[i] { 2.0 * (fitted[i] - data.y[i]) } else { 0.0 })
                .collect();
            let sse = sq_error(&fitted, data);
            TargetEval {
                objective: sse,
                sse,
                n_obs,
                fitted,
                grad,
                hess: data.active.iter().map(|&a| if a { 2.0 } else { 0.0 }).collect(),
                curvature: Curvature::RankOne {
                    v: Arc::new(data.active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()),
                    diag: None,
                },
            }
        }
    };

    // With identity links the targets' own Hessian diagonals are already
    // in raw space; otherwise read them off the rescaled curvature.
    let raw_space = spec.links().iter().all(|l| *l == Link::Identity);
    chain_links(spec, &params, &mut eval);
    for i in 0..n {
        let r = i * p..(i + 1) * p;
        if !data.active[i] {
            eval.grad[r.clone()].fill(0.0);
            if hessian {
                eval.hess[r].fill(0.0);
            }
            continue;
        }
        if !hessian {
            continue;
        }
        if raw_space {
            for h in &mut eval.hess[r] {
                *h = h.max(HESSIAN_FLOOR);
            }
        } else {
            for j in 0..p {
                eval.hess[i * p + j] = eval.curvature.diag(i, p, j).max(HESSIAN_FLOOR);
            }
        }
    }
    if !hessian {
        eval.hess = Vec::new();
    }
    if !eval.objective.is_finite() {
        return Err(Error::NonFinite {
            context: "target loss".into(),
            index: 0,
        });
    }
    Ok(eval)
}

/// Objective only, without derivatives. Used by finite-difference oracles.
pub fn objective(spec: &TargetModelSpec, data: &TargetData, raw: &[f64]) -> Result<f64> {
    let p = spec.param_count();
    if raw.len() != data.n_rows() * p {
        return Err(Error::InvalidArgument("raw parameter length mismatch".into()));
    }
    match spec.kind {
        TargetKind::Ets { .. } => {
            let shape = spec.ets_shape().expect("ETS shape");
            let rows = ParameterMatrix::from_raw(spec, raw.to_vec())?.ets_rows(spec);
            let mut sse = 0.0;
            for span in &data.spans {
                let r = span.range();
                let init = ets_init(&data.active_values(span), &shape, &span.id)?;
                let (fitted, _) = ets_filter(
                    &data.y[r.clone()],
                    &data.active[r.clone()],
                    &rows[r.clone()],
                    &init,
                    &shape,
                    &span.id,
                )?;
                sse += r.clone().zip(&fitted).filter(|(i, _)| data.active[*i]).map(|(i, f)| (f - data.y[i]).powi(2)).sum::<f64>();
            }
            Ok(sse)
        }
        TargetKind::Ar { p } if data.lag_order == p && data.n_active() > 0 => {
            let params = ParamView::new(spec, raw);
            let fitted = ar_fit_values(&params.values, &data.lags, &data.active, p);
            let sse = sq_error(&fitted, data);
            if !sse.is_finite() {
                return Err(Error::NonFinite {
                    context: "target loss".into(),
                    index: 0,
                });
            }
            Ok(sse)
        }
        _ => evaluate(spec, data, raw).map(|e| e.objective),
    }
}

fn sq_error(fitted: &[f64], data: &TargetData) -> f64 {
    (0..data.n_rows())
        .filter(|&i| data.active[i])
        .map(|i| (fitted[i] - data.y[i]).powi(2))
        .sum()
}

/// Rescales gradients and curvature from linked values to raw parameters.
/// Linked parameter values, borrowing the raw values when every link is
/// the identity.
struct ParamView<'a> {
    raw: &'a [f64],
    values: Cow<'a, [f64]>,
    n_rows: usize,
}

impl<'a> ParamView<'a> {
    fn new(spec: &TargetModelSpec, raw: &'a [f64]) -> Self {
        let links = spec.links();
        let p = links.len();
        let values = if links.iter().all(|l| *l == Link::Identity) {
            Cow::Borrowed(raw)
        } else {
            Cow::Owned(
                raw.chunks_exact(p)
                    .flat_map(|row| row.iter().zip(&links).map(|(&r, l)| l.apply(r)))
                    .collect(),
            )
        };
        ParamView {
            raw,
            values,
            n_rows: raw.len() / p,
        }
    }
}

fn chain_links(spec: &TargetModelSpec, params: &ParamView, eval: &mut TargetEval) {
    let links = spec.links();
    if links.iter().all(|l| *l == Link::Identity) {
        return;
    }
    let p = links.len();
    let d: Vec<f64> = params.raw.iter().enumerate().map(|(i, &r)| links[i % p].derivative(r)).collect();
    for (g, d) in eval.grad.iter_mut().zip(&d) {
        *g *= d;
    }
    match &mut eval.curvature {
        Curvature::RankOne { v, diag } => {
            for (v, d) in Arc::make_mut(v).iter_mut().zip(&d) {
                *v *= d;
            }
            if let Some(diag) = diag {
                for (dg, d) in diag.iter_mut().zip(&d) {
                    *dg *= d * d;
                }
            }
        }
        Curvature::Full { gram } => {
            for i in 0..params.n_rows {
                for k in 0..p {
                    for l in 0..p {
                        gram[(i * p + k) * p + l] *= d[i * p + k] * d[i * p + l];
                    }
                }
            }
        }
    }
}
