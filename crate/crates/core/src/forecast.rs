//! Multi-step forecasts from a trained parameter model.

use chrono::NaiveDate;

use crate::data::{build_design, build_future_design, Design, FeatureSpec, PanelDataset};
use crate::hypertree::ParameterModel;
use crate::targets::{
    ar_forecast_recursive, ets_filter, ets_forecast, ets_init, stl_components, ParameterMatrix, StlComponents, TargetKind,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ForecastOptions {
    /// Replace the time-varying AR parameters over the horizon by their
    /// per-series mean.
    pub average_parameters: bool,
}

/// Forecasts of every series, with the parameters used for each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub series_ids: Vec<String>,
    /// Row-major `n_series x h`.
    pub values: Vec<f64>,
    pub timestamps: Vec<NaiveDate>,
    pub parameters: ParameterMatrix,
    pub horizon: usize,
}

impl Forecast {
    pub fn series(&self, k: usize) -> &[f64] {
        &self.values[k * self.horizon..(k + 1) * self.horizon]
    }

    /// `(series_id, timestamp, value)` rows.
    pub fn rows(&self) -> Vec<(String, NaiveDate, f64)> {
        (0..self.values.len())
            .map(|i| (self.series_ids[i / self.horizon.max(1)].clone(), self.timestamps[i], self.values[i]))
            .collect()
    }
}

/// Mean of each parameter over the rows, repeated for every row.
pub fn average_parameters(values: &[f64], p: usize) -> Vec<f64> {
    let n = values.len() / p;
    if n == 0 {
        return Vec::new();
    }
    let mut mean = vec![0.0; p];
    for row in values.chunks(p) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    (0..n).flat_map(|_| mean.iter().copied()).collect()
}

/// `h`-step forecasts after the last observation of each series in `ds`.
/// `ds` must be prepared as for training (lags for AR, padding for ETS).
/// `known` optionally supplies future categorical and numeric features.
pub fn forecast(
    model: &dyn ParameterModel,
    ds: &PanelDataset,
    features: &FeatureSpec,
    h: usize,
    known: Option<&PanelDataset>,
    options: ForecastOptions,
) -> Result<Forecast> {
    let spec = *model.spec();
    let p = spec.param_count();
    let future = build_future_design(ds, features, h, known)?;
    let fut_raw = if h == 0 { Vec::new() } else { model.predict_raw(&future.x)? };
    if h > 0 {
        let schema = crate::data::FeatureSchema {
            names: model.schema().names.clone(),
            kinds: future.x.kinds().to_vec(),
        };
        model.schema().check_matches(&schema)?;
    }
    let mut params = ParameterMatrix::from_raw(&spec, fut_raw)?;
    if options.average_parameters {
        if !matches!(spec.kind, TargetKind::Ar { .. }) {
            return Err(Error::Capability("parameter averaging applies to AR targets only".into()));
        }
        for span in &future.spans {
            let r = span.start * p..(span.start + span.len) * p;
            let avg = average_parameters(&params.values[r.clone()], p);
            params.values[r].copy_from_slice(&avg);
        }
    }

    let mut values = Vec::with_capacity(ds.series.len() * h);
    match spec.kind {
        TargetKind::Ar { p } => {
            for (s, span) in ds.series.iter().zip(&future.spans) {
                let hist = s.observed_values();
                if hist.len() < p {
                    return Err(Error::InvalidArgument(format!(
                        "series '{}' has {} observations, AR({p}) needs {p}",
                        s.id,
                        hist.len()
                    )));
                }
                let theta = &params.values[span.start * p..(span.start + h) * p];
                values.extend(ar_forecast_recursive(theta, hist, p, h));
            }
        }
        TargetKind::Ets { .. } => {
            let shape = spec.ets_shape().expect("ETS shape");
            let design = build_design(ds, features)?;
            model.schema().check_matches(&design.schema)?;
            let hist = ParameterMatrix::from_raw(&spec, model.predict_raw(&design.x)?)?;
            let hist_rows = hist.ets_rows(&spec);
            let fut_rows = params.ets_rows(&spec);
            for (span, fspan) in design.target.spans.iter().zip(&future.spans) {
                let r = span.range();
                let t = &design.target;
                let init = ets_init(&t.active_values(span), &shape, &span.id)?;
                let (_, state) = ets_filter(&t.y[r.clone()], &t.active[r.clone()], &hist_rows[r], &init, &shape, &span.id)?;
                let fr = &fut_rows[fspan.start..fspan.start + h];
                values.extend(ets_forecast(&state, fr, h, &shape, spec.damping));
            }
        }
        TargetKind::Stl { n_season, period, .. } => {
            for span in &future.spans {
                let r = span.start..span.start + h;
                let c = stl_components(
                    &params.values[r.start * p..r.end * p],
                    &future.time_index[r],
                    n_season,
                    period,
                );
                values.extend(c.fitted);
            }
        }
        TargetKind::Direct => values.extend(params.values.iter().copied()),
    }
    Ok(Forecast {
        series_ids: ds.series.iter().map(|s| s.id.clone()).collect(),
        values,
        timestamps: future.timestamps,
        parameters: params,
        horizon: h,
    })
}

/// Trend and seasonal components of the trend + Fourier target on the
/// training rows of `design`.
pub fn fitted_components(model: &dyn ParameterModel, design: &Design) -> Result<StlComponents> {
    let TargetKind::Stl { n_season, period, .. } = model.spec().kind else {
        return Err(Error::Capability("decomposition needs the trend + Fourier target".into()));
    };
    model.schema().check_matches(&design.schema)?;
    let params = model.predict_parameters(&design.x)?;
    Ok(stl_components(&params.values, &design.target.time_index, n_season, period))
}
