//! Loading and preparing the dataset a run configuration points at.

use std::path::Path;

use hypertrees::data::{build_lags, ingest_csv, pad_for_ets, parse_csv, split_holdout, CodeMap, CsvSchema, Frequency, PanelDataset};
use hypertrees::datasets::{
    daily_panel_schema, monthly_panel_schema, AIR_PASSENGERS_CSV, DAILY_PANEL_CSV, MONTHLY_PANEL_CSV,
};
use hypertrees::targets::{TargetKind, TargetModelSpec};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub struct Builtin {
    pub text: &'static str,
    pub schema: CsvSchema,
    pub frequency: Frequency,
}

pub fn builtin(name: &str) -> Option<Builtin> {
    let (text, schema, frequency) = match name {
        "air_passengers" => (AIR_PASSENGERS_CSV, CsvSchema::default(), Frequency::Monthly),
        "monthly_panel" => (MONTHLY_PANEL_CSV, monthly_panel_schema(), Frequency::Monthly),
        "daily_panel" => (DAILY_PANEL_CSV, daily_panel_schema(), Frequency::Daily),
        _ => return None,
    };
    Some(Builtin { text, schema, frequency })
}

/// Reads the configured dataset, or `path` instead when given. With
/// `codes`, categorical labels are encoded with that frozen map.
pub fn load(config: &RunConfig, path: Option<&Path>, codes: Option<&CodeMap>) -> CliResult<PanelDataset> {
    let d = &config.data;
    let h = config.eval.horizon;
    if let Some(p) = path.or(d.path.as_deref()) {
        return Ok(ingest_csv(p, &d.schema, d.frequency, h, codes)?);
    }
    let name = d.builtin.as_deref().unwrap_or_default();
    let b = builtin(name).ok_or_else(|| CliError::config(format!("unknown builtin dataset '{name}'")))?;
    Ok(parse_csv(b.text.as_bytes(), &b.schema, b.frequency, h, codes)?)
}

/// Training part and, when the configuration holds out the last horizon,
/// the held-out part.
pub fn split(config: &RunConfig, ds: PanelDataset) -> CliResult<(PanelDataset, Option<PanelDataset>)> {
    if config.eval.holdout {
        let (train, test) = split_holdout(&ds, config.eval.horizon)?;
        Ok((train, Some(test)))
    } else {
        Ok((ds, None))
    }
}

/// Lags for AR, padding for ETS, nothing otherwise.
pub fn prepare(spec: &TargetModelSpec, ds: &PanelDataset) -> CliResult<PanelDataset> {
    Ok(match spec.kind {
        TargetKind::Ar { p } => build_lags(ds, p)?,
        TargetKind::Ets { .. } => pad_for_ets(ds),
        TargetKind::Stl { .. } | TargetKind::Direct => ds.clone(),
    })
}

/// `(series_id, timestamp, value)` rows of the observed values.
pub fn observed_rows(ds: &PanelDataset) -> Vec<(String, chrono::NaiveDate, f64)> {
    ds.series
        .iter()
        .flat_map(|s| {
            let n = s.observed_len();
            (0..n).map(move |t| (s.id.clone(), s.timestamps[t], s.values[t]))
        })
        .collect()
}
