//! Long-format CSV exports of per-row parameters and tree embeddings.

use std::io::Write;

use chrono::NaiveDate;

use crate::data::{Design, FutureDesign};
use crate::hypertree::ParameterModel;
use crate::targets::Span;
use crate::treenet::TreeNetModel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Forecast,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Forecast => "forecast",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportRow {
    pub series_id: String,
    pub timestamp: NaiveDate,
    /// Parameter name, or the embedding dimension.
    pub key: String,
    pub value: f64,
    pub phase: Phase,
}

/// `(series_id, timestamp, row)` for the active training rows, then for
/// every forecast row.
fn row_keys<'a>(design: &'a Design, future: &'a FutureDesign) -> Vec<(&'a str, NaiveDate, usize, Phase)> {
    let mut keys = Vec::new();
    let mut push = |spans: &'a [Span], stamps: &[NaiveDate], active: Option<&[bool]>, phase| {
        for span in spans {
            for i in span.range() {
                if active.is_none_or(|a| a[i]) {
                    keys.push((span.id.as_str(), stamps[i], i, phase));
                }
            }
        }
    };
    push(&design.target.spans, &design.timestamps, Some(&design.target.active), Phase::Train);
    push(&future.spans, &future.timestamps, None, Phase::Forecast);
    keys
}

fn long_rows(
    design: &Design,
    future: &FutureDesign,
    names: &[String],
    train: &[f64],
    fut: &[f64],
) -> Vec<ExportRow> {
    let w = names.len();
    let mut rows = Vec::new();
    for (id, timestamp, i, phase) in row_keys(design, future) {
        let values = match phase {
            Phase::Train => &train[i * w..(i + 1) * w],
            Phase::Forecast => &fut[i * w..(i + 1) * w],
        };
        rows.extend(names.iter().zip(values).map(|(name, &value)| ExportRow {
            series_id: id.to_string(),
            timestamp,
            key: name.clone(),
            value,
            phase,
        }));
    }
    rows
}

/// Linked target-model parameters for every active training row and every
/// forecast row, one CSV row per parameter.
pub fn parameter_rows(model: &dyn ParameterModel, design: &Design, future: &FutureDesign) -> Result<Vec<ExportRow>> {
    let names = model.spec().param_names();
    let train = model.predict_parameters(&design.x)?;
    let fut = model.predict_parameters(&future.x)?;
    Ok(long_rows(design, future, &names, &train.values, &fut.values))
}

/// Tree embeddings for every active training row and every forecast row,
/// one CSV row per dimension.
pub fn embedding_rows(model: &TreeNetModel, design: &Design, future: &FutureDesign) -> Result<Vec<ExportRow>> {
    let names: Vec<String> = (0..model.d()).map(|k| k.to_string()).collect();
    let train = model.embeddings(&design.x)?;
    let fut = model.embeddings(&future.x)?;
    Ok(long_rows(design, future, &names, &train, &fut))
}

/// Writes `series_id,timestamp,<key_column>,value,phase` rows.
pub fn write_export_csv<W: Write>(writer: W, key_column: &str, rows: &[ExportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["series_id", "timestamp", key_column, "value", "phase"])?;
    for r in rows {
        w.write_record([
            r.series_id.as_str(),
            &r.timestamp.to_string(),
            &r.key,
            &r.value.to_string(),
            r.phase.name(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
