use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::transform::{summarize_series, SummaryFeatures, SUMMARY_NAMES};
use super::{Calendar, Frequency, PanelDataset, TimeSeries};
use crate::boosting::{FeatureKind, FeatureMatrix};
use crate::targets::{Span, TargetData};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalendarField {
    Month,
    Quarter,
    Year,
    DayOfWeek,
    TimeIndex,
}

impl CalendarField {
    fn name(self) -> &'static str {
        match self {
            CalendarField::Month => "month",
            CalendarField::Quarter => "quarter",
            CalendarField::Year => "year",
            CalendarField::DayOfWeek => "day_of_week",
            CalendarField::TimeIndex => "time_index",
        }
    }

    fn value(self, c: &Calendar) -> f64 {
        match self {
            CalendarField::Month => c.month as f64,
            CalendarField::Quarter => c.quarter as f64,
            CalendarField::Year => c.year as f64,
            CalendarField::DayOfWeek => c.day_of_week as f64,
            CalendarField::TimeIndex => c.time_index as f64,
        }
    }
}

/// Which features the model sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub calendar: Vec<CalendarField>,
    /// Series id as a categorical feature.
    pub series_code: bool,
    /// Categorical and numeric columns declared in the CSV schema.
    pub extra_columns: bool,
    /// Per-series summary statistics.
    pub summary: bool,
}

impl FeatureSpec {
    /// Date-derived features for the frequency. The raw time index (and the
    /// year) only enter for the trend + Fourier target, which needs `t`.
    pub fn for_frequency(frequency: Frequency, stl: bool) -> Self {
        use CalendarField::*;
        let mut calendar = match frequency {
            Frequency::Monthly => vec![Month, Quarter],
            Frequency::Daily => vec![DayOfWeek, Month, Quarter],
            Frequency::Yearly => vec![],
        };
        if stl {
            calendar.extend([Year, TimeIndex]);
        }
        FeatureSpec {
            calendar,
            series_code: true,
            extra_columns: true,
            summary: true,
        }
    }

    /// Calendar features only.
    pub fn calendar_only(frequency: Frequency) -> Self {
        FeatureSpec {
            series_code: false,
            extra_columns: false,
            summary: false,
            ..Self::for_frequency(frequency, false)
        }
    }
}

/// Names and kinds of the feature columns, persisted with trained models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
}

impl FeatureSchema {
    /// Errors with a column-by-column diff when `other` differs.
    pub fn check_matches(&self, other: &FeatureSchema) -> Result<()> {
        if self == other {
            return Ok(());
        }
        let mut diffs = Vec::new();
        for (i, (n, k)) in self.names.iter().zip(&self.kinds).enumerate() {
            match (other.names.get(i), other.kinds.get(i)) {
                (Some(on), Some(ok)) if on == n && ok == k => {}
                (Some(on), Some(ok)) => diffs.push(format!("column {i}: expected {n} {k:?}, found {on} {ok:?}")),
                _ => diffs.push(format!("column {i}: expected {n} {k:?}, missing")),
            }
        }
        for i in self.names.len()..other.names.len() {
            diffs.push(format!("column {i}: unexpected {} {:?}", other.names[i], other.kinds[i]));
        }
        Err(Error::Schema(format!("feature schema drift: {}", diffs.join("; "))))
    }
}

/// Training matrix: features, target-model inputs and row bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: FeatureMatrix,
    pub schema: FeatureSchema,
    pub target: TargetData,
    pub timestamps: Vec<NaiveDate>,
    pub summaries: Vec<SummaryFeatures>,
}

/// Feature rows for the `h` steps after each series' last observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureDesign {
    pub x: FeatureMatrix,
    pub spans: Vec<Span>,
    pub timestamps: Vec<NaiveDate>,
    pub time_index: Vec<f64>,
}

struct ColumnBuilder {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
    columns: Vec<Vec<f64>>,
}

fn schema_for(ds: &PanelDataset, spec: &FeatureSpec) -> (Vec<String>, Vec<FeatureKind>) {
    let mut names = Vec::new();
    let mut kinds = Vec::new();
    for f in &spec.calendar {
        names.push(f.name().to_string());
        kinds.push(FeatureKind::Numeric);
    }
    if spec.series_code {
        names.push("series".into());
        kinds.push(FeatureKind::Categorical {
            cardinality: ds.codes.series_cardinality(ds),
        });
    }
    if spec.extra_columns {
        for c in &ds.categorical_names {
            names.push(c.clone());
            kinds.push(FeatureKind::Categorical {
                cardinality: ds.codes.cardinality(c),
            });
        }
        for c in &ds.numeric_names {
            names.push(c.clone());
            kinds.push(FeatureKind::Numeric);
        }
    }
    if spec.summary {
        for n in SUMMARY_NAMES {
            names.push(n.to_string());
            kinds.push(FeatureKind::Numeric);
        }
    }
    if ds.padded {
        names.push("pad".into());
        kinds.push(FeatureKind::Numeric);
    }
    (names, kinds)
}

impl ColumnBuilder {
    fn new(ds: &PanelDataset, spec: &FeatureSpec) -> Self {
        let (names, kinds) = schema_for(ds, spec);
        let columns = vec![Vec::new(); names.len()];
        ColumnBuilder { names, kinds, columns }
    }

    /// Appends one row. `src` indexes the series' feature columns.
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        ds: &PanelDataset,
        spec: &FeatureSpec,
        series_idx: usize,
        s: &TimeSeries,
        src: usize,
        cal: &Calendar,
        summary: &SummaryFeatures,
        pad: bool,
    ) {
        let mut c = 0;
        let mut put = |v: f64| {
            self.columns[c].push(v);
            c += 1;
        };
        for f in &spec.calendar {
            put(f.value(cal));
        }
        if spec.series_code {
            put(ds.codes.series_code(ds, series_idx) as f64);
        }
        if spec.extra_columns {
            for col in &s.categoricals {
                put(col[src] as f64);
            }
            for col in &s.numerics {
                put(col[src]);
            }
        }
        if spec.summary {
            for v in summary.values() {
                put(v);
            }
        }
        if ds.padded {
            put(if pad { 1.0 } else { 0.0 });
        }
    }

    fn finish(self, n_rows: usize) -> Result<(FeatureMatrix, FeatureSchema)> {
        let x = FeatureMatrix::new(n_rows, self.columns, self.kinds.clone())?;
        Ok((
            x,
            FeatureSchema {
                names: self.names,
                kinds: self.kinds,
            },
        ))
    }
}

fn summaries(ds: &PanelDataset) -> Result<Vec<SummaryFeatures>> {
    let m = ds.frequency.season_length();
    ds.series
        .iter()
        .map(|s| {
            summarize_series(s.observed_values(), m).map_err(|e| match e {
                Error::InvalidArgument(msg) => Error::InvalidArgument(format!("series '{}': {msg}", s.id)),
                other => other,
            })
        })
        .collect()
}

/// Assembles the feature matrix and target inputs. Rows are grouped by
/// series in dataset order; a row is active when it is observed and has a
/// full set of lags.
pub fn build_design(ds: &PanelDataset, spec: &FeatureSpec) -> Result<Design> {
    if ds.series.is_empty() {
        return Err(Error::EmptyInput("dataset has no series".into()));
    }
    let summaries = summaries(ds)?;
    let p = ds.lag_order;
    let n_rows = ds.n_rows();
    let mut cols = ColumnBuilder::new(ds, spec);
    let mut target = TargetData {
        lag_order: p,
        ..TargetData::default()
    };
    let mut timestamps = Vec::with_capacity(n_rows);
    for (k, s) in ds.series.iter().enumerate() {
        target.spans.push(Span {
            id: s.id.clone(),
            start: target.y.len(),
            len: s.len(),
        });
        for t in 0..s.len() {
            let cal = Calendar::new(s.timestamps[t], t);
            cols.push(ds, spec, k, s, t, &cal, &summaries[k], s.pad[t]);
            target.y.push(s.values[t]);
            target.active.push(!s.pad[t] && t >= p);
            target.time_index.push(t as f64);
            match ds.lags(k, t) {
                Some(l) => Arc::make_mut(&mut target.lags).extend(l),
                None => Arc::make_mut(&mut target.lags).extend(std::iter::repeat_n(0.0, p)),
            }
            timestamps.push(s.timestamps[t]);
        }
    }
    let (x, schema) = cols.finish(n_rows)?;
    Ok(Design {
        x,
        schema,
        target,
        timestamps,
        summaries,
    })
}

/// Feature rows for the next `h` steps of every series. Calendar features
/// follow the dataset frequency. Categorical and numeric columns come from
/// the matching series of `known` when it covers the horizon, and are
/// otherwise carried forward from the last observation.
pub fn build_future_design(
    ds: &PanelDataset,
    spec: &FeatureSpec,
    h: usize,
    known: Option<&PanelDataset>,
) -> Result<FutureDesign> {
    let summaries = summaries(ds)?;
    let mut cols = ColumnBuilder::new(ds, spec);
    let mut spans = Vec::new();
    let mut timestamps = Vec::new();
    let mut time_index = Vec::new();
    for (k, s) in ds.series.iter().enumerate() {
        let n = s.observed_len();
        spans.push(Span {
            id: s.id.clone(),
            start: timestamps.len(),
            len: h,
        });
        let future = known.and_then(|kd| kd.series.iter().find(|f| f.id == s.id && f.len() >= h));
        let last = s.timestamps[n - 1];
        for j in 1..=h {
            let date = ds.frequency.advance(last, j as u32);
            let t = n - 1 + j;
            let cal = Calendar::new(date, t);
            match future {
                Some(f) => cols.push(ds, spec, k, f, j - 1, &cal, &summaries[k], false),
                None => cols.push(ds, spec, k, s, n - 1, &cal, &summaries[k], false),
            }
            timestamps.push(date);
            time_index.push(t as f64);
        }
    }
    let (x, _) = cols.finish(timestamps.len())?;
    Ok(FutureDesign {
        x,
        spans,
        timestamps,
        time_index,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_lags, pad_for_ets, CodeMap};
    use super::*;

    fn dataset() -> PanelDataset {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let series = [("a", 30usize), ("b", 26)]
            .iter()
            .map(|&(id, n)| {
                let stamps = (0..n).map(|t| Frequency::Monthly.advance(start, t as u32)).collect();
                TimeSeries::from_values(id, stamps, (0..n).map(|t| 10.0 + t as f64).collect())
            })
            .collect();
        PanelDataset {
            frequency: Frequency::Monthly,
            horizon: 3,
            series,
            categorical_names: Vec::new(),
            numeric_names: Vec::new(),
            codes: CodeMap::default(),
            lag_order: 0,
            padded: false,
        }
    }

    #[test]
    fn lag_columns_match_values_on_active_rows() {
        let ds = build_lags(&dataset(), 3).unwrap();
        let d = build_design(&ds, &FeatureSpec::for_frequency(Frequency::Monthly, false)).unwrap();
        let t = &d.target;
        for i in 0..t.y.len() {
            if t.active[i] {
                for j in 1..=3 {
                    assert_eq!(t.lags[i * 3 + j - 1], t.y[i - j]);
                }
            }
        }
        assert_eq!(t.n_active(), 27 + 23);
        assert_eq!(d.schema.names[..3], ["month", "quarter", "series"]);
    }

    #[test]
    fn padded_rows_are_inactive_and_flagged() {
        let ds = pad_for_ets(&dataset());
        let d = build_design(&ds, &FeatureSpec::for_frequency(Frequency::Monthly, false)).unwrap();
        assert_eq!(d.target.n_rows(), 60);
        assert_eq!(d.target.n_active(), 56);
        let pad_col = d.schema.names.iter().position(|n| n == "pad").unwrap();
        assert_eq!(d.x.column(pad_col).iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn future_rows_continue_calendar() {
        let ds = dataset();
        let spec = FeatureSpec::for_frequency(Frequency::Monthly, true);
        let f = build_future_design(&ds, &spec, 3, None).unwrap();
        assert_eq!(f.timestamps.len(), 6);
        assert_eq!(f.timestamps[0], NaiveDate::from_ymd_opt(2022, 7, 1).unwrap());
        assert_eq!(f.time_index[..3], [30.0, 31.0, 32.0]);
    }

    #[test]
    fn schema_drift_is_reported_per_column() {
        let a = FeatureSchema {
            names: vec!["month".into()],
            kinds: vec![FeatureKind::Numeric],
        };
        let b = FeatureSchema {
            names: vec!["month".into(), "promo".into()],
            kinds: vec![FeatureKind::Numeric, FeatureKind::Categorical { cardinality: 3 }],
        };
        let err = a.check_matches(&b).unwrap_err().to_string();
        assert!(err.contains("unexpected promo"), "{err}");
    }
}
