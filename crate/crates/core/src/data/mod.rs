//! Panel time-series data: CSV ingestion, calendar features, lag columns,
//! the padding/masking strategy for recursive targets, and per-series
//! summary statistics.

mod csv_io;
mod design;
mod transform;

pub use csv_io::{ingest_csv, parse_csv, write_series_csv, ColumnKind, CsvSchema};
pub use design::{build_design, build_future_design, CalendarField, Design, FeatureSchema, FeatureSpec, FutureDesign};
pub use transform::{build_lags, pad_for_ets, split_holdout, summarize_series, SummaryFeatures, SUMMARY_NAMES};

use std::collections::BTreeMap;

use chrono::{Datelike, Months, NaiveDate};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frequency {
    Monthly,
    Daily,
    Yearly,
}

impl Frequency {
    pub fn season_length(self) -> usize {
        match self {
            Frequency::Monthly => 12,
            Frequency::Daily => 7,
            Frequency::Yearly => 1,
        }
    }

    /// `date` moved forward by `steps` periods.
    pub fn advance(self, date: NaiveDate, steps: u32) -> NaiveDate {
        match self {
            Frequency::Monthly => date + Months::new(steps),
            Frequency::Yearly => date + Months::new(12 * steps),
            Frequency::Daily => date + chrono::Days::new(steps as u64),
        }
    }
}

/// Calendar fields of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Calendar {
    pub month: u32,
    pub quarter: u32,
    pub year: i32,
    /// Monday = 0.
    pub day_of_week: u32,
    pub time_index: usize,
}

impl Calendar {
    pub fn new(date: NaiveDate, time_index: usize) -> Self {
        Calendar {
            month: date.month(),
            quarter: (date.month() - 1) / 3 + 1,
            year: date.year(),
            day_of_week: date.weekday().num_days_from_monday(),
            time_index,
        }
    }
}

/// Calendar fields for every row of a series; `time_index` counts steps
/// from the first row.
pub fn derive_calendar(timestamps: &[NaiveDate]) -> Vec<Calendar> {
    timestamps.iter().enumerate().map(|(i, &d)| Calendar::new(d, i)).collect()
}

/// One series with its feature columns. Categorical columns hold integer
/// codes; `pad[t]` marks rows appended by [`pad_for_ets`].
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub id: String,
    pub timestamps: Vec<NaiveDate>,
    pub values: Vec<f64>,
    pub categoricals: Vec<Vec<u32>>,
    pub numerics: Vec<Vec<f64>>,
    pub pad: Vec<bool>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of observed (non-padded) rows; padding is only ever appended.
    pub fn observed_len(&self) -> usize {
        self.pad.iter().filter(|&&p| !p).count()
    }

    pub fn observed_values(&self) -> &[f64] {
        &self.values[..self.observed_len()]
    }

    /// Rows `range` of this series, with every feature column.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            id: self.id.clone(),
            timestamps: self.timestamps[range.clone()].to_vec(),
            values: self.values[range.clone()].to_vec(),
            categoricals: self.categoricals.iter().map(|c| c[range.clone()].to_vec()).collect(),
            numerics: self.numerics.iter().map(|c| c[range.clone()].to_vec()).collect(),
            pad: self.pad[range].to_vec(),
        }
    }
}

/// Frozen mapping from category labels to dense codes, per column. Labels
/// are sorted; code `labels.len()` is reserved for labels unseen when the
/// map was built.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CodeMap {
    pub columns: BTreeMap<String, Vec<String>>,
    /// Sorted series ids seen at training time. When empty the series code
    /// is the position of the series in the panel.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<String>,
}

impl CodeMap {
    /// Code of series `idx` of `ds`; ids outside a frozen id list get the
    /// reserved code.
    pub fn series_code(&self, ds: &PanelDataset, idx: usize) -> u32 {
        if self.series.is_empty() {
            return idx as u32;
        }
        let id = ds.series[idx].id.as_str();
        match self.series.binary_search_by(|s| s.as_str().cmp(id)) {
            Ok(i) => i as u32,
            Err(_) => self.series.len() as u32,
        }
    }

    pub fn series_cardinality(&self, ds: &PanelDataset) -> u32 {
        if self.series.is_empty() {
            ds.series.len() as u32 + 1
        } else {
            self.series.len() as u32 + 1
        }
    }

    pub fn code(&self, column: &str, label: &str) -> Option<u32> {
        self.columns
            .get(column)
            .and_then(|labels| labels.binary_search_by(|l| l.as_str().cmp(label)).ok())
            .map(|i| i as u32)
    }

    pub fn reserved_code(&self, column: &str) -> u32 {
        self.columns.get(column).map_or(0, |l| l.len() as u32)
    }

    pub fn cardinality(&self, column: &str) -> u32 {
        self.reserved_code(column) + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub frequency: Frequency,
    pub horizon: usize,
    /// Sorted by id.
    pub series: Vec<TimeSeries>,
    pub categorical_names: Vec<String>,
    pub numeric_names: Vec<String>,
    pub codes: CodeMap,
    /// Lag order set by [`build_lags`]; 0 when no lags are used.
    pub lag_order: usize,
    /// True once [`pad_for_ets`] has run; adds the pad-flag feature.
    pub padded: bool,
}

impl PanelDataset {
    pub fn n_rows(&self) -> usize {
        self.series.iter().map(|s| s.len()).sum()
    }

    pub fn series_ids(&self) -> Vec<&str> {
        self.series.iter().map(|s| s.id.as_str()).collect()
    }

    /// Lags `[y_{t-1}, ..., y_{t-p}]` of row `t`, or `None` for `t < p`.
    pub fn lags(&self, series: usize, t: usize) -> Option<Vec<f64>> {
        let p = self.lag_order;
        let v = &self.series[series].values;
        (t >= p).then(|| (1..=p).map(|j| v[t - j]).collect())
    }

    /// Same dataset keeping only the series for which `keep` is true.
    pub fn filter_series(&self, keep: impl Fn(&TimeSeries) -> bool) -> PanelDataset {
        PanelDataset {
            series: self.series.iter().filter(|s| keep(s)).cloned().collect(),
            ..self.clone_empty()
        }
    }

    fn clone_empty(&self) -> PanelDataset {
        PanelDataset {
            frequency: self.frequency,
            horizon: self.horizon,
            series: Vec::new(),
            categorical_names: self.categorical_names.clone(),
            numeric_names: self.numeric_names.clone(),
            codes: self.codes.clone(),
            lag_order: self.lag_order,
            padded: self.padded,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn calendar_examples() {
        let c = Calendar::new(date("1949-01-01"), 0);
        assert_eq!((c.month, c.quarter), (1, 1));
        assert_eq!(Calendar::new(date("2015-07-31"), 0).day_of_week, 4);
        let stamps: Vec<NaiveDate> = (0..12).map(|k| Frequency::Monthly.advance(date("1949-01-01"), k)).collect();
        let cal = derive_calendar(&stamps);
        assert_eq!(cal.iter().map(|c| c.time_index).collect::<Vec<_>>(), (0..12).collect::<Vec<_>>());
        assert_eq!(cal[11].month, 12);
        assert_eq!(cal[11].quarter, 4);
    }

    #[test]
    fn frequency_advance() {
        assert_eq!(Frequency::Monthly.advance(date("1960-12-01"), 1), date("1961-01-01"));
        assert_eq!(Frequency::Daily.advance(date("2024-02-28"), 2), date("2024-03-01"));
        assert_eq!(Frequency::Yearly.advance(date("2000-01-01"), 3), date("2003-01-01"));
    }

    #[test]
    fn code_map_reserves_last_code() {
        let mut codes = CodeMap::default();
        codes.columns.insert("region".into(), vec!["north".into(), "south".into()]);
        assert_eq!(codes.code("region", "south"), Some(1));
        assert_eq!(codes.code("region", "west"), None);
        assert_eq!(codes.reserved_code("region"), 2);
        assert_eq!(codes.cardinality("region"), 3);
    }
}
