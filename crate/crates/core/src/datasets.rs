//! Bundled example data and seeded synthetic generators.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{parse_csv, ColumnKind, CodeMap, CsvSchema, Frequency, PanelDataset, TimeSeries};
use crate::seed::{rng_for, Stream};
use crate::Result;

pub const AIR_PASSENGERS_CSV: &str = include_str!("../data/air_passengers.csv");
pub const MONTHLY_PANEL_CSV: &str = include_str!("../data/synthetic_monthly_panel.csv");
pub const DAILY_PANEL_CSV: &str = include_str!("../data/synthetic_daily_panel.csv");

/// Monthly international airline passengers, 1949-1960 (144 rows).
pub fn air_passengers() -> Result<PanelDataset> {
    parse_csv(AIR_PASSENGERS_CSV.as_bytes(), &CsvSchema::default(), Frequency::Monthly, 12, None)
}

pub fn monthly_panel_schema() -> CsvSchema {
    let mut s = CsvSchema::default();
    s.columns.insert("region".into(), ColumnKind::Categorical);
    s.columns.insert("price".into(), ColumnKind::Numeric);
    s
}

pub fn daily_panel_schema() -> CsvSchema {
    let mut s = CsvSchema::default();
    s.columns.insert("promo".into(), ColumnKind::Categorical);
    s
}

/// Four monthly series of unequal length with a region label and a price.
pub fn monthly_panel() -> Result<PanelDataset> {
    parse_csv(MONTHLY_PANEL_CSV.as_bytes(), &monthly_panel_schema(), Frequency::Monthly, 12, None)
}

/// Three daily series with weekly seasonality and a promotion flag.
pub fn daily_panel() -> Result<PanelDataset> {
    parse_csv(DAILY_PANEL_CSV.as_bytes(), &daily_panel_schema(), Frequency::Daily, 14, None)
}

fn monthly_stamps(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..n).map(|t| Frequency::Monthly.advance(start, t as u32)).collect()
}

fn single(series: TimeSeries, frequency: Frequency) -> PanelDataset {
    PanelDataset {
        frequency,
        horizon: 1,
        series: vec![series],
        categorical_names: Vec::new(),
        numeric_names: Vec::new(),
        codes: CodeMap::default(),
        lag_order: 0,
        padded: false,
    }
}

/// `y_t = sum_j coefficients[j-1] y_{t-j} + sigma * e_t` with standard normal
/// noise, after a burn-in of 100 steps.
pub fn simulate_ar(coefficients: &[f64], n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, Stream::Synthetic);
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let p = coefficients.len();
    let burn = 100;
    let mut y = vec![0.0; p];
    for _ in 0..burn + n {
        let t = y.len();
        let ar: f64 = (0..p).map(|j| coefficients[j] * y[t - 1 - j]).sum();
        y.push(ar + normal.sample(&mut rng));
    }
    y.split_off(p + burn)
}

/// A simulated AR series as a one-series monthly dataset.
pub fn ar_dataset(coefficients: &[f64], n: usize, sigma: f64, seed: u64) -> PanelDataset {
    let y = simulate_ar(coefficients, n, sigma, seed);
    single(TimeSeries::from_values("ar", monthly_stamps(n), y), Frequency::Monthly)
}

/// Fixed panel for the runtime benchmark: `n_series` monthly series of
/// length `len` with a categorical group label, positive seasonal values.
pub fn bench_panel(n_series: usize, len: usize, seed: u64) -> PanelDataset {
    let mut rng = rng_for(seed, Stream::Benchmark);
    let stamps = monthly_stamps(len);
    let mut series = Vec::with_capacity(n_series);
    for k in 0..n_series {
        let level = rng.random_range(50.0..150.0);
        let growth = rng.random_range(0.0..0.01);
        let amp = rng.random_range(0.05..0.3);
        let values = (0..len)
            .map(|t| {
                let season = 1.0 + amp * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin();
                level * (1.0 + growth * t as f64) * season * rng.random_range(0.95..1.05)
            })
            .collect();
        let mut s = TimeSeries::from_values(&format!("b{k:04}"), stamps.clone(), values);
        s.categoricals = vec![vec![(k % 5) as u32; len]];
        series.push(s);
    }
    let mut codes = CodeMap::default();
    codes.columns.insert("group".into(), (0..5).map(|g| format!("g{g}")).collect());
    PanelDataset {
        frequency: Frequency::Monthly,
        horizon: 12,
        series,
        categorical_names: vec!["group".into()],
        numeric_names: Vec::new(),
        codes,
        lag_order: 0,
        padded: false,
    }
}

/// Constant series as a one-series monthly dataset.
pub fn constant_dataset(value: f64, n: usize) -> PanelDataset {
    single(TimeSeries::from_values("constant", monthly_stamps(n), vec![value; n]), Frequency::Monthly)
}
