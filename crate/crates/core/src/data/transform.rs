use serde::{Deserialize, Serialize};

use super::{PanelDataset, TimeSeries};
use crate::baselines::classical_decompose;
use crate::{Error, Result};

/// Keeps series with at least `p + 1` observations and records the lag
/// order. Shorter series are dropped with a warning.
pub fn build_lags(ds: &PanelDataset, p: usize) -> Result<PanelDataset> {
    if p == 0 {
        return Err(Error::InvalidArgument("lag order must be >= 1".into()));
    }
    let mut out = ds.filter_series(|s| {
        let keep = s.observed_len() > p;
        if !keep {
            log::warn!(
                "series '{}' has {} observations, fewer than {} needed for {p} lags; excluded",
                s.id,
                s.observed_len(),
                p + 1
            );
        }
        keep
    });
    out.lag_order = p;
    Ok(out)
}

/// Extends every series to the longest length by appending copies of its own
/// trailing segment. Appended rows carry `pad = true`; their timestamps keep
/// advancing at the dataset frequency.
pub fn pad_for_ets(ds: &PanelDataset) -> PanelDataset {
    let target = ds.series.iter().map(|s| s.len()).max().unwrap_or(0);
    let mut out = ds.clone();
    out.padded = true;
    for s in &mut out.series {
        let len = s.len();
        let deficit = target - len;
        if deficit == 0 || len == 0 {
            continue;
        }
        let seg_start = len - deficit.min(len);
        let seg_len = len - seg_start;
        let last = *s.timestamps.last().expect("non-empty series");
        for k in 0..deficit {
            let src = seg_start + k % seg_len;
            s.values.push(s.values[src]);
            for c in &mut s.categoricals {
                c.push(c[src]);
            }
            for c in &mut s.numerics {
                c.push(c[src]);
            }
            s.timestamps.push(ds.frequency.advance(last, k as u32 + 1));
            s.pad.push(true);
        }
    }
    out
}

pub const SUMMARY_NAMES: [&str; 5] = ["mean", "std", "trend_strength", "seasonal_strength", "acf1"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryFeatures {
    pub mean: f64,
    pub std: f64,
    pub trend_strength: f64,
    pub seasonal_strength: f64,
    pub acf1: f64,
}

impl SummaryFeatures {
    pub fn values(&self) -> [f64; 5] {
        [self.mean, self.std, self.trend_strength, self.seasonal_strength, self.acf1]
    }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

fn strength(remainder: &[f64], component_plus_remainder: &[f64]) -> f64 {
    let denom = variance(component_plus_remainder);
    if !(denom > 0.0) {
        return 0.0;
    }
    (1.0 - variance(remainder) / denom).max(0.0)
}

/// Mean, sample standard deviation, trend and seasonal strength from the
/// classical decomposition with period `m`, and lag-1 autocorrelation.
/// Strengths are 0 when the series is too short to decompose or `m < 2`;
/// the autocorrelation of a constant series is 0.
pub fn summarize_series(values: &[f64], m: usize) -> Result<SummaryFeatures> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("summary features need >= 2 observations, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let std = (ss / (n - 1) as f64).sqrt();
    let acf1 = if ss > 0.0 {
        (1..n).map(|t| (values[t] - mean) * (values[t - 1] - mean)).sum::<f64>() / ss
    } else {
        0.0
    };
    let (mut trend_strength, mut seasonal_strength) = (0.0, 0.0);
    if m >= 2 && n >= 2 * m {
        let d = classical_decompose(values, m)?;
        let idx = d.interior();
        let r: Vec<f64> = idx.iter().map(|&t| d.remainder[t].unwrap()).collect();
        let tr: Vec<f64> = idx.iter().map(|&t| d.trend[t].unwrap() + d.remainder[t].unwrap()).collect();
        let sr: Vec<f64> = idx.iter().map(|&t| d.seasonal[t] + d.remainder[t].unwrap()).collect();
        trend_strength = strength(&r, &tr);
        seasonal_strength = strength(&r, &sr);
    }
    let out = SummaryFeatures {
        mean,
        std,
        trend_strength,
        seasonal_strength,
        acf1,
    };
    if let Some(i) = out.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "summary features".into(),
            index: i,
        });
    }
    Ok(out)
}

/// Splits off the last `h` observations of every series.
pub fn split_holdout(ds: &PanelDataset, h: usize) -> Result<(PanelDataset, PanelDataset)> {
    let mut train = ds.filter_series(|_| false);
    let mut test = ds.filter_series(|_| false);
    for s in &ds.series {
        let n = s.observed_len();
        if n <= h {
            return Err(Error::InvalidArgument(format!(
                "series '{}' has {n} observations, cannot hold out {h}",
                s.id
            )));
        }
        train.series.push(s.slice(0..n - h));
        test.series.push(s.slice(n - h..n));
    }
    train.padded = false;
    test.padded = false;
    Ok((train, test))
}

impl TimeSeries {
    /// Builds an unpadded series without feature columns.
    pub fn from_values(id: &str, timestamps: Vec<chrono::NaiveDate>, values: Vec<f64>) -> TimeSeries {
        let n = values.len();
        TimeSeries {
            id: id.to_string(),
            timestamps,
            values,
            categoricals: Vec::new(),
            numerics: Vec::new(),
            pad: vec![false; n],
        }
    }
}
