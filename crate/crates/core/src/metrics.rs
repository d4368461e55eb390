//! Forecast accuracy metrics and their per-dataset aggregation.
//!
//! Percentage metrics are on a 0-100 scale, except sMAPE which uses the
//! 0-200 convention `100 * mean(2 |y - yhat| / (|y| + |yhat|))`. MASE here is
//! the ratio of the model's MAE to a reference forecast's MAE on the same
//! hold-out, not the in-sample naive scaling.

use serde::Serialize;

use crate::{Error, Result};

fn check_len(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() || y.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "metric inputs have lengths {} and {}",
            y.len(),
            yhat.len()
        )));
    }
    Ok(())
}

pub fn mape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_len(y, yhat)?;
    let mut s = 0.0;
    for (i, (a, f)) in y.iter().zip(yhat).enumerate() {
        if *a == 0.0 {
            return Err(Error::DivisionGuard { metric: "MAPE", index: i });
        }
        s += ((a - f) / a).abs();
    }
    Ok(100.0 * s / y.len() as f64)
}

pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_len(y, yhat)?;
    let s: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, f)| {
            let d = a.abs() + f.abs();
            if d == 0.0 {
                0.0
            } else {
                2.0 * (a - f).abs() / d
            }
        })
        .sum();
    Ok(100.0 * s / y.len() as f64)
}

pub fn wape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_len(y, yhat)?;
    let denom: f64 = y.iter().map(|a| a.abs()).sum();
    if denom == 0.0 {
        return Err(Error::DivisionGuard { metric: "WAPE", index: 0 });
    }
    let num: f64 = y.iter().zip(yhat).map(|(a, f)| (a - f).abs()).sum();
    Ok(100.0 * num / denom)
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_len(y, yhat)?;
    let s: f64 = y.iter().zip(yhat).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((s / y.len() as f64).sqrt())
}

pub fn mae(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check_len(y, yhat)?;
    let s: f64 = y.iter().zip(yhat).map(|(a, f)| (a - f).abs()).sum();
    Ok(s / y.len() as f64)
}

/// Model MAE relative to a reference model's MAE.
pub fn mase(model_mae: f64, reference_mae: f64) -> Result<f64> {
    if !(reference_mae > 0.0) {
        return Err(Error::DivisionGuard { metric: "MASE", index: 0 });
    }
    Ok(model_mae / reference_mae)
}

/// Metrics of one series. MAPE is absent when the series has a zero actual;
/// MASE is absent without a reference forecast.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesMetrics {
    pub series_id: String,
    pub mape: Option<f64>,
    pub smape: f64,
    pub wape: Option<f64>,
    pub rmse: f64,
    pub mae: f64,
    pub mase: Option<f64>,
}

impl SeriesMetrics {
    pub fn compute(series_id: &str, y: &[f64], yhat: &[f64], reference: Option<&[f64]>) -> Result<Self> {
        let model_mae = mae(y, yhat)?;
        let mase = match reference {
            Some(r) => Some(mase(model_mae, mae(y, r)?)?),
            None => None,
        };
        Ok(SeriesMetrics {
            series_id: series_id.to_string(),
            mape: mape(y, yhat).ok(),
            smape: smape(y, yhat)?,
            wape: wape(y, yhat).ok(),
            rmse: rmse(y, yhat)?,
            mae: model_mae,
            mase,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub series: Vec<SeriesMetrics>,
    pub runtime_seconds: Option<f64>,
}

pub const METRIC_NAMES: [&str; 6] = ["MAPE", "sMAPE", "WAPE", "RMSE", "MAE", "MASE"];

impl MetricsReport {
    /// Unweighted mean over series of each metric; optional metrics average
    /// over the series where they are defined.
    pub fn mean(&self) -> [Option<f64>; 6] {
        let avg = |vals: Vec<Option<f64>>| {
            let v: Vec<f64> = vals.into_iter().flatten().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let s = &self.series;
        [
            avg(s.iter().map(|m| m.mape).collect()),
            avg(s.iter().map(|m| Some(m.smape)).collect()),
            avg(s.iter().map(|m| m.wape).collect()),
            avg(s.iter().map(|m| Some(m.rmse)).collect()),
            avg(s.iter().map(|m| Some(m.mae)).collect()),
            avg(s.iter().map(|m| m.mase).collect()),
        ]
    }
}

impl SeriesMetrics {
    pub fn values(&self) -> [Option<f64>; 6] {
        [
            self.mape,
            Some(self.smape),
            self.wape,
            Some(self.rmse),
            Some(self.mae),
            self.mase,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn mape_examples() {
        assert!(close(mape(&[100.0, 200.0], &[110.0, 180.0]).unwrap(), 10.0));
        assert_eq!(mape(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(mape(&[50.0], &[75.0]).unwrap(), 50.0);
        assert!(matches!(mape(&[0.0], &[1.0]), Err(Error::DivisionGuard { .. })));
    }

    #[test]
    fn smape_examples() {
        assert!((smape(&[100.0], &[110.0]).unwrap() - 9.5238).abs() < 1e-4);
        assert_eq!(smape(&[5.0], &[5.0]).unwrap(), 0.0);
        assert_eq!(smape(&[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn wape_rmse_mae_examples() {
        assert!(close(wape(&[100.0, 200.0], &[110.0, 180.0]).unwrap(), 10.0));
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(mae(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 3.5);
        assert!(close(mae(&[1.0, 5.0, -2.0], &[3.5, 7.5, 0.5]).unwrap(), 2.5));
        assert!(wape(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn mase_examples() {
        assert_eq!(mase(4.0, 4.0).unwrap(), 1.0);
        assert_eq!(mase(5.0, 10.0).unwrap(), 0.5);
        assert!(mase(1.0, 0.0).is_err());
    }

    #[test]
    fn report_mean_is_unweighted_over_series() {
        let a = SeriesMetrics::compute("a", &[100.0], &[110.0], None).unwrap();
        let b = SeriesMetrics::compute("b", &[100.0, 100.0, 100.0], &[100.0; 3], None).unwrap();
        let report = MetricsReport {
            series: vec![a, b],
            runtime_seconds: None,
        };
        let mean = report.mean();
        assert!(close(mean[0].unwrap(), 5.0));
        assert_eq!(mean[5], None);
    }
}
