use hypertrees::baselines::{classical_decompose, fit_ols_ar};
use hypertrees::boosting::TreeParams;
use hypertrees::data::{
    build_design, build_lags, split_holdout, CalendarField, Design, FeatureSpec, Frequency, PanelDataset,
};
use hypertrees::datasets::{air_passengers, ar_dataset, constant_dataset, simulate_ar};
use hypertrees::forecast::{fitted_components, forecast, ForecastOptions};
use hypertrees::hypertree::{train, HyperTreeConfig, HyperTreeModel, ParameterModel};
use hypertrees::metrics::{mape, wape};
use hypertrees::targets::TargetModelSpec;
use hypertrees::Error;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn calendar_design(ds: &PanelDataset, p: usize) -> (PanelDataset, Design) {
    let lagged = build_lags(ds, p).unwrap();
    let design = build_design(&lagged, &FeatureSpec::calendar_only(Frequency::Monthly)).unwrap();
    (lagged, design)
}

fn year_features() -> FeatureSpec {
    FeatureSpec {
        calendar: vec![CalendarField::Year],
        ..FeatureSpec::calendar_only(Frequency::Monthly)
    }
}

#[test]
fn zero_rounds_keep_the_base_and_forecast_zeros() {
    let (lagged, design) = calendar_design(&air_passengers().unwrap(), 12);
    let config = HyperTreeConfig {
        rounds: 0,
        ..HyperTreeConfig::default()
    };
    let (model, log) = train(&design, &TargetModelSpec::ar(12), &config).unwrap();
    assert_eq!(model.n_rounds(), 0);
    assert!(log.losses.is_empty());
    assert!(model.predict_raw(&design.x).unwrap().iter().all(|&v| v == 0.0));
    let features = FeatureSpec::calendar_only(Frequency::Monthly);
    let fc = forecast(&model, &lagged, &features, 12, None, ForecastOptions::default()).unwrap();
    assert_eq!(fc.values, vec![0.0; 12]);
}

#[test]
fn depth_zero_reaches_ols_training_error() {
    let y = simulate_ar(&[0.5, -0.3], 300, 1.0, 3);
    let (_, design) = calendar_design(&ar_dataset(&[0.5, -0.3], 300, 1.0, 3), 2);
    let config = HyperTreeConfig {
        rounds: 500,
        tree: TreeParams {
            learning_rate: 0.1,
            lambda: 0.0,
            max_depth: 0,
            ..TreeParams::default()
        },
    };
    let (_, log) = train(&design, &TargetModelSpec::ar(2), &config).unwrap();
    let ols = fit_ols_ar(&y, 2, false).unwrap();
    let ols_mse = ols.sse(&y) / (y.len() - 2) as f64;
    let ours = *log.losses.last().unwrap();
    assert!(ours <= 1.05 * ols_mse, "{ours} vs OLS {ols_mse}");
    assert!(ours >= ols_mse * (1.0 - 1e-9));
}

#[test]
fn all_masked_rows_give_empty_loss() {
    let (_, mut design) = calendar_design(&air_passengers().unwrap(), 12);
    design.target.active.iter_mut().for_each(|a| *a = false);
    let err = train(&design, &TargetModelSpec::ar(12), &HyperTreeConfig::default()).unwrap_err();
    assert!(matches!(err, Error::EmptyLoss), "{err:?}");
}

#[test]
fn calendar_only_parameters_repeat_every_twelve_months() {
    let (_, design) = calendar_design(&air_passengers().unwrap(), 12);
    let (model, _) = train(&design, &TargetModelSpec::ar(12), &HyperTreeConfig::default()).unwrap();
    let theta = model.predict_parameters(&design.x).unwrap();
    let rows: Vec<&[f64]> = (0..theta.n_rows).map(|i| theta.row(i)).collect();
    for i in 12..rows.len() {
        assert_eq!(rows[i], rows[i - 12], "row {i}");
    }
    assert!((1..12).any(|i| rows[i] != rows[0]));
}

#[test]
fn small_learning_rate_loss_rarely_increases() {
    let (_, design) = calendar_design(&air_passengers().unwrap(), 12);
    let config = HyperTreeConfig {
        rounds: 100,
        tree: TreeParams {
            learning_rate: 0.05,
            ..TreeParams::default()
        },
    };
    let (_, log) = train(&design, &TargetModelSpec::ar(12), &config).unwrap();
    let mut prev = log.initial_loss;
    let mut non_increasing = 0;
    for &l in &log.losses {
        if l <= prev {
            non_increasing += 1;
        }
        prev = l;
    }
    assert_eq!(log.losses.len(), 100);
    assert!(non_increasing >= 95, "{non_increasing} of 100");
}

#[test]
fn zero_horizon_is_empty() {
    let (lagged, design) = calendar_design(&air_passengers().unwrap(), 12);
    let model = HyperTreeModel::new(TargetModelSpec::ar(12), design.schema.clone(), HyperTreeConfig::default(), &[0.0; 12]);
    let features = FeatureSpec::calendar_only(Frequency::Monthly);
    let fc = forecast(&model, &lagged, &features, 0, None, ForecastOptions::default()).unwrap();
    assert!(fc.values.is_empty() && fc.rows().is_empty());
}

#[test]
fn unit_first_lag_repeats_last_value() {
    let ap = air_passengers().unwrap();
    let (lagged, design) = calendar_design(&ap, 3);
    let model = HyperTreeModel::new(
        TargetModelSpec::ar(3),
        design.schema.clone(),
        HyperTreeConfig::default(),
        &[1.0, 0.0, 0.0],
    );
    let features = FeatureSpec::calendar_only(Frequency::Monthly);
    let fc = forecast(&model, &lagged, &features, 6, None, ForecastOptions::default()).unwrap();
    assert_eq!(fc.values, vec![*ap.series[0].values.last().unwrap(); 6]);
}

#[test]
fn air_passengers_holdout_beats_constant_ar() {
    let (train_part, test_part) = split_holdout(&air_passengers().unwrap(), 12).unwrap();
    let (lagged, design) = calendar_design(&train_part, 12);
    let (model, _) = train(&design, &TargetModelSpec::ar(12), &HyperTreeConfig::default()).unwrap();
    let features = FeatureSpec::calendar_only(Frequency::Monthly);
    let actual = &test_part.series[0].values;
    let varying = forecast(&model, &lagged, &features, 12, None, ForecastOptions::default()).unwrap();
    let averaged = forecast(&model, &lagged, &features, 12, None, ForecastOptions { average_parameters: true }).unwrap();
    let ours = mape(actual, varying.series(0)).unwrap();
    assert!(ours <= 5.0 && ours < 8.630, "MAPE {ours}");
    let w_varying = wape(actual, varying.series(0)).unwrap();
    let w_averaged = wape(actual, averaged.series(0)).unwrap();
    assert!(w_averaged >= 1.2 * w_varying, "{w_averaged} vs {w_varying}");
}

#[test]
fn constant_series_has_no_seasonality() {
    let ds = constant_dataset(100.0, 48);
    let design = build_design(&ds, &year_features()).unwrap();
    let spec = TargetModelSpec::stl(3, 12.0, 1.0);
    let (model, _) = train(&design, &spec, &HyperTreeConfig::default()).unwrap();
    let c = fitted_components(&model, &design).unwrap();
    let max = c.seasonal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max < 1e-3, "{max}");
    assert!(c.trend.iter().all(|t| (t - 100.0).abs() < 1e-6));
}

#[test]
fn stl_trend_follows_moving_average_trend() {
    let ap = air_passengers().unwrap();
    let design = build_design(&ap, &year_features()).unwrap();
    let spec = TargetModelSpec::stl(3, 12.0, 1.0);
    let (model, _) = train(&design, &spec, &HyperTreeConfig::default()).unwrap();
    let c = fitted_components(&model, &design).unwrap();
    let reference = classical_decompose(&ap.series[0].values, 12).unwrap();
    let idx = reference.interior();
    let ours: Vec<f64> = idx.iter().map(|&t| c.trend[t]).collect();
    let theirs: Vec<f64> = idx.iter().map(|&t| reference.trend[t].unwrap()).collect();
    assert!(pearson(&ours, &theirs) >= 0.95);
}
