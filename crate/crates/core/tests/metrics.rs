use hypertrees::metrics::{mae, mape, mase, rmse, smape, wape, MetricsReport, SeriesMetrics};
use proptest::prelude::*;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rescaling_changes_only_absolute_metrics(
        pairs in prop::collection::vec((1.0f64..500.0, 0.5f64..600.0, 0.5f64..600.0), 1..30),
        c in 1e-3f64..1e3,
    ) {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let f: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let r: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        let scale = |v: &[f64]| v.iter().map(|x| c * x).collect::<Vec<_>>();
        let (ys, fs, rs) = (scale(&y), scale(&f), scale(&r));
        prop_assert!(close(mape(&y, &f).unwrap(), mape(&ys, &fs).unwrap()));
        prop_assert!(close(smape(&y, &f).unwrap(), smape(&ys, &fs).unwrap()));
        prop_assert!(close(wape(&y, &f).unwrap(), wape(&ys, &fs).unwrap()));
        prop_assert!(close(c * rmse(&y, &f).unwrap(), rmse(&ys, &fs).unwrap()));
        prop_assert!(close(c * mae(&y, &f).unwrap(), mae(&ys, &fs).unwrap()));
        let ref_mae = mae(&y, &r).unwrap();
        prop_assume!(ref_mae > 0.0);
        let before = mase(mae(&y, &f).unwrap(), ref_mae).unwrap();
        let after = mase(mae(&ys, &fs).unwrap(), mae(&ys, &rs).unwrap()).unwrap();
        prop_assert!(close(before, after));
    }

    #[test]
    fn wape_equals_mape_for_constant_magnitude(
        level in 0.1f64..1e4,
        signs in prop::collection::vec(any::<bool>(), 1..20),
        errs in prop::collection::vec(-50.0f64..50.0, 20),
    ) {
        let y: Vec<f64> = signs.iter().map(|&s| if s { level } else { -level }).collect();
        let f: Vec<f64> = y.iter().zip(&errs).map(|(a, e)| a + e).collect();
        prop_assert!(close(wape(&y, &f).unwrap(), mape(&y, &f).unwrap()));
    }
}

#[test]
fn perfect_forecast_scores_zero_everywhere() {
    let y = [3.0, 5.0, 7.0];
    let m = SeriesMetrics::compute("s", &y, &y, Some(&[4.0, 4.0, 4.0])).unwrap();
    assert_eq!((m.mape, m.smape, m.wape, m.rmse, m.mae, m.mase), (Some(0.0), 0.0, Some(0.0), 0.0, 0.0, Some(0.0)));
}

#[test]
fn reference_equal_to_model_gives_unit_mase() {
    let y = [3.0, 5.0, 7.0];
    let f = [2.0, 6.0, 9.0];
    let m = SeriesMetrics::compute("s", &y, &f, Some(&f)).unwrap();
    assert_eq!(m.mase, Some(1.0));
}

#[test]
fn dataset_value_is_mean_of_series_values() {
    let a = SeriesMetrics::compute("a", &[100.0], &[110.0], None).unwrap();
    let b = SeriesMetrics::compute("b", &[100.0, 200.0], &[100.0, 200.0], None).unwrap();
    let report = MetricsReport {
        series: vec![a, b],
        runtime_seconds: None,
    };
    assert_eq!(report.mean()[0], Some(5.0));
}
