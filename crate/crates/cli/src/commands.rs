//! One function per subcommand.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use hypertrees::baselines::classical_decompose;
use hypertrees::bench::{scaling_benchmark, ScalingConfig, ScalingRow};
use hypertrees::data::{build_design, build_future_design, write_series_csv, Design, FutureDesign, PanelDataset};
use hypertrees::export::{embedding_rows, parameter_rows, write_export_csv};
use hypertrees::forecast::{fitted_components, forecast, ForecastOptions};
use hypertrees::hypertree::{self, TrainingLog};
use hypertrees::metrics::{MetricsReport, SeriesMetrics, METRIC_NAMES};
use hypertrees::targets::TargetKind;
use hypertrees::treenet;

use crate::bundle::{BaselineModel, Bundle, Model};
use crate::config::{Family, RunConfig, Target};
use crate::data;
use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

/// Result of a training run, with per-round wall-clock seconds.
pub struct Trained {
    pub bundle: Bundle,
    pub log: TrainingLog,
}

/// Trains the configured model on the configured data.
pub fn train(config: &RunConfig) -> CliResult<Trained> {
    let config = config.effective()?;
    let ds = data::load(&config, None, None)?;
    let codes = ds.codes.clone();
    let (train_part, holdout) = data::split(&config, ds)?;
    let spec = config.target_spec();
    let (model, log) = match config.model.family {
        Family::HyperTree | Family::TreeNet => {
            let prepared = data::prepare(&spec, &train_part)?;
            let design = build_design(&prepared, &config.feature_spec())?;
            if config.model.family == Family::HyperTree {
                let (m, log) = hypertree::train(&design, &spec, &config.hypertree_config())?;
                (Model::HyperTree(m), log)
            } else {
                let (m, log) = treenet::train(&design, &spec, &config.treenet_config())?;
                (Model::TreeNet(m), log)
            }
        }
        Family::Baseline => {
            let m = BaselineModel::fit(&spec, &train_part, config.model.ets_value, config.model.ets_grid)?;
            (Model::Baseline(m), TrainingLog::default())
        }
    };
    let mut rounds = Vec::new();
    if config.model.family != Family::Baseline {
        rounds.push((0, log.initial_loss));
        rounds.extend(log.losses.iter().enumerate().map(|(r, &l)| (r + 1, l)));
    }
    Ok(Trained {
        bundle: Bundle {
            config,
            codes,
            model,
            log: rounds,
            holdout,
        },
        log,
    })
}

/// Writes `round,loss,seconds`.
pub fn write_timing_log(path: &Path, log: &TrainingLog) -> CliResult<()> {
    write_atomic(path, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["round", "loss", "seconds"])?;
        for (r, (l, s)) in log.losses.iter().zip(&log.seconds).enumerate() {
            w.write_record([(r + 1).to_string(), l.to_string(), s.to_string()])?;
        }
        w.flush().map_err(|e| hypertrees::Error::io(path, e))?;
        Ok(())
    })
}

pub struct ForecastArgs<'a> {
    pub data: Option<&'a Path>,
    pub known: Option<&'a Path>,
    pub horizon: Option<usize>,
}

/// The training-side dataset of a bundle: the given file, or the configured
/// data with the configured hold-out removed.
fn history(bundle: &Bundle, path: Option<&Path>) -> CliResult<PanelDataset> {
    let ds = data::load(&bundle.config, path, Some(&bundle.codes))?;
    if path.is_some() {
        Ok(ds)
    } else {
        Ok(data::split(&bundle.config, ds)?.0)
    }
}

pub fn forecast_rows(bundle: &Bundle, args: &ForecastArgs) -> CliResult<Vec<(String, NaiveDate, f64)>> {
    let cfg = &bundle.config;
    let h = args.horizon.unwrap_or(cfg.eval.horizon);
    if h == 0 {
        return Err(CliError::config("the forecast horizon must be at least 1"));
    }
    let hist = history(bundle, args.data)?;
    let spec = cfg.target_spec();
    match &bundle.model {
        Model::Baseline(b) => b.forecast(&spec, &hist, h),
        other => {
            let model = other.as_parameter_model().expect("parameter model");
            let known = match args.known {
                Some(p) => Some(data::load(cfg, Some(p), Some(&bundle.codes))?),
                None => None,
            };
            let prepared = data::prepare(&spec, &hist)?;
            let options = ForecastOptions {
                average_parameters: cfg.eval.average_parameters,
            };
            let fc = forecast(model, &prepared, &cfg.feature_spec(), h, known.as_ref(), options)?;
            Ok(fc.rows())
        }
    }
}

pub fn write_rows(path: &Path, rows: &[(String, NaiveDate, f64)]) -> CliResult<()> {
    write_atomic(path, |buf| Ok(write_series_csv(buf, rows)?))
}

type Keyed = BTreeMap<(String, String), f64>;

/// `(series_id, timestamp) -> value` plus the keys in file order.
fn read_series_csv(path: &Path) -> CliResult<(Keyed, Vec<(String, String)>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::data(format!("{}: column '{name}' not found", path.display())))
    };
    let (i, t, v) = (col("series_id")?, col("timestamp")?, col("value")?);
    let mut map = BTreeMap::new();
    let mut order = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let key = (rec[i].trim().to_string(), rec[t].trim().to_string());
        let value: f64 = rec[v].trim().parse().map_err(|_| {
            CliError::data(format!("{} line {}: cannot parse '{}' as a number", path.display(), line + 2, &rec[v]))
        })?;
        if map.insert(key.clone(), value).is_some() {
            return Err(CliError::data(format!("{}: duplicate row {} {}", path.display(), key.0, key.1)));
        }
        order.push(key);
    }
    Ok((map, order))
}

fn missing_rows(what: &str, keys: impl Iterator<Item = (String, String)>) -> Vec<String> {
    keys.map(|(id, ts)| format!("{what}: series '{id}' at {ts}")).collect()
}

pub struct EvaluateArgs<'a> {
    pub forecast: &'a Path,
    pub actuals: &'a Path,
    pub reference: Option<&'a Path>,
    pub dataset: &'a str,
    pub model: &'a str,
    pub runtime_seconds: Option<f64>,
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<(MetricsReport, Vec<u8>)> {
    let (fc, order) = read_series_csv(args.forecast)?;
    let (actual, _) = read_series_csv(args.actuals)?;
    let reference = args.reference.map(read_series_csv).transpose()?.map(|r| r.0);
    let mut problems = missing_rows("no actual value", order.iter().filter(|k| !actual.contains_key(*k)).cloned());
    problems.extend(missing_rows("no forecast", actual.keys().filter(|k| !fc.contains_key(*k)).cloned()));
    if let Some(r) = &reference {
        problems.extend(missing_rows("no reference forecast", order.iter().filter(|k| !r.contains_key(*k)).cloned()));
    }
    if !problems.is_empty() {
        let n = problems.len();
        problems.truncate(20);
        return Err(CliError::data(format!("{n} rows do not line up:\n  {}", problems.join("\n  "))));
    }
    let mut ids: Vec<&str> = Vec::new();
    for (id, _) in &order {
        if !ids.contains(&id.as_str()) {
            ids.push(id);
        }
    }
    let mut series = Vec::new();
    for id in ids {
        let keys: Vec<&(String, String)> = order.iter().filter(|k| k.0 == id).collect();
        let y: Vec<f64> = keys.iter().map(|k| actual[*k]).collect();
        let yhat: Vec<f64> = keys.iter().map(|k| fc[*k]).collect();
        let r: Option<Vec<f64>> = reference.as_ref().map(|r| keys.iter().map(|k| r[*k]).collect());
        series.push(SeriesMetrics::compute(id, &y, &yhat, r.as_deref())?);
    }
    let report = MetricsReport {
        series,
        runtime_seconds: args.runtime_seconds,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dataset", "model", "series_id"];
    header.extend(METRIC_NAMES);
    header.push("runtime_minutes");
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let runtime = args.runtime_seconds.map(|s| format!("{:.2}", s / 60.0)).unwrap_or_default();
    for m in &report.series {
        let mut rec = vec![args.dataset.to_string(), args.model.to_string(), m.series_id.clone()];
        rec.extend(m.values().map(fmt));
        rec.push(runtime.clone());
        w.write_record(&rec)?;
    }
    let mut rec = vec![args.dataset.to_string(), args.model.to_string(), "MEAN".to_string()];
    rec.extend(report.mean().map(fmt));
    rec.push(runtime);
    w.write_record(&rec)?;
    let bytes = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    Ok((report, bytes))
}

fn train_design(bundle: &Bundle, data: Option<&Path>, h: usize) -> CliResult<(Design, FutureDesign)> {
    let cfg = &bundle.config;
    let hist = history(bundle, data)?;
    let prepared = data::prepare(&cfg.target_spec(), &hist)?;
    let features = cfg.feature_spec();
    Ok((build_design(&prepared, &features)?, build_future_design(&prepared, &features, h, None)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Parameters,
    Embeddings,
}

pub fn export(bundle: &Bundle, what: ExportKind, data: Option<&Path>, horizon: Option<usize>) -> CliResult<Vec<u8>> {
    let h = horizon.unwrap_or(bundle.config.eval.horizon);
    let mut buf = Vec::new();
    match (what, &bundle.model) {
        (ExportKind::Embeddings, Model::TreeNet(m)) => {
            let (design, future) = train_design(bundle, data, h)?;
            write_export_csv(&mut buf, "dim", &embedding_rows(m, &design, &future)?)?;
        }
        (ExportKind::Embeddings, _) => {
            return Err(hypertrees::Error::Capability("embeddings exist only in treenet bundles".into()).into())
        }
        (ExportKind::Parameters, Model::Baseline(_)) => {
            return Err(hypertrees::Error::Capability("baseline bundles have no per-row parameters".into()).into())
        }
        (ExportKind::Parameters, m) => {
            let model = m.as_parameter_model().expect("parameter model");
            let (design, future) = train_design(bundle, data, h)?;
            write_export_csv(&mut buf, "parameter_name", &parameter_rows(model, &design, &future)?)?;
        }
    }
    Ok(buf)
}

/// Files written by [`decompose`].
pub struct Decomposed {
    pub components: Vec<u8>,
    pub parameters: Vec<u8>,
    pub importance: Vec<u8>,
}

/// Trains the trend + Fourier target and reports its components next to a
/// classical moving-average decomposition.
pub fn decompose(config: &RunConfig) -> CliResult<Decomposed> {
    let cfg = config.effective()?;
    if cfg.model.target != Target::Stl || cfg.model.family == Family::Baseline {
        return Err(CliError::config(
            "decompose needs model.target = \"stl\" with the hypertree or treenet family",
        ));
    }
    let trained = train(&cfg)?;
    let bundle = trained.bundle;
    let model = bundle.model.as_parameter_model().expect("parameter model");
    let (design, future) = train_design(&bundle, None, cfg.eval.horizon)?;
    let c = fitted_components(model, &design)?;
    let TargetKind::Stl { period, .. } = model.spec().kind else {
        unreachable!("checked above")
    };
    let m = period.round().max(2.0) as usize;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "series_id",
        "timestamp",
        "actual",
        "trend",
        "seasonal",
        "fitted",
        "classical_trend",
        "classical_seasonal",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for span in &design.target.spans {
        let y = &design.target.y[span.range()];
        let classical = classical_decompose(y, m).ok();
        for (k, i) in span.range().enumerate() {
            w.write_record([
                span.id.clone(),
                design.timestamps[i].to_string(),
                y[k].to_string(),
                c.trend[i].to_string(),
                c.seasonal[i].to_string(),
                c.fitted[i].to_string(),
                opt(classical.as_ref().and_then(|d| d.trend[k])),
                opt(classical.as_ref().map(|d| d.seasonal[k])),
            ])?;
        }
    }
    let components = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;

    let mut parameters = Vec::new();
    write_export_csv(&mut parameters, "parameter_name", &parameter_rows(model, &design, &future)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["output", "feature", "gain"])?;
    let (outputs, gains): (Vec<String>, Vec<Vec<f64>>) = match &bundle.model {
        Model::HyperTree(m) => (m.spec.param_names(), m.feature_importance()),
        Model::TreeNet(m) => (
            (0..m.embed.len()).map(|k| format!("embedding_{k}")).collect(),
            m.embed.iter().map(|e| e.feature_importance()).collect(),
        ),
        Model::Baseline(_) => unreachable!("checked above"),
    };
    for (name, g) in outputs.iter().zip(&gains) {
        for (feature, v) in design.schema.names.iter().zip(g) {
            w.write_record([name.as_str(), feature.as_str(), &v.to_string()])?;
        }
    }
    let importance = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    Ok(Decomposed {
        components,
        parameters,
        importance,
    })
}

pub fn bench_rows_csv(rows: &[ScalingRow]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["p", "family", "median_seconds", "relative"])?;
    for r in rows {
        w.write_record([r.p.to_string(), r.family.name().to_string(), r.median_seconds.to_string(), r.relative.to_string()])?;
    }
    w.into_inner().map_err(|e| CliError::data(e.to_string()))
}

pub fn bench_scaling(config: &ScalingConfig) -> CliResult<Vec<ScalingRow>> {
    if config.orders.is_empty() || config.orders.contains(&0) {
        return Err(CliError::config("orders must be a non-empty list of positive integers"));
    }
    if config.iterations == 0 {
        return Err(CliError::config("iterations must be at least 1"));
    }
    Ok(scaling_benchmark(config)?)
}
