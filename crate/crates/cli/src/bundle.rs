//! Model bundle directory.
//!
//! ```text
//! run.json           effective run configuration
//! spec.json          family, target model, feature spec and schema
//! codes.json         frozen categorical code map
//! ensemble_00.json   one per parameter (hypertree)
//! treenet.json       whole model (treenet)
//! baseline.json      per-series models (baseline)
//! training_log.csv   round,loss
//! holdout.csv        held-out observations, when configured
//! ```

use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use hypertrees::baselines::{ets_grid_search, fit_ols_ar, fixed_ets_forecast, OlsArModel};
use hypertrees::boosting::TreeEnsemble;
use hypertrees::data::{write_series_csv, CodeMap, FeatureSchema, FeatureSpec, PanelDataset};
use hypertrees::hypertree::{HyperTreeModel, ParameterModel};
use hypertrees::targets::{EtsRow, TargetKind, TargetModelSpec};
use hypertrees::treenet::TreeNetModel;

use crate::config::{Family, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::StagedDir;

/// Constant-parameter reference models, fitted per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineModel {
    Ar { series: Vec<(String, OlsArModel)> },
    Ets { value: f64 },
}

impl BaselineModel {
    pub fn fit(spec: &TargetModelSpec, ds: &PanelDataset, ets_value: f64, ets_grid: bool) -> CliResult<Self> {
        match spec.kind {
            TargetKind::Ar { p } => {
                let series = ds
                    .series
                    .iter()
                    .map(|s| Ok((s.id.clone(), fit_ols_ar(s.observed_values(), p, false)?)))
                    .collect::<CliResult<_>>()?;
                Ok(BaselineModel::Ar { series })
            }
            TargetKind::Ets { .. } if ets_grid => {
                let h = ds.horizon;
                let parts: Vec<(Vec<f64>, Vec<f64>)> = ds
                    .series
                    .iter()
                    .map(|s| {
                        let v = s.observed_values();
                        if v.len() <= h {
                            return Err(CliError::data(format!("series '{}' is too short for the ETS grid", s.id)));
                        }
                        Ok((v[..v.len() - h].to_vec(), v[v.len() - h..].to_vec()))
                    })
                    .collect::<CliResult<_>>()?;
                let shape = spec.ets_shape().expect("ETS shape");
                let (value, _) = ets_grid_search(&parts, &shape, spec.damping)?;
                Ok(BaselineModel::Ets { value })
            }
            TargetKind::Ets { .. } => Ok(BaselineModel::Ets { value: ets_value }),
            _ => Err(CliError::config("the baseline family supports the ar, ets and ets_linear targets")),
        }
    }

    /// `h`-step forecasts after the last observation of every series.
    pub fn forecast(&self, spec: &TargetModelSpec, ds: &PanelDataset, h: usize) -> CliResult<Vec<(String, NaiveDate, f64)>> {
        let mut rows = Vec::new();
        for s in &ds.series {
            let hist = s.observed_values();
            let values = match self {
                BaselineModel::Ar { series } => {
                    let (_, m) = series
                        .iter()
                        .find(|(id, _)| *id == s.id)
                        .ok_or_else(|| CliError::data(format!("series '{}' was not in the training data", s.id)))?;
                    if hist.len() < m.order() {
                        return Err(CliError::data(format!("series '{}' is shorter than the AR order", s.id)));
                    }
                    m.forecast(hist, h)
                }
                BaselineModel::Ets { value } => {
                    let shape = spec.ets_shape().expect("ETS shape");
                    fixed_ets_forecast(hist, EtsRow::constant(*value), &shape, h, spec.damping)?
                }
            };
            let last = s.timestamps[hist.len() - 1];
            for (k, v) in values.into_iter().enumerate() {
                rows.push((s.id.clone(), ds.frequency.advance(last, k as u32 + 1), v));
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    HyperTree(HyperTreeModel),
    TreeNet(TreeNetModel),
    Baseline(BaselineModel),
}

impl Model {
    pub fn as_parameter_model(&self) -> Option<&dyn ParameterModel> {
        match self {
            Model::HyperTree(m) => Some(m),
            Model::TreeNet(m) => Some(m),
            Model::Baseline(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SpecFile {
    family: Family,
    target: TargetModelSpec,
    features: FeatureSpec,
    schema: Option<FeatureSchema>,
    parameters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub config: RunConfig,
    pub codes: CodeMap,
    pub model: Model,
    /// `(round, loss)`, round 0 being the start value.
    pub log: Vec<(usize, f64)>,
    pub holdout: Option<PanelDataset>,
}

fn json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> CliResult<T> {
    let path = dir.join(name);
    let text = std::fs::read(&path).map_err(|e| hypertrees::Error::io(&path, e))?;
    serde_json::from_slice(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

impl Bundle {
    pub fn save(&self, path: &Path) -> CliResult<()> {
        let staged = StagedDir::new(path)?;
        let spec = self.config.target_spec();
        let schema = self.model.as_parameter_model().map(|m| m.schema().clone());
        staged.write("run.json", &json(&self.config)?)?;
        staged.write(
            "spec.json",
            &json(&SpecFile {
                family: self.config.model.family,
                target: spec,
                features: self.config.feature_spec(),
                schema,
                parameters: spec.param_names(),
            })?,
        )?;
        staged.write("codes.json", &json(&self.codes)?)?;
        match &self.model {
            Model::HyperTree(m) => {
                for (j, e) in m.ensembles.iter().enumerate() {
                    staged.write(&format!("ensemble_{j:02}.json"), &json(e)?)?;
                }
            }
            Model::TreeNet(m) => staged.write("treenet.json", &json(m)?)?,
            Model::Baseline(m) => staged.write("baseline.json", &json(m)?)?,
        }
        let mut log = csv::Writer::from_writer(Vec::new());
        log.write_record(["round", "loss"])?;
        for (r, l) in &self.log {
            log.write_record([r.to_string(), l.to_string()])?;
        }
        staged.write("training_log.csv", &log.into_inner().map_err(|e| CliError::data(e.to_string()))?)?;
        if let Some(h) = &self.holdout {
            let mut buf = Vec::new();
            write_series_csv(&mut buf, &crate::data::observed_rows(h))?;
            staged.write("holdout.csv", &buf)?;
        }
        staged.commit(path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        if !path.is_dir() {
            return Err(CliError::data(format!("bundle directory {} not found", path.display())));
        }
        let config: RunConfig = read_json(path, "run.json")?;
        let codes: CodeMap = read_json(path, "codes.json")?;
        let spec_file: SpecFile = read_json(path, "spec.json")?;
        let model = match config.model.family {
            Family::HyperTree => {
                let schema = spec_file
                    .schema
                    .ok_or_else(|| CliError::data("spec.json lacks the feature schema"))?;
                let ensembles = (0..spec_file.parameters.len())
                    .map(|j| read_json::<TreeEnsemble>(path, &format!("ensemble_{j:02}.json")))
                    .collect::<CliResult<Vec<_>>>()?;
                Model::HyperTree(HyperTreeModel {
                    spec: spec_file.target,
                    schema,
                    config: config.hypertree_config(),
                    ensembles,
                })
            }
            Family::TreeNet => Model::TreeNet(read_json(path, "treenet.json")?),
            Family::Baseline => Model::Baseline(read_json(path, "baseline.json")?),
        };
        let mut rdr = csv::Reader::from_path(path.join("training_log.csv"))?;
        let mut log = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse_err = || CliError::data("malformed training_log.csv");
            let r = rec.get(0).and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
            let l = rec.get(1).and_then(|v| v.parse().ok()).ok_or_else(parse_err)?;
            log.push((r, l));
        }
        Ok(Bundle {
            config,
            codes,
            model,
            log,
            holdout: None,
        })
    }
}
