//! One-vs-all Hyper-Tree: one boosted ensemble per target-model parameter,
//! trained on the derivatives of the target model's loss.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boosting::{FeatureMatrix, GradHess, TreeEnsemble, TreeParams};
use crate::data::{Design, FeatureSchema};
use crate::targets::{evaluate, objective, ParameterMatrix, TargetModelSpec};
use crate::{Error, Result};

/// Anything that maps feature rows to raw target-model parameters.
pub trait ParameterModel {
    fn spec(&self) -> &TargetModelSpec;
    fn schema(&self) -> &FeatureSchema;
    /// Row-major `n x P` raw parameters.
    fn predict_raw(&self, x: &FeatureMatrix) -> Result<Vec<f64>>;

    fn predict_parameters(&self, x: &FeatureMatrix) -> Result<ParameterMatrix> {
        ParameterMatrix::from_raw(self.spec(), self.predict_raw(x)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperTreeConfig {
    pub rounds: usize,
    pub tree: TreeParams,
}

impl Default for HyperTreeConfig {
    fn default() -> Self {
        HyperTreeConfig {
            rounds: 100,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperTreeModel {
    pub spec: TargetModelSpec,
    pub schema: FeatureSchema,
    pub config: HyperTreeConfig,
    /// Ensemble `j` predicts raw parameter `j`; its base value is the start
    /// value of that parameter.
    pub ensembles: Vec<TreeEnsemble>,
}

/// Loss after each round, with wall-clock seconds kept apart so the loss
/// record stays reproducible.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub initial_loss: f64,
    pub losses: Vec<f64>,
    pub seconds: Vec<f64>,
}

impl HyperTreeModel {
    /// Untrained model predicting `base_raw` everywhere.
    pub fn new(spec: TargetModelSpec, schema: FeatureSchema, config: HyperTreeConfig, base_raw: &[f64]) -> Self {
        let ensembles = base_raw
            .iter()
            .map(|&b| TreeEnsemble::new(b, config.tree, schema.kinds.clone()))
            .collect();
        HyperTreeModel {
            spec,
            schema,
            config,
            ensembles,
        }
    }

    pub fn base_raw(&self) -> Vec<f64> {
        self.ensembles.iter().map(|e| e.base).collect()
    }

    pub fn n_rounds(&self) -> usize {
        self.ensembles.first().map_or(0, |e| e.trees.len())
    }

    /// Split-gain totals per parameter and feature.
    pub fn feature_importance(&self) -> Vec<Vec<f64>> {
        self.ensembles.iter().map(|e| e.feature_importance()).collect()
    }

    /// Runs one synchronous boosting round: every parameter's tree is grown
    /// against gradients taken at the start-of-round parameters. `raw` is
    /// updated in place. Returns the start-of-round loss.
    pub fn boost_round(&mut self, design: &Design, rows: &[usize], raw: &mut [f64], round: usize) -> Result<f64> {
        let p = self.spec.param_count();
        let n = design.x.n_rows();
        let eval = evaluate(&self.spec, &design.target, raw).map_err(|e| abort(e, round))?;
        let loss = eval.loss();
        if !loss.is_finite() {
            return Err(abort(Error::NonFinite { context: String::new(), index: 0 }, round));
        }
        for (j, ens) in self.ensembles.iter_mut().enumerate() {
            let g = (0..n).map(|i| eval.grad[i * p + j]).collect();
            let h = (0..n).map(|i| eval.hess[i * p + j]).collect();
            let inc = ens.boost_round(&design.x, rows, &GradHess { g, h })?;
            for (i, v) in inc.into_iter().enumerate() {
                raw[i * p + j] += v;
            }
        }
        Ok(loss)
    }
}

fn abort(e: Error, round: usize) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite {
            context: format!("training loss at round {round}"),
            index: round,
        },
        other => other,
    }
}

impl ParameterModel for HyperTreeModel {
    fn spec(&self) -> &TargetModelSpec {
        &self.spec
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn predict_raw(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        let p = self.ensembles.len();
        let mut raw = vec![0.0; x.n_rows() * p];
        for (j, ens) in self.ensembles.iter().enumerate() {
            for (i, v) in ens.predict(x)?.into_iter().enumerate() {
                raw[i * p + j] = v;
            }
        }
        Ok(raw)
    }
}

/// Trains a Hyper-Tree on `design` for `config.rounds` rounds.
pub fn train(design: &Design, spec: &TargetModelSpec, config: &HyperTreeConfig) -> Result<(HyperTreeModel, TrainingLog)> {
    spec.validate()?;
    config.tree.validate()?;
    let base = spec.base_raw(&design.target);
    let mut model = HyperTreeModel::new(*spec, design.schema.clone(), *config, &base);
    let rows = design.target.active_rows();
    if rows.is_empty() {
        return Err(Error::EmptyLoss);
    }
    let mut raw = model.predict_raw(&design.x)?;
    let mut log = TrainingLog::default();
    for round in 1..=config.rounds {
        let start = Instant::now();
        let loss_before = model.boost_round(design, &rows, &mut raw, round)?;
        if round == 1 {
            log.initial_loss = loss_before;
        } else {
            log.losses.push(loss_before);
        }
        log.seconds.push(start.elapsed().as_secs_f64());
    }
    let final_obj = objective(spec, &design.target, &raw).map_err(|e| abort(e, config.rounds))?;
    let final_loss = final_obj / design.target.n_active() as f64;
    if !final_loss.is_finite() {
        return Err(abort(Error::NonFinite { context: String::new(), index: 0 }, config.rounds));
    }
    if config.rounds == 0 {
        log.initial_loss = final_loss;
    } else {
        log.losses.push(final_loss);
    }
    Ok((model, log))
}
