//! Hyper-TreeNet: boosted trees emit a low-dimensional embedding per row, a
//! fixed Gaussian projection expands it, and a small MLP decodes it into the
//! target model's raw parameters.

mod mlp;

use std::collections::HashMap;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

pub use mlp::{Adam, Mlp, MlpCache, MlpGrads};

use crate::boosting::{FeatureMatrix, GradHess, TreeEnsemble, TreeParams, HESSIAN_FLOOR};
use crate::data::{Design, FeatureSchema};
use crate::hypertree::{ParameterModel, TrainingLog};
use crate::seed::{rng_for, Stream};
use crate::targets::{evaluate_with, objective, TargetData, TargetEval, TargetModelSpec};
use crate::{Error, Result};

/// How the MLP update and the tree update share a loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    /// One training-mode pass feeds both updates.
    Shared,
    /// MLP step in training mode, then a fresh eval-mode pass for the trees.
    #[default]
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeNetConfig {
    pub iterations: usize,
    pub tree: TreeParams,
    /// Embedding dimension.
    pub d: usize,
    /// Projection width; `None` means one per target parameter.
    pub k: Option<usize>,
    pub hidden: usize,
    pub dropout: f64,
    pub mlp_lr: f64,
    pub flow: Flow,
    /// Off: embeddings go straight into the MLP.
    pub projection: bool,
    /// Off: no trees; the MLP reads standardised features instead.
    pub use_trees: bool,
    pub seed: u64,
}

impl Default for TreeNetConfig {
    fn default() -> Self {
        TreeNetConfig {
            iterations: 100,
            tree: TreeParams::default(),
            d: 1,
            k: None,
            hidden: 128,
            dropout: 0.1,
            mlp_lr: 1e-3,
            flow: Flow::Separate,
            projection: true,
            use_trees: true,
            seed: 0,
        }
    }
}

impl TreeNetConfig {
    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        let mut bad = Vec::new();
        if self.d == 0 {
            bad.push("d must be at least 1".to_string());
        }
        if self.k == Some(0) {
            bad.push("k must be at least 1".to_string());
        }
        if self.hidden == 0 {
            bad.push("hidden must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            bad.push(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.mlp_lr.is_finite() && self.mlp_lr >= 0.0) {
            bad.push(format!("mlp_lr must be finite and non-negative, got {}", self.mlp_lr));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(bad.join("; ")))
        }
    }
}

/// Fixed `k x d` matrix with standard Normal entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub k: usize,
    pub d: usize,
    /// Row-major `k x d`.
    pub matrix: Vec<f64>,
    pub seed: u64,
}

impl Projection {
    pub fn sample(k: usize, d: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, Stream::Projection);
        let matrix = (0..k * d).map(|_| rng.sample(StandardNormal)).collect();
        Projection { k, d, matrix, seed }
    }

    fn as_array(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.k, self.d), self.matrix.clone()).expect("projection shape")
    }
}

/// Per-column standardisation used when the MLP reads features directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl FeatureScaling {
    pub fn fit(x: &FeatureMatrix, rows: &[usize]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = Vec::with_capacity(x.n_features());
        let mut scale = Vec::with_capacity(x.n_features());
        for f in 0..x.n_features() {
            let col = x.column(f);
            let m = rows.iter().map(|&r| col[r]).sum::<f64>() / n;
            let v = rows.iter().map(|&r| (col[r] - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            scale.push(if v > 0.0 { v.sqrt() } else { 1.0 });
        }
        FeatureScaling { mean, scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNetModel {
    pub spec: TargetModelSpec,
    pub schema: FeatureSchema,
    pub config: TreeNetConfig,
    /// One ensemble per embedding dimension, each with base 0.
    pub embed: Vec<TreeEnsemble>,
    pub projection: Option<Projection>,
    pub mlp: Mlp,
    /// Constant added to the MLP output, so `theta_raw = base_raw + mlp(z)`.
    pub base_raw: Vec<f64>,
    pub scaling: Option<FeatureScaling>,
}

/// Output of [`TreeNetModel::forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Row-major `n x d`; empty when the model has no trees.
    pub embeddings: Vec<f64>,
    /// Row-major `n x P`.
    pub raw: Vec<f64>,
}

/// Inverted dropout on the `n x P` output: entries listed in `dropped`
/// are zeroed, all others are scaled by `keep`.
struct Dropout {
    keep: f64,
    /// Sorted flat indices into the row-major output.
    dropped: Vec<usize>,
}

impl Dropout {
    /// Independent Bernoulli drops, drawn as geometric gaps between
    /// dropped entries: `floor(E / -ln(1 - rate))` with `E ~ Exp(1)`.
    fn sample(rate: f64, len: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = -1.0 / (1.0 - rate).ln();
        let mut dropped = Vec::with_capacity((rate * len as f64 * 1.2) as usize + 8);
        let mut pos = 0usize;
        loop {
            let e: f64 = rng.sample(Exp1);
            let gap = (e * scale).floor();
            if gap >= (len - pos) as f64 {
                break;
            }
            pos += gap as usize;
            dropped.push(pos);
            pos += 1;
        }
        Dropout {
            keep: 1.0 / (1.0 - rate),
            dropped,
        }
    }
}

/// One network evaluation. Rows with identical inputs share a group, and
/// the MLP runs once per group.
struct Pass {
    group: Vec<usize>,
    cache: MlpCache,
    /// Dropout state; `None` in eval mode.
    dropout: Option<Dropout>,
    raw: Vec<f64>,
}

impl TreeNetModel {
    /// Untrained model. The projection and MLP weights come from the
    /// config seed.
    pub fn new(
        spec: TargetModelSpec,
        schema: FeatureSchema,
        config: TreeNetConfig,
        base_raw: Vec<f64>,
        scaling: Option<FeatureScaling>,
    ) -> Result<Self> {
        config.validate()?;
        let p = spec.param_count();
        if base_raw.len() != p {
            return Err(Error::InvalidArgument(format!(
                "base_raw has {} entries, target has {p} parameters",
                base_raw.len()
            )));
        }
        let n_features = schema.kinds.len();
        let (embed, projection, n_in) = if config.use_trees {
            let embed = (0..config.d)
                .map(|_| TreeEnsemble::new(0.0, config.tree, schema.kinds.clone()))
                .collect();
            if config.projection {
                let k = config.k.unwrap_or(p);
                (embed, Some(Projection::sample(k, config.d, config.seed)), k)
            } else {
                (embed, None, config.d)
            }
        } else {
            if scaling.is_none() {
                return Err(Error::InvalidArgument(
                    "a model without trees needs feature scaling".into(),
                ));
            }
            (Vec::new(), None, n_features)
        };
        let mut rng = rng_for(config.seed, Stream::MlpInit);
        let mlp = Mlp::init(n_in, config.hidden, p, &mut rng);
        Ok(TreeNetModel {
            spec,
            schema,
            config,
            embed,
            projection,
            mlp,
            base_raw,
            scaling,
        })
    }

    pub fn d(&self) -> usize {
        self.embed.len()
    }

    /// Replaces the MLP with one of the same shape whose weights are all 0.
    pub fn zero_mlp(&mut self) {
        self.mlp = Mlp::zeroed(self.mlp.n_in, self.mlp.hidden, self.mlp.n_out);
    }

    /// Row-major `n x d` tree embeddings.
    pub fn embeddings(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if !self.config.use_trees {
            return Err(Error::Capability("model has no tree embeddings".into()));
        }
        let d = self.d();
        let mut e = vec![0.0; x.n_rows() * d];
        for (k, ens) in self.embed.iter().enumerate() {
            for (i, v) in ens.predict(x)?.into_iter().enumerate() {
                e[i * d + k] = v;
            }
        }
        Ok(e)
    }

    /// Embeddings and raw parameters. Dropout is applied iff `dropout_rng`
    /// is given.
    pub fn forward(&self, x: &FeatureMatrix, dropout_rng: Option<&mut ChaCha8Rng>) -> Result<Forward> {
        self.schema_check(x)?;
        let embeddings = if self.config.use_trees {
            self.embeddings(x)?
        } else {
            Vec::new()
        };
        let pass = self.pass(x, &embeddings, dropout_rng);
        Ok(Forward {
            embeddings,
            raw: pass.raw,
        })
    }

    fn schema_check(&self, x: &FeatureMatrix) -> Result<()> {
        if x.kinds() != self.schema.kinds.as_slice() {
            return Err(Error::Schema(format!(
                "model expects {} features, got {}",
                self.schema.kinds.len(),
                x.n_features()
            )));
        }
        Ok(())
    }

    /// Network input for row `i`: the embedding row, or standardised
    /// features when there are no trees.
    fn input_row(&self, x: &FeatureMatrix, e: &[f64], i: usize, out: &mut Vec<f64>) {
        out.clear();
        match &self.scaling {
            Some(s) if !self.config.use_trees => {
                out.extend((0..x.n_features()).map(|f| (x.value(i, f) - s.mean[f]) / s.scale[f]))
            }
            _ => {
                let d = self.d();
                out.extend_from_slice(&e[i * d..(i + 1) * d]);
            }
        }
    }

    fn pass(&self, x: &FeatureMatrix, e: &[f64], dropout_rng: Option<&mut ChaCha8Rng>) -> Pass {
        let n = x.n_rows();
        let p = self.mlp.n_out;
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut group = Vec::with_capacity(n);
        let mut distinct: Vec<f64> = Vec::new();
        let mut row = Vec::new();
        let mut key: Vec<u64> = Vec::new();
        for i in 0..n {
            self.input_row(x, e, i, &mut row);
            key.clear();
            key.extend(row.iter().map(|v| v.to_bits()));
            let g = match index.get(key.as_slice()) {
                Some(&g) => g,
                None => {
                    let g = index.len();
                    index.insert(key.clone(), g);
                    distinct.extend_from_slice(&row);
                    g
                }
            };
            group.push(g);
        }
        let raw_in = Array2::from_shape_vec((index.len(), row.len()), distinct).expect("input shape");
        let input = match &self.projection {
            Some(proj) if self.config.use_trees => raw_in.dot(&proj.as_array().t()),
            _ => raw_in,
        };
        let cache = self.mlp.forward(input);
        let dropout = dropout_rng
            .filter(|_| self.config.dropout > 0.0)
            .map(|rng| Dropout::sample(self.config.dropout, n * p, rng));
        let out = cache.out.as_slice().expect("standard layout");
        let scale = dropout.as_ref().map_or(1.0, |d| d.keep);
        let mut raw = Vec::with_capacity(n * p);
        for &g in &group {
            raw.extend_from_slice(&out[g * p..(g + 1) * p]);
        }
        if scale != 1.0 {
            raw.iter_mut().for_each(|v| *v *= scale);
        }
        if self.base_raw.iter().any(|&b| b != 0.0) {
            for row in raw.chunks_exact_mut(p) {
                for (v, b) in row.iter_mut().zip(&self.base_raw) {
                    *v += b;
                }
            }
        }
        if let Some(d) = &dropout {
            for &k in &d.dropped {
                raw[k] = self.base_raw[k % p];
            }
        }
        Pass {
            group,
            cache,
            dropout,
            raw,
        }
    }

    /// MLP parameter gradients of the mean loss.
    fn mlp_grads(&self, pass: &Pass, eval: &TargetEval) -> MlpGrads {
        let p = self.mlp.n_out;
        let scale = 1.0 / eval.n_obs.max(1) as f64;
        let mut d_out = Array2::<f64>::zeros(pass.cache.out.raw_dim());
        let acc = d_out.as_slice_mut().expect("standard layout");
        for (i, &g) in pass.group.iter().enumerate() {
            let grad = &eval.grad[i * p..(i + 1) * p];
            for (a, b) in acc[g * p..(g + 1) * p].iter_mut().zip(grad) {
                *a += b;
            }
        }
        if let Some(d) = &pass.dropout {
            for &k in &d.dropped {
                acc[pass.group[k / p] * p + k % p] -= eval.grad[k];
            }
        }
        let scale = scale * pass.dropout.as_ref().map_or(1.0, |d| d.keep);
        d_out.mapv_inplace(|v| v * scale);
        self.mlp.backward(&pass.cache, &d_out)
    }

    /// Chain-rule gradient and Gauss-Newton Hessian of the objective with
    /// respect to each embedding coordinate, for every row.
    fn embed_derivs(&self, pass: &Pass, eval: &TargetEval, target: &TargetData) -> Vec<GradHess> {
        let p = self.mlp.n_out;
        let d = self.d();
        let n = pass.group.len();
        let m = match &self.projection {
            Some(proj) => proj.as_array(),
            None => Array2::eye(d),
        };
        let w1m = self.mlp.first_layer_times(&m);
        let jac = self.mlp.input_jacobians(&pass.cache, &w1m);
        let mut out: Vec<GradHess> = (0..d).map(|_| GradHess::zeros(n)).collect();
        let mut u = vec![0.0; p];
        let mut cursor = 0;
        for i in 0..n {
            if !target.active[i] {
                continue;
            }
            let g = pass.group[i];
            let grad = &eval.grad[i * p..(i + 1) * p];
            let row_drops = match &pass.dropout {
                Some(d) => {
                    while cursor < d.dropped.len() && d.dropped[cursor] < i * p {
                        cursor += 1;
                    }
                    let end = d.dropped[cursor..].partition_point(|&k| k < (i + 1) * p);
                    Some((d.keep, &d.dropped[cursor..cursor + end]))
                }
                None => None,
            };
            for (k, gh) in out.iter_mut().enumerate() {
                let col = &jac[k].as_slice().expect("standard layout")[g * p..(g + 1) * p];
                let u: &[f64] = match row_drops {
                    Some((keep, drops)) => {
                        for (u, c) in u.iter_mut().zip(col) {
                            *u = keep * c;
                        }
                        for &k in drops {
                            u[k - i * p] = 0.0;
                        }
                        &u
                    }
                    None => col,
                };
                gh.g[i] = grad.iter().zip(u).map(|(a, b)| a * b).sum();
                gh.h[i] = eval.curvature.quad_form(i, p, u).max(HESSIAN_FLOOR);
            }
        }
        out
    }

    /// Gradient and Hessian with respect to embeddings `e` (row-major
    /// `n x d`) with the network in eval mode, plus the objective there.
    pub fn embedding_grad_hess(&self, x: &FeatureMatrix, target: &TargetData, e: &[f64]) -> Result<(Vec<GradHess>, f64)> {
        self.check_embeddings(x, e)?;
        let pass = self.pass(x, e, None);
        let eval = evaluate_with(&self.spec, target, &pass.raw, false)?;
        Ok((self.embed_derivs(&pass, &eval, target), eval.objective))
    }

    /// Objective at embeddings `e` with the network in eval mode.
    pub fn objective_at(&self, x: &FeatureMatrix, target: &TargetData, e: &[f64]) -> Result<f64> {
        self.check_embeddings(x, e)?;
        let pass = self.pass(x, e, None);
        objective(&self.spec, target, &pass.raw)
    }

    fn check_embeddings(&self, x: &FeatureMatrix, e: &[f64]) -> Result<()> {
        if !self.config.use_trees {
            return Err(Error::Capability("model has no tree embeddings".into()));
        }
        if e.len() != x.n_rows() * self.d() {
            return Err(Error::InvalidArgument(format!(
                "expected {} embedding values, got {}",
                x.n_rows() * self.d(),
                e.len()
            )));
        }
        Ok(())
    }
}

impl ParameterModel for TreeNetModel {
    fn spec(&self) -> &TargetModelSpec {
        &self.spec
    }

    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn predict_raw(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.forward(x, None)?.raw)
    }
}

/// Iteration-at-a-time training state.
pub struct Trainer<'a> {
    pub model: TreeNetModel,
    design: &'a Design,
    rows: Vec<usize>,
    embeddings: Vec<f64>,
    adam: Adam,
    dropout: ChaCha8Rng,
    iteration: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(design: &'a Design, spec: &TargetModelSpec, config: &TreeNetConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        let rows = design.target.active_rows();
        if rows.is_empty() {
            return Err(Error::EmptyLoss);
        }
        let base = spec.base_raw(&design.target);
        let scaling = (!config.use_trees).then(|| FeatureScaling::fit(&design.x, &rows));
        let model = TreeNetModel::new(*spec, design.schema.clone(), *config, base, scaling)?;
        let embeddings = if config.use_trees {
            model.embeddings(&design.x)?
        } else {
            Vec::new()
        };
        let adam = Adam::new(config.mlp_lr, model.mlp.n_weights());
        Ok(Trainer {
            model,
            design,
            rows,
            embeddings,
            adam,
            dropout: rng_for(config.seed, Stream::Dropout),
            iteration: 0,
        })
    }

    /// Eval-mode loss per active observation at the current state.
    pub fn loss(&self) -> Result<f64> {
        let pass = self.model.pass(&self.design.x, &self.embeddings, None);
        let obj = objective(&self.model.spec, &self.design.target, &pass.raw)?;
        Ok(obj / self.design.target.n_active() as f64)
    }

    /// Runs one training iteration over all rows.
    pub fn step(&mut self) -> Result<()> {
        self.iteration += 1;
        let it = self.iteration;
        let x = &self.design.x;
        let target = &self.design.target;
        let model = &mut self.model;
        let train_pass = model.pass(x, &self.embeddings, Some(&mut self.dropout));
        let train_eval = checked_eval(&model.spec, target, &train_pass.raw, it)?;
        let grads = model.mlp_grads(&train_pass, &train_eval);
        let shared = if model.config.use_trees && model.config.flow == Flow::Shared {
            Some(model.embed_derivs(&train_pass, &train_eval, target))
        } else {
            None
        };
        self.adam.step(&mut model.mlp, &grads);
        if !model.config.use_trees {
            return Ok(());
        }
        let tree_grads = match shared {
            Some(t) => t,
            None => {
                let pass = model.pass(x, &self.embeddings, None);
                let eval = checked_eval(&model.spec, target, &pass.raw, it)?;
                model.embed_derivs(&pass, &eval, target)
            }
        };
        let d = model.embed.len();
        for (k, (ens, gh)) in model.embed.iter_mut().zip(&tree_grads).enumerate() {
            let inc = ens.boost_round(x, &self.rows, gh)?;
            for (i, v) in inc.into_iter().enumerate() {
                self.embeddings[i * d + k] += v;
            }
        }
        Ok(())
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Current training-row embeddings, row-major `n x d`.
    pub fn embeddings(&self) -> &[f64] {
        &self.embeddings
    }
}

fn checked_eval(spec: &TargetModelSpec, target: &TargetData, raw: &[f64], it: usize) -> Result<TargetEval> {
    let eval = evaluate_with(spec, target, raw, false).map_err(|e| abort(e, it))?;
    if !eval.objective.is_finite() {
        return Err(abort(Error::NonFinite { context: String::new(), index: 0 }, it));
    }
    Ok(eval)
}

fn abort(e: Error, iteration: usize) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite {
            context: format!("training loss at iteration {iteration}"),
            index: iteration,
        },
        other => other,
    }
}

/// Trains a Hyper-TreeNet for `config.iterations` full-batch iterations.
/// The log records the eval-mode loss before training and after every
/// iteration.
pub fn train(design: &Design, spec: &TargetModelSpec, config: &TreeNetConfig) -> Result<(TreeNetModel, TrainingLog)> {
    let mut trainer = Trainer::new(design, spec, config)?;
    let mut log = TrainingLog {
        initial_loss: trainer.loss()?,
        ..TrainingLog::default()
    };
    for it in 1..=config.iterations {
        let start = Instant::now();
        trainer.step()?;
        log.seconds.push(start.elapsed().as_secs_f64());
        let loss = trainer.loss().map_err(|e| abort(e, it))?;
        if !loss.is_finite() {
            return Err(abort(Error::NonFinite { context: String::new(), index: 0 }, it));
        }
        log.losses.push(loss);
    }
    Ok((trainer.model, log))
}
