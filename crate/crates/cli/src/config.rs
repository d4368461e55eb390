//! Run configuration: a TOML file plus `--set key=value` overrides.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set`
//! overrides in command-line order, then ablation switches.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use hypertrees::boosting::TreeParams;
use hypertrees::data::{CalendarField, CsvSchema, FeatureSpec, Frequency};
use hypertrees::hypertree::HyperTreeConfig;
use hypertrees::targets::{DampingConvention, TargetKind, TargetModelSpec};
use hypertrees::treenet::{Flow, TreeNetConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    HyperTree,
    TreeNet,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Ar,
    Ets,
    EtsLinear,
    Stl,
    /// The model emits the forecast itself (ablation a8).
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// CSV file, relative paths resolved against the config file.
    pub path: Option<PathBuf>,
    /// One of `air_passengers`, `monthly_panel`, `daily_panel`.
    pub builtin: Option<String>,
    pub frequency: Frequency,
    pub schema: CsvSchema,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            builtin: None,
            frequency: Frequency::Monthly,
            schema: CsvSchema::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub target: Target,
    /// AR order.
    pub p: usize,
    /// ETS season length.
    pub m: usize,
    pub n_season: usize,
    /// Fourier period; defaults to `m`.
    pub period: Option<f64>,
    pub penalty: f64,
    pub damping: DampingConvention,
    /// Constant ETS parameter value of the baseline family.
    pub ets_value: f64,
    /// Baseline ETS: pick `ets_value` by grid search on the last horizon of
    /// the training data.
    pub ets_grid: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            family: Family::HyperTree,
            target: Target::Ar,
            p: 12,
            m: 12,
            n_season: 3,
            period: None,
            penalty: 1.0,
            damping: DampingConvention::Power,
            ets_value: 0.3,
            ets_grid: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_leaves: usize,
    pub linear_leaves: bool,
}

impl Default for BoostingConfig {
    fn default() -> Self {
        let t = TreeParams::default();
        BoostingConfig {
            rounds: 100,
            learning_rate: t.learning_rate,
            lambda: t.lambda,
            max_depth: t.max_depth,
            min_leaf: t.min_leaf_count,
            max_leaves: t.max_leaves,
            linear_leaves: t.linear_leaves,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub d: usize,
    pub k: Option<usize>,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub flow: Flow,
    pub projection: bool,
    pub use_trees: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        let n = TreeNetConfig::default();
        NetConfig {
            d: n.d,
            k: n.k,
            hidden: n.hidden,
            dropout: n.dropout,
            lr: n.mlp_lr,
            flow: n.flow,
            projection: n.projection,
            use_trees: n.use_trees,
        }
    }
}

/// Overrides of the frequency's default feature set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    pub calendar: Option<Vec<CalendarField>>,
    pub series_code: Option<bool>,
    pub extra_columns: Option<bool>,
    pub summary: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub horizon: usize,
    /// Hold out the last `horizon` observations of every series.
    pub holdout: bool,
    pub reference_path: Option<PathBuf>,
    /// Average AR parameters over the horizon (ablation a11).
    pub average_parameters: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            horizon: 12,
            holdout: true,
            reference_path: None,
            average_parameters: false,
        }
    }
}

/// Ablation switches. Each one changes exactly one other field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    /// `net.d = 5`
    pub a1: bool,
    /// `boosting.linear_leaves = false`
    pub a2: bool,
    /// `net.hidden = 256`
    pub a3: bool,
    /// `net.projection = false`
    pub a4: bool,
    /// `model.p = p - p / 3`
    pub a5: bool,
    /// `features.summary = false`
    pub a6: bool,
    /// `net.use_trees = false`
    pub a7: bool,
    /// `model.target = "direct"`
    pub a8: bool,
    /// Two-stage leaf-index pipeline; not available.
    pub a9: bool,
    /// `net.flow = "shared"`
    pub a10: bool,
    /// `eval.average_parameters = true`
    pub a11: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub boosting: BoostingConfig,
    pub net: NetConfig,
    pub features: FeaturesConfig,
    pub eval: EvalConfig,
    pub ablations: Ablations,
}

const BUILTINS: [&str; 3] = ["air_passengers", "monthly_panel", "daily_panel"];

/// Sets `path` (dotted) in `table` to `raw`, read as a TOML value when it
/// parses as one and as a string otherwise.
fn set_path(table: &mut toml::Table, path: &str, raw: &str) -> CliResult<()> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::config(format!("invalid override key '{path}'")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override '{path}': '{k}' is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies `key=value` overrides and resolves a
    /// relative data path against `base_dir`.
    pub fn from_toml(text: &str, overrides: &[String], base_dir: Option<&Path>) -> CliResult<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::config(e.message().to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("override '{o}' is not of the form key=value")))?;
            set_path(&mut table, k.trim(), v.trim())?;
        }
        let mut config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))?;
        if let (Some(dir), Some(p)) = (base_dir, config.data.path.as_mut()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides, path.parent())
    }

    /// The configuration with every ablation switch applied and cleared,
    /// after validation. A built-in dataset brings its own frequency and
    /// column schema.
    pub fn effective(&self) -> CliResult<RunConfig> {
        let mut problems = self.ablation_problems();
        let mut c = self.clone();
        if let Some(b) = c.data.builtin.as_deref().and_then(crate::data::builtin) {
            c.data.frequency = b.frequency;
            c.data.schema = b.schema;
        }
        let a = c.ablations;
        if a.a1 {
            c.net.d = 5;
        }
        if a.a2 {
            c.boosting.linear_leaves = false;
        }
        if a.a3 {
            c.net.hidden = 256;
        }
        if a.a4 {
            c.net.projection = false;
        }
        if a.a5 {
            c.model.p -= c.model.p / 3;
        }
        if a.a6 {
            c.features.summary = Some(false);
        }
        if a.a7 {
            c.net.use_trees = false;
        }
        if a.a8 {
            c.model.target = Target::Direct;
        }
        if a.a10 {
            c.net.flow = Flow::Shared;
        }
        if a.a11 {
            c.eval.average_parameters = true;
        }
        c.ablations = Ablations::default();
        problems.extend(c.problems());
        if problems.is_empty() {
            Ok(c)
        } else {
            Err(CliError::Config(problems))
        }
    }

    fn ablation_problems(&self) -> Vec<String> {
        let a = self.ablations;
        let mut out = Vec::new();
        if a.a9 {
            out.push("ablations.a9 (two-stage leaf-index pipeline) is not available".to_string());
        }
        if self.model.family != Family::TreeNet {
            for (on, name) in [(a.a1, "a1"), (a.a3, "a3"), (a.a4, "a4"), (a.a7, "a7"), (a.a10, "a10")] {
                if on {
                    out.push(format!("ablations.{name} applies to the treenet family only"));
                }
            }
        }
        if a.a5 && self.model.target != Target::Ar {
            out.push("ablations.a5 applies to the ar target only".to_string());
        }
        if a.a8 && self.model.family == Family::Baseline {
            out.push("ablations.a8 needs the hypertree or treenet family".to_string());
        }
        out
    }

    /// Every violated constraint of an ablation-free configuration.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        match (&self.data.path, &self.data.builtin) {
            (None, None) => out.push("data.path is missing (or set data.builtin)".to_string()),
            (Some(_), Some(_)) => out.push("set only one of data.path and data.builtin".to_string()),
            (None, Some(b)) if !BUILTINS.contains(&b.as_str()) => {
                out.push(format!("data.builtin '{b}' is unknown; choose one of {}", BUILTINS.join(", ")))
            }
            _ => {}
        }
        let m = &self.model;
        if m.target == Target::Ar && m.p == 0 {
            out.push("model.p must be at least 1".to_string());
        }
        if matches!(m.target, Target::Ets | Target::EtsLinear) && m.m < 2 {
            out.push("model.m must be at least 2".to_string());
        }
        if m.target == Target::Stl {
            if m.n_season == 0 {
                out.push("model.n_season must be at least 1".to_string());
            }
            if !(m.penalty >= 0.0) {
                out.push(format!("model.penalty must be >= 0, got {}", m.penalty));
            }
            if m.period.is_some_and(|p| !(p > 0.0)) {
                out.push("model.period must be positive".to_string());
            }
        }
        if m.family == Family::Baseline {
            if !matches!(m.target, Target::Ar | Target::Ets | Target::EtsLinear) {
                out.push("the baseline family supports the ar, ets and ets_linear targets".to_string());
            }
            if !(m.ets_value > 0.0 && m.ets_value < 1.0) {
                out.push(format!("model.ets_value must lie in (0, 1), got {}", m.ets_value));
            }
        }
        if self.eval.horizon == 0 {
            out.push("eval.horizon must be at least 1".to_string());
        }
        if self.eval.average_parameters && (m.target != Target::Ar || m.family == Family::Baseline) {
            out.push("eval.average_parameters needs an ar target with the hypertree or treenet family".to_string());
        }
        if let Err(e) = self.tree_params().validate() {
            out.extend(split_problems(&e, "boosting"));
        }
        if m.family == Family::TreeNet {
            let mut net = self.treenet_config();
            net.tree = TreeParams::default();
            if let Err(e) = net.validate() {
                out.extend(split_problems(&e, "net"));
            }
        }
        out
    }

    pub fn target_spec(&self) -> TargetModelSpec {
        let m = &self.model;
        let mut spec = match m.target {
            Target::Ar => TargetModelSpec::ar(m.p),
            Target::Ets => TargetModelSpec::ets(m.m),
            Target::EtsLinear => TargetModelSpec::ets_linear(m.m),
            Target::Stl => TargetModelSpec::stl(m.n_season, m.period.unwrap_or(m.m as f64), m.penalty),
            Target::Direct => TargetModelSpec::new(TargetKind::Direct),
        };
        spec.damping = m.damping;
        spec
    }

    pub fn feature_spec(&self) -> FeatureSpec {
        let f = &self.features;
        let mut spec = FeatureSpec::for_frequency(self.data.frequency, self.model.target == Target::Stl);
        if let Some(c) = &f.calendar {
            spec.calendar = c.clone();
        }
        if let Some(v) = f.series_code {
            spec.series_code = v;
        }
        if let Some(v) = f.extra_columns {
            spec.extra_columns = v;
        }
        if let Some(v) = f.summary {
            spec.summary = v;
        }
        spec
    }

    pub fn tree_params(&self) -> TreeParams {
        let b = &self.boosting;
        TreeParams {
            learning_rate: b.learning_rate,
            lambda: b.lambda,
            max_depth: b.max_depth,
            min_leaf_count: b.min_leaf,
            max_leaves: b.max_leaves,
            linear_leaves: b.linear_leaves,
            ..TreeParams::default()
        }
    }

    pub fn hypertree_config(&self) -> HyperTreeConfig {
        HyperTreeConfig {
            rounds: self.boosting.rounds,
            tree: self.tree_params(),
        }
    }

    pub fn treenet_config(&self) -> TreeNetConfig {
        let n = &self.net;
        TreeNetConfig {
            iterations: self.boosting.rounds,
            tree: self.tree_params(),
            d: n.d,
            k: n.k,
            hidden: n.hidden,
            dropout: n.dropout,
            mlp_lr: n.lr,
            flow: n.flow,
            projection: n.projection,
            use_trees: n.use_trees,
            seed: self.seed,
        }
    }
}

fn split_problems(e: &hypertrees::Error, section: &str) -> Vec<String> {
    let msg = match e {
        hypertrees::Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    };
    msg.split("; ").map(|p| format!("{section}: {p}")).collect()
}
