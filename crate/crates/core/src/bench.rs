//! Per-iteration runtime as the number of target parameters grows.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{build_design, build_lags, CalendarField, Design, FeatureSpec, PanelDataset};
use crate::datasets::bench_panel;
use crate::hypertree::{HyperTreeConfig, HyperTreeModel, ParameterModel};
use crate::targets::TargetModelSpec;
use crate::treenet::{Trainer, TreeNetConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    HyperTree,
    TreeNet,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::HyperTree => "hypertree",
            Family::TreeNet => "treenet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub orders: Vec<usize>,
    pub n_series: usize,
    /// Active rows per series; the panel has `n_series * rows_per_series` rows
    /// for every order.
    pub rows_per_series: usize,
    pub iterations: usize,
    pub seed: u64,
    pub hypertree: HyperTreeConfig,
    pub treenet: TreeNetConfig,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            orders: vec![1, 6, 12, 24],
            n_series: 50,
            rows_per_series: 100,
            iterations: 20,
            seed: 0,
            hypertree: HyperTreeConfig::default(),
            treenet: TreeNetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub family: Family,
    pub p: usize,
    pub median_seconds: f64,
    /// Median relative to the smallest order of the same family.
    pub relative: f64,
}

/// AR(`p`) design on the benchmark panel. Every order sees the same rows,
/// and the same rows are active: the first `max_p` steps of each series
/// only serve as lags.
pub fn scaling_design(panel: &PanelDataset, p: usize, max_p: usize) -> Result<Design> {
    let ds = build_lags(panel, p)?;
    let spec = FeatureSpec {
        calendar: vec![CalendarField::Month, CalendarField::Quarter],
        series_code: false,
        extra_columns: true,
        summary: false,
    };
    let mut design = build_design(&ds, &spec)?;
    let target = &mut design.target;
    for span in target.spans.clone() {
        for i in span.start..span.start + max_p.min(span.len) {
            target.active[i] = false;
        }
    }
    Ok(design)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall-clock seconds per training iteration for both families at
/// every order. Wall-clock numbers are not reproducible and are never mixed
/// into model outputs.
pub fn scaling_benchmark(config: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    if config.orders.is_empty() || config.iterations == 0 || config.orders.contains(&0) {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one positive order and one iteration".into(),
        ));
    }
    let max_p = *config.orders.iter().max().expect("non-empty");
    let panel = bench_panel(config.n_series, config.rows_per_series + max_p, config.seed);
    let designs = config
        .orders
        .iter()
        .map(|&p| scaling_design(&panel, p, max_p))
        .collect::<Result<Vec<_>>>()?;
    let specs: Vec<_> = config.orders.iter().map(|&p| TargetModelSpec::ar(p)).collect();
    let mut rows = Vec::new();
    for family in [Family::HyperTree, Family::TreeNet] {
        // Iterations of all orders are interleaved so that drifting machine
        // load hits every order alike.
        let mut runners = designs
            .iter()
            .zip(&specs)
            .map(|(design, spec)| Runner::new(family, design, spec, config))
            .collect::<Result<Vec<_>>>()?;
        let mut times = vec![Vec::with_capacity(config.iterations); runners.len()];
        for round in 1..=config.iterations {
            for (runner, t) in runners.iter_mut().zip(&mut times) {
                let start = Instant::now();
                runner.step(round)?;
                t.push(start.elapsed().as_secs_f64());
            }
        }
        let medians: Vec<f64> = times.into_iter().map(median).collect();
        let reference = medians[0];
        rows.extend(config.orders.iter().zip(medians).map(|(&p, m)| ScalingRow {
            family,
            p,
            median_seconds: m,
            relative: m / reference,
        }));
    }
    Ok(rows)
}

enum Runner<'a> {
    HyperTree {
        model: HyperTreeModel,
        design: &'a Design,
        rows: Vec<usize>,
        raw: Vec<f64>,
    },
    TreeNet(Box<Trainer<'a>>),
}

impl<'a> Runner<'a> {
    fn new(family: Family, design: &'a Design, spec: &TargetModelSpec, config: &ScalingConfig) -> Result<Self> {
        Ok(match family {
            Family::HyperTree => {
                let base = spec.base_raw(&design.target);
                let model = HyperTreeModel::new(*spec, design.schema.clone(), config.hypertree, &base);
                let raw = model.predict_raw(&design.x)?;
                Runner::HyperTree {
                    model,
                    design,
                    rows: design.target.active_rows(),
                    raw,
                }
            }
            Family::TreeNet => Runner::TreeNet(Box::new(Trainer::new(design, spec, &config.treenet)?)),
        })
    }

    fn step(&mut self, round: usize) -> Result<()> {
        match self {
            Runner::HyperTree { model, design, rows, raw } => model.boost_round(design, rows, raw, round).map(|_| ()),
            Runner::TreeNet(t) => t.step(),
        }
    }
}
