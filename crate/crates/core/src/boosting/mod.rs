//! Newton gradient-boosting engine driven by externally supplied gradients
//! and Hessians.
//!
//! Trees are grown best-first with exact split enumeration: numeric features
//! are split at midpoints between sorted unique values, categorical features
//! by prefixes of the codes ordered by `G/H`. Leaves carry the Newton step
//! `-G / (H + lambda)`, or optionally a ridge-regularised linear model over the
//! numeric features on their root-to-leaf path.

mod ensemble;
mod grow;
mod linear;
mod tree;

pub use ensemble::TreeEnsemble;
pub use grow::grow_tree;
pub use linear::{fit_linear_leaf, LinearFit};
pub use tree::{LinearLeaf, Node, SplitCondition, Tree};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hessians are floored at this value before aggregation so that
/// `H + lambda > 0` holds even with `lambda = 0`.
pub const HESSIAN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    /// Codes are `0..cardinality`; the last code is reserved for categories
    /// unseen during training and never appears in a split's code set.
    Categorical { cardinality: u32 },
}

/// Column-major feature matrix. Categorical codes are stored as exact
/// integers in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    kinds: Vec<FeatureKind>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, columns: Vec<Vec<f64>>, kinds: Vec<FeatureKind>) -> Result<Self> {
        if columns.len() != kinds.len() {
            return Err(Error::Schema(format!(
                "{} feature columns but {} kinds",
                columns.len(),
                kinds.len()
            )));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "feature column {j} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("feature column {j}"),
                    index: i,
                });
            }
        }
        Ok(FeatureMatrix {
            n_rows,
            columns,
            kinds,
        })
    }

    /// Matrix with `n_rows` rows and no features (every tree is a single leaf).
    pub fn empty(n_rows: usize) -> Self {
        FeatureMatrix {
            n_rows,
            columns: Vec::new(),
            kinds: Vec::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    /// Rows `rows` of this matrix, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            kinds: self.kinds.clone(),
        }
    }
}

/// Per-observation first and second derivatives of a loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradHess {
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl GradHess {
    pub fn new(g: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        if g.len() != h.len() {
            return Err(Error::InvalidArgument(format!(
                "gradient length {} differs from hessian length {}",
                g.len(),
                h.len()
            )));
        }
        Ok(GradHess { g, h })
    }

    pub fn zeros(n: usize) -> Self {
        GradHess {
            g: vec![0.0; n],
            h: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub learning_rate: f64,
    pub lambda: f64,
    pub max_depth: usize,
    pub min_leaf_count: usize,
    /// Upper bound on leaves per tree for best-first growth.
    pub max_leaves: usize,
    pub linear_leaves: bool,
    /// Ridge penalty on linear-leaf slopes.
    pub linear_ridge: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            learning_rate: 0.1,
            lambda: 1.0,
            max_depth: 6,
            min_leaf_count: 5,
            max_leaves: 31,
            linear_leaves: false,
            linear_ridge: 1e-4,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate <= 1.0) {
            problems.push(format!("learning_rate {} outside [0, 1]", self.learning_rate));
        }
        if !(self.lambda >= 0.0) {
            problems.push(format!("lambda {} must be >= 0", self.lambda));
        }
        if self.min_leaf_count == 0 {
            problems.push("min_leaf_count must be >= 1".to_string());
        }
        if self.max_leaves < 1 {
            problems.push("max_leaves must be >= 1".to_string());
        }
        if !(self.linear_ridge >= 0.0) {
            problems.push(format!("linear_ridge {} must be >= 0", self.linear_ridge));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }
}

/// Newton-optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if !(denom > 0.0) {
        return Err(Error::NumericGuard {
            series: String::new(),
            t: 0,
            what: format!("leaf denominator H + lambda = {denom} is not positive"),
        });
    }
    Ok(-g / denom)
}

/// Loss reduction of a split, up to a constant factor of one half.
#[inline]
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64) -> f64 {
    let g = gl + gr;
    gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - g * g / (hl + hr + lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(leaf_weight(2.0, 3.0, 1.0).unwrap(), -0.5);
        assert_eq!(leaf_weight(0.0, 5.0, 0.3).unwrap(), 0.0);
        assert_eq!(leaf_weight(-4.0, 1.0, 0.0).unwrap(), 4.0);
        assert!(leaf_weight(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn split_gain_examples() {
        assert_eq!(split_gain(-2.0, 1.0, 4.0, 1.0, 0.0), 18.0);
        assert_eq!(split_gain(1.0, 1.0, 1.0, 1.0, 0.0), 0.0);
        // identical per-row statistics on both sides: 3 rows left, 2 right
        let gain = split_gain(3.0 * 0.5, 3.0 * 2.0, 2.0 * 0.5, 2.0 * 2.0, 0.0);
        assert!(gain.abs() < 1e-12);
    }

    #[test]
    fn split_gain_equals_objective_reduction() {
        // The leaf objective for a set is -G^2 / (H + lambda) (times 1/2).
        let objective = |g: f64, h: f64, l: f64| -g * g / (h + l);
        let (gl, hl, gr, hr, l) = (1.5, 2.0, -3.25, 4.5, 0.7);
        let reduction =
            objective(gl + gr, hl + hr, l) - objective(gl, hl, l) - objective(gr, hr, l);
        assert!((split_gain(gl, hl, gr, hr, l) - reduction).abs() < 1e-12);
    }

    #[test]
    fn matrix_rejects_ragged_columns() {
        let err = FeatureMatrix::new(3, vec![vec![1.0, 2.0]], vec![FeatureKind::Numeric]);
        assert!(matches!(err, Err(Error::Schema(_))));
    }
}
