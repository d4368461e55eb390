use serde::{Deserialize, Serialize};

use super::{grow_tree, FeatureKind, FeatureMatrix, GradHess, Node, Tree, TreeParams};
use crate::{Error, Result};

/// Additive tree ensemble: `base + sum_m learning_rate * tree_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub base: f64,
    pub params: TreeParams,
    pub feature_kinds: Vec<FeatureKind>,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn new(base: f64, params: TreeParams, feature_kinds: Vec<FeatureKind>) -> Self {
        TreeEnsemble {
            base,
            params,
            feature_kinds,
            trees: Vec::new(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.params.learning_rate
    }

    fn check_schema(&self, x: &FeatureMatrix) -> Result<()> {
        if x.kinds() != self.feature_kinds.as_slice() {
            return Err(Error::Schema(format!(
                "ensemble expects {} features {:?}, got {} features {:?}",
                self.feature_kinds.len(),
                self.feature_kinds,
                x.n_features(),
                x.kinds()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_schema(x)?;
        let nu = self.learning_rate();
        let mut out = vec![self.base; x.n_rows()];
        for tree in &self.trees {
            for (r, o) in out.iter_mut().enumerate() {
                *o += nu * tree.predict_row(x, r);
            }
        }
        Ok(out)
    }

    /// Grows one tree on `rows` and appends it. Returns the increment
    /// `learning_rate * tree(x)` for every row of `x`, so callers can keep a
    /// running prediction without re-evaluating earlier trees.
    pub fn boost_round(&mut self, x: &FeatureMatrix, rows: &[usize], grad: &GradHess) -> Result<Vec<f64>> {
        self.check_schema(x)?;
        let tree = grow_tree(x, rows, grad, &self.params)?;
        let nu = self.learning_rate();
        let increment = (0..x.n_rows()).map(|r| nu * tree.predict_row(x, r)).collect();
        self.trees.push(tree);
        Ok(increment)
    }

    /// Total split gain per feature across all trees.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.feature_kinds.len()];
        for tree in &self.trees {
            for node in tree.nodes() {
                if let Node::Split { feature, gain, .. } = node {
                    imp[*feature] += gain;
                }
            }
        }
        imp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> FeatureMatrix {
        FeatureMatrix::new(4, vec![vec![0.0, 1.0, 2.0, 3.0]], vec![FeatureKind::Numeric]).unwrap()
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let ens = TreeEnsemble::new(2.5, TreeParams::default(), vec![FeatureKind::Numeric]);
        assert_eq!(ens.predict(&data()).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn single_leaf_tree_shifts_by_scaled_weight() {
        let mut ens = TreeEnsemble::new(1.0, TreeParams::default(), vec![FeatureKind::Numeric]);
        ens.trees.push(Tree::single_leaf(3.0));
        assert_eq!(ens.predict(&data()).unwrap(), vec![1.0 + 0.1 * 3.0; 4]);
    }

    #[test]
    fn zero_learning_rate_leaves_predictions_unchanged() {
        let params = TreeParams {
            learning_rate: 0.0,
            min_leaf_count: 1,
            ..TreeParams::default()
        };
        let mut ens = TreeEnsemble::new(0.0, params, vec![FeatureKind::Numeric]);
        let grad = GradHess::new(vec![1.0, -1.0, 2.0, -2.0], vec![1.0; 4]).unwrap();
        let inc = ens.boost_round(&data(), &[0, 1, 2, 3], &grad).unwrap();
        assert_eq!(inc, vec![0.0; 4]);
        assert_eq!(ens.predict(&data()).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let ens = TreeEnsemble::new(0.0, TreeParams::default(), vec![FeatureKind::Numeric; 2]);
        assert!(matches!(ens.predict(&data()), Err(Error::Schema(_))));
    }
}
