use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitCondition {
    /// Rows with `value <= threshold` go left.
    Threshold(f64),
    /// Rows whose code is in the (sorted) set go left.
    Codes(Vec<u32>),
}

impl SplitCondition {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        match self {
            SplitCondition::Threshold(t) => value <= *t,
            SplitCondition::Codes(codes) => {
                value >= 0.0 && codes.binary_search(&(value as u32)).is_ok()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearLeaf {
    pub intercept: f64,
    pub features: Vec<usize>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        condition: SplitCondition,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
        linear: Option<LinearLeaf>,
    },
}

/// A regression tree stored as a node arena with the root at index 0.
///
/// Serialised as nested node records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NodeRecord", try_from = "NodeRecord")]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        debug_assert!(!nodes.is_empty());
        Tree { nodes }
    }

    pub fn single_leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf {
                weight,
                linear: None,
            }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Largest feature id referenced by a split or a linear leaf.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .flat_map(|n| match n {
                Node::Split { feature, .. } => vec![*feature],
                Node::Leaf {
                    linear: Some(l), ..
                } => l.features.clone(),
                Node::Leaf { .. } => vec![],
            })
            .max()
    }

    pub fn leaf_index(&self, x: &FeatureMatrix, row: usize) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Split {
                    feature,
                    condition,
                    left,
                    right,
                    ..
                } => {
                    idx = if condition.goes_left(x.value(row, *feature)) {
                        *left
                    } else {
                        *right
                    };
                }
                Node::Leaf { .. } => return idx,
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        match &self.nodes[self.leaf_index(x, row)] {
            Node::Leaf {
                linear: Some(lin), ..
            } => {
                lin.intercept
                    + lin
                        .features
                        .iter()
                        .zip(&lin.coefficients)
                        .map(|(&f, c)| c * x.value(row, f))
                        .sum::<f64>()
            }
            Node::Leaf { weight, .. } => *weight,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|r| self.predict_row(x, r)).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
enum NodeRecord {
    Split {
        feature: usize,
        condition: SplitCondition,
        gain: f64,
        left: Box<NodeRecord>,
        right: Box<NodeRecord>,
    },
    Leaf {
        weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        linear: Option<LinearLeaf>,
    },
}

impl From<Tree> for NodeRecord {
    fn from(tree: Tree) -> Self {
        fn build(nodes: &[Node], idx: usize) -> NodeRecord {
            match &nodes[idx] {
                Node::Split {
                    feature,
                    condition,
                    gain,
                    left,
                    right,
                } => NodeRecord::Split {
                    feature: *feature,
                    condition: condition.clone(),
                    gain: *gain,
                    left: Box::new(build(nodes, *left)),
                    right: Box::new(build(nodes, *right)),
                },
                Node::Leaf { weight, linear } => NodeRecord::Leaf {
                    weight: *weight,
                    linear: linear.clone(),
                },
            }
        }
        build(&tree.nodes, 0)
    }
}

impl TryFrom<NodeRecord> for Tree {
    type Error = Error;

    fn try_from(record: NodeRecord) -> Result<Self> {
        fn push(nodes: &mut Vec<Node>, record: NodeRecord) -> usize {
            let idx = nodes.len();
            match record {
                NodeRecord::Leaf { weight, linear } => nodes.push(Node::Leaf { weight, linear }),
                NodeRecord::Split {
                    feature,
                    condition,
                    gain,
                    left,
                    right,
                } => {
                    nodes.push(Node::Leaf {
                        weight: 0.0,
                        linear: None,
                    });
                    let l = push(nodes, *left);
                    let r = push(nodes, *right);
                    nodes[idx] = Node::Split {
                        feature,
                        condition,
                        gain,
                        left: l,
                        right: r,
                    };
                }
            }
            idx
        }
        let mut nodes = Vec::new();
        push(&mut nodes, record);
        Ok(Tree { nodes })
    }
}
