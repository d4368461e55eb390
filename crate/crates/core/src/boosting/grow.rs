use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::linear::fit_linear_leaf;
use super::tree::{Node, SplitCondition, Tree};
use super::{leaf_weight, split_gain, FeatureKind, FeatureMatrix, GradHess, TreeParams, HESSIAN_FLOOR};
use crate::{Error, Result};

/// Splits must beat this fraction of the parent's score; guards against
/// splitting on rounding noise when the true gain is zero.
const RELATIVE_GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Candidate {
    feature: usize,
    condition: SplitCondition,
    gain: f64,
}

/// Rows of an open leaf, plus one value-sorted copy per numeric feature.
struct OpenLeaf {
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    sorted: Vec<Option<Vec<usize>>>,
    g_sum: f64,
    h_sum: f64,
    path_features: Vec<usize>,
    best: Option<Candidate>,
}

/// Grows one tree on `rows` against the supplied gradients and Hessians.
///
/// `grad` is indexed by absolute row id (it has one entry per row of `x`).
/// Hessians are floored at [`HESSIAN_FLOOR`] before aggregation. Among equal
/// gains, the lowest feature id wins, then the lowest threshold.
pub fn grow_tree(x: &FeatureMatrix, rows: &[usize], grad: &GradHess, params: &TreeParams) -> Result<Tree> {
    if grad.len() != x.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} rows, feature matrix has {}",
            grad.len(),
            x.n_rows()
        )));
    }
    let g = &grad.g;
    let h: Vec<f64> = grad.h.iter().map(|v| v.max(HESSIAN_FLOOR)).collect();
    if let Some(i) = rows.iter().position(|&r| !g[r].is_finite() || !h[r].is_finite()) {
        return Err(Error::NonFinite {
            context: "gradient/hessian".into(),
            index: rows[i],
        });
    }

    let sorted = x
        .kinds()
        .iter()
        .enumerate()
        .map(|(f, kind)| match kind {
            FeatureKind::Numeric => {
                let col = x.column(f);
                let mut s = rows.to_vec();
                s.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
                Some(s)
            }
            FeatureKind::Categorical { .. } => None,
        })
        .collect();

    let (g_sum, h_sum) = sums(rows, g, &h);
    let mut nodes = vec![placeholder()];
    let mut root = OpenLeaf {
        node: 0,
        depth: 0,
        rows: rows.to_vec(),
        sorted,
        g_sum,
        h_sum,
        path_features: Vec::new(),
        best: None,
    };
    root.best = best_split(x, g, &h, &root, params);

    let mut open = vec![root];
    let mut closed: Vec<OpenLeaf> = Vec::new();
    let mut n_leaves = 1;
    let mut goes_left = vec![false; x.n_rows()];

    while n_leaves < params.max_leaves {
        // Highest gain first; ties go to the earliest created node.
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, leaf)| leaf.best.is_some())
            .max_by(|(_, a), (_, b)| {
                let ga = a.best.as_ref().map_or(f64::NEG_INFINITY, |c| c.gain);
                let gb = b.best.as_ref().map_or(f64::NEG_INFINITY, |c| c.gain);
                ga.total_cmp(&gb).then(b.node.cmp(&a.node))
            })
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let leaf = open.swap_remove(i);
        let split = leaf.best.clone().expect("picked leaf has a split");

        let col = x.column(split.feature);
        for &r in &leaf.rows {
            goes_left[r] = split.condition.goes_left(col[r]);
        }
        let partition = |list: &[usize]| -> (Vec<usize>, Vec<usize>) {
            list.iter().partition(|&&r| goes_left[r])
        };
        let (left_rows, right_rows) = partition(&leaf.rows);
        let mut left_sorted = Vec::with_capacity(leaf.sorted.len());
        let mut right_sorted = Vec::with_capacity(leaf.sorted.len());
        for s in &leaf.sorted {
            match s {
                Some(list) => {
                    let (l, r) = partition(list);
                    left_sorted.push(Some(l));
                    right_sorted.push(Some(r));
                }
                None => {
                    left_sorted.push(None);
                    right_sorted.push(None);
                }
            }
        }

        let mut path_features = leaf.path_features.clone();
        if matches!(x.kinds()[split.feature], FeatureKind::Numeric) && !path_features.contains(&split.feature) {
            path_features.push(split.feature);
            path_features.sort_unstable();
        }

        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes.push(placeholder());
        nodes.push(placeholder());
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            condition: split.condition,
            gain: split.gain,
            left: left_id,
            right: right_id,
        };
        n_leaves += 1;

        for (node, child_rows, child_sorted) in [
            (left_id, left_rows, left_sorted),
            (right_id, right_rows, right_sorted),
        ] {
            let (gs, hs) = sums(&child_rows, g, &h);
            let mut child = OpenLeaf {
                node,
                depth: leaf.depth + 1,
                rows: child_rows,
                sorted: child_sorted,
                g_sum: gs,
                h_sum: hs,
                path_features: path_features.clone(),
                best: None,
            };
            child.best = best_split(x, g, &h, &child, params);
            open.push(child);
        }
    }
    closed.extend(open);

    for leaf in closed {
        nodes[leaf.node] = finish_leaf(x, g, &h, &leaf, params)?;
    }
    Ok(Tree::from_nodes(nodes))
}

fn placeholder() -> Node {
    Node::Leaf {
        weight: 0.0,
        linear: None,
    }
}

fn sums(rows: &[usize], g: &[f64], h: &[f64]) -> (f64, f64) {
    rows.iter().fold((0.0, 0.0), |(gs, hs), &r| (gs + g[r], hs + h[r]))
}

fn finish_leaf(x: &FeatureMatrix, g: &[f64], h: &[f64], leaf: &OpenLeaf, params: &TreeParams) -> Result<Node> {
    let weight = leaf_weight(leaf.g_sum, leaf.h_sum, params.lambda)?;
    if params.linear_leaves && !leaf.path_features.is_empty() {
        let fit = fit_linear_leaf(
            x,
            &leaf.rows,
            g,
            h,
            &leaf.path_features,
            params.lambda,
            params.linear_ridge,
        )?;
        if let Some(linear) = fit.into_linear_leaf() {
            return Ok(Node::Leaf {
                weight,
                linear: Some(linear),
            });
        }
        log::debug!("linear leaf fell back to a constant ({} rows)", leaf.rows.len());
    }
    Ok(Node::Leaf {
        weight,
        linear: None,
    })
}

fn best_split(x: &FeatureMatrix, g: &[f64], h: &[f64], leaf: &OpenLeaf, params: &TreeParams) -> Option<Candidate> {
    let n = leaf.rows.len();
    if leaf.depth >= params.max_depth || n < 2 * params.min_leaf_count {
        return None;
    }
    let lambda = params.lambda;
    let parent_score = leaf.g_sum * leaf.g_sum / (leaf.h_sum + lambda);
    let min_gain = RELATIVE_GAIN_EPS * parent_score.max(1.0);
    let mut best: Option<Candidate> = None;
    let mut consider = |cand: Candidate| {
        if cand.gain > min_gain && best.as_ref().is_none_or(|b| cand.gain > b.gain) {
            best = Some(cand);
        }
    };

    for (f, kind) in x.kinds().iter().enumerate() {
        let col = x.column(f);
        match kind {
            FeatureKind::Numeric => {
                let sorted = leaf.sorted[f].as_ref().expect("numeric features are presorted");
                let (mut gl, mut hl) = (0.0, 0.0);
                for i in 0..n - 1 {
                    let r = sorted[i];
                    gl += g[r];
                    hl += h[r];
                    let (v, next) = (col[r], col[sorted[i + 1]]);
                    let n_left = i + 1;
                    if v == next || n_left < params.min_leaf_count {
                        continue;
                    }
                    if n - n_left < params.min_leaf_count {
                        break;
                    }
                    let gain = split_gain(gl, hl, leaf.g_sum - gl, leaf.h_sum - hl, lambda);
                    let mid = 0.5 * (v + next);
                    let threshold = if mid < next { mid } else { v };
                    consider(Candidate {
                        feature: f,
                        condition: SplitCondition::Threshold(threshold),
                        gain,
                    });
                }
            }
            FeatureKind::Categorical { .. } => {
                let mut stats: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
                for &r in &leaf.rows {
                    let e = stats.entry(col[r] as u32).or_insert((0.0, 0.0, 0));
                    e.0 += g[r];
                    e.1 += h[r];
                    e.2 += 1;
                }
                if stats.len() < 2 {
                    continue;
                }
                let mut order: Vec<(u32, f64, f64, usize)> =
                    stats.into_iter().map(|(c, (gs, hs, k))| (c, gs, hs, k)).collect();
                order.sort_by(|a, b| {
                    (a.1 / a.2)
                        .partial_cmp(&(b.1 / b.2))
                        .unwrap_or(Ordering::Equal)
                        .then(a.0.cmp(&b.0))
                });
                let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
                for k in 0..order.len() - 1 {
                    gl += order[k].1;
                    hl += order[k].2;
                    nl += order[k].3;
                    if nl < params.min_leaf_count || n - nl < params.min_leaf_count {
                        continue;
                    }
                    let gain = split_gain(gl, hl, leaf.g_sum - gl, leaf.h_sum - hl, lambda);
                    let mut codes: Vec<u32> = order[..=k].iter().map(|o| o.0).collect();
                    codes.sort_unstable();
                    consider(Candidate {
                        feature: f,
                        condition: SplitCondition::Codes(codes),
                        gain,
                    });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::Node;

    fn params(depth: usize, min_leaf: usize, lambda: f64) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_leaf_count: min_leaf,
            lambda,
            ..TreeParams::default()
        }
    }

    fn numeric(cols: Vec<Vec<f64>>) -> FeatureMatrix {
        let n = cols[0].len();
        let kinds = vec![FeatureKind::Numeric; cols.len()];
        FeatureMatrix::new(n, cols, kinds).unwrap()
    }

    #[test]
    fn zero_gradient_gives_single_zero_leaf() {
        let x = numeric(vec![vec![1.0, 2.0, 3.0, 4.0]]);
        let grad = GradHess::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        let tree = grow_tree(&x, &[0, 1, 2, 3], &grad, &params(3, 1, 1.0)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict(&x), vec![0.0; 4]);
    }

    #[test]
    fn perfect_separation_of_two_rows() {
        let x = numeric(vec![vec![0.0, 1.0]]);
        let grad = GradHess::new(vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let tree = grow_tree(&x, &[0, 1], &grad, &params(3, 1, 0.0)).unwrap();
        match tree.root() {
            Node::Split { condition, .. } => assert_eq!(*condition, SplitCondition::Threshold(0.5)),
            other => panic!("expected a split, got {other:?}"),
        }
        assert_eq!(tree.predict(&x), vec![1.0, -1.0]);
    }

    #[test]
    fn depth_zero_is_global_newton_step() {
        let x = numeric(vec![vec![0.0, 1.0, 2.0]]);
        let grad = GradHess::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 2.0]).unwrap();
        let tree = grow_tree(&x, &[0, 1, 2], &grad, &params(0, 1, 1.0)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict_row(&x, 0), -6.0 / 5.0);
    }

    #[test]
    fn min_leaf_count_is_respected() {
        let x = numeric(vec![(0..10).map(f64::from).collect()]);
        let g: Vec<f64> = (0..10).map(|i| if i == 0 { -10.0 } else { 1.0 }).collect();
        let grad = GradHess::new(g, vec![1.0; 10]).unwrap();
        let rows: Vec<usize> = (0..10).collect();
        let tree = grow_tree(&x, &rows, &grad, &params(4, 3, 0.0)).unwrap();
        let preds = tree.predict(&x);
        // every leaf must hold at least 3 rows
        let mut counts = BTreeMap::new();
        for r in 0..10 {
            *counts.entry(tree.leaf_index(&x, r)).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 3), "{counts:?} {preds:?}");
    }

    #[test]
    fn categorical_split_groups_codes_by_gradient_ratio() {
        let codes = vec![0.0, 1.0, 2.0, 0.0, 1.0, 2.0];
        let x = FeatureMatrix::new(6, vec![codes], vec![FeatureKind::Categorical { cardinality: 4 }]).unwrap();
        let g = vec![-1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
        let grad = GradHess::new(g, vec![1.0; 6]).unwrap();
        let tree = grow_tree(&x, &(0..6).collect::<Vec<_>>(), &grad, &params(1, 1, 0.0)).unwrap();
        match tree.root() {
            Node::Split { condition, .. } => assert_eq!(*condition, SplitCondition::Codes(vec![0, 2])),
            other => panic!("expected a split, got {other:?}"),
        }
        // unseen (reserved) code goes right
        let unseen = FeatureMatrix::new(1, vec![vec![3.0]], vec![FeatureKind::Categorical { cardinality: 4 }]).unwrap();
        assert_eq!(tree.predict_row(&unseen, 0), -1.0);
    }

    #[test]
    fn max_leaves_limits_best_first_growth() {
        let x = numeric(vec![(0..32).map(f64::from).collect()]);
        let g: Vec<f64> = (0..32).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let grad = GradHess::new(g, vec![1.0; 32]).unwrap();
        let p = TreeParams {
            max_leaves: 4,
            ..params(6, 1, 0.0)
        };
        let tree = grow_tree(&x, &(0..32).collect::<Vec<_>>(), &grad, &p).unwrap();
        assert!(tree.n_leaves() <= 4);
    }
}
