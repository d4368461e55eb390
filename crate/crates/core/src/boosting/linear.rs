use nalgebra::{DMatrix, DVector};

use super::tree::LinearLeaf;
use super::{leaf_weight, FeatureMatrix, HESSIAN_FLOOR};
use crate::Result;

/// Result of a leaf-local weighted ridge fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub features: Vec<usize>,
    pub coefficients: Vec<f64>,
    /// The normal equations were singular and the leaf is a constant.
    pub fallback: bool,
}

impl LinearFit {
    pub fn into_linear_leaf(self) -> Option<LinearLeaf> {
        if self.fallback {
            None
        } else {
            Some(LinearLeaf {
                intercept: self.intercept,
                features: self.features,
                coefficients: self.coefficients,
            })
        }
    }
}

/// Newton-optimal affine leaf response.
///
/// Minimises `sum_i h_i (g_i / h_i + f(x_i))^2 + lambda * b^2 + ridge * |c|^2`
/// with `f(x) = b + c . (x - x_bar)` and `x_bar` the Hessian-weighted mean of
/// the leaf. Centring decouples the two parts, so the constant term is always
/// the plain leaf weight `-G / (H + lambda)`.
pub fn fit_linear_leaf(
    x: &FeatureMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    lambda: f64,
    ridge: f64,
) -> Result<LinearFit> {
    let hf = |r: usize| h[r].max(HESSIAN_FLOOR);
    let g_sum: f64 = rows.iter().map(|&r| g[r]).sum();
    let h_sum: f64 = rows.iter().map(|&r| hf(r)).sum();
    let constant = leaf_weight(g_sum, h_sum, lambda)?;
    let fallback = LinearFit {
        intercept: constant,
        features: features.to_vec(),
        coefficients: vec![0.0; features.len()],
        fallback: true,
    };
    let k = features.len();
    if k == 0 || rows.len() < 2 {
        return Ok(fallback);
    }

    let mean: Vec<f64> = features
        .iter()
        .map(|&f| rows.iter().map(|&r| hf(r) * x.value(r, f)).sum::<f64>() / h_sum)
        .collect();
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut u = vec![0.0; k];
    for &r in rows {
        for (j, &f) in features.iter().enumerate() {
            u[j] = x.value(r, f) - mean[j];
        }
        let w = hf(r);
        for a in 0..k {
            rhs[a] -= g[r] * u[a];
            for b in 0..=a {
                gram[(a, b)] += w * u[a] * u[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            gram[(b, a)] = gram[(a, b)];
        }
        gram[(a, a)] += ridge;
    }

    let Some(chol) = gram.cholesky() else {
        return Ok(fallback);
    };
    let coef = chol.solve(&rhs);
    if coef.iter().any(|c| !c.is_finite()) {
        return Ok(fallback);
    }
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let intercept = constant - coefficients.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearFit {
        intercept,
        features: features.to_vec(),
        coefficients,
        fallback: false,
    })
}
