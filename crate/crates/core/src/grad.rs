//! Loss definitions and the central finite-difference oracle that certifies
//! the analytic derivatives of the target models and the tree-net.

use crate::{Error, Result};

/// Default probe step for [`finite_diff_check`].
pub const DEFAULT_EPS: f64 = 1e-5;

/// Relative errors use `max(|analytic|, |numeric|, RELATIVE_FLOOR)` as the
/// denominator.
pub const RELATIVE_FLOOR: f64 = 1e-8;

/// Assumed rounding error of one loss evaluation, in units of the loss's
/// last place. Recursive losses accumulate error over many steps.
const NOISE_ULPS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Mse,
}

/// Mean squared error over rows where `mask` is true.
pub fn mse(fitted: &[f64], y: &[f64], mask: &[bool]) -> Result<f64> {
    if fitted.len() != y.len() || y.len() != mask.len() {
        return Err(Error::InvalidArgument(format!(
            "mse inputs have lengths {}, {}, {}",
            fitted.len(),
            y.len(),
            mask.len()
        )));
    }
    let mut sse = 0.0;
    let mut n = 0usize;
    for ((f, y), &m) in fitted.iter().zip(y).zip(mask) {
        if m {
            sse += (f - y) * (f - y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyLoss);
    }
    Ok(sse / n as f64)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("finite-difference step {eps} outside [1e-7, 1e-3]")));
    }
    Ok(())
}

fn probe<F>(f: &mut F, theta: &mut [f64], j: usize, delta: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let orig = theta[j];
    theta[j] = orig + delta;
    let v = f(theta);
    theta[j] = orig;
    let v = v?;
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "loss during finite-difference probing".into(),
            index: j,
        });
    }
    Ok(v)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central-difference gradient of `f` at `theta`.
pub fn numeric_gradient<F>(f: F, theta: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    Ok(central_differences(f, theta, eps)?.into_iter().map(|(d, _)| d).collect())
}

/// Difference quotients paired with the rounding noise of each quotient.
fn central_differences<F>(mut f: F, theta: &[f64], eps: f64) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_eps(eps)?;
    let mut t = theta.to_vec();
    (0..t.len())
        .map(|j| {
            let plus = probe(&mut f, &mut t, j, eps)?;
            let minus = probe(&mut f, &mut t, j, -eps)?;
            let noise = NOISE_ULPS * f64::EPSILON * plus.abs().max(minus.abs()) / (2.0 * eps);
            Ok(((plus - minus) / (2.0 * eps), noise))
        })
        .collect()
}

/// Worst relative error between `analytic` and the central-difference
/// gradient of `f` at `theta`. Discrepancies smaller than the rounding noise
/// of the difference quotient count as agreement.
pub fn finite_diff_check<F>(f: F, theta: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if analytic.len() != theta.len() {
        return Err(Error::InvalidArgument(format!(
            "analytic gradient has {} entries for {} parameters",
            analytic.len(),
            theta.len()
        )));
    }
    let numeric = central_differences(f, theta, eps)?;
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &(n, noise))| if (a - n).abs() <= noise { 0.0 } else { relative_error(a, n) })
        .fold(0.0, f64::max))
}

/// Worst relative error between an analytic Hessian diagonal and the
/// second central difference `(f(θ+ε) − 2f(θ) + f(θ−ε)) / ε²`.
pub fn hessian_diag_check<F>(mut f: F, theta: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_eps(eps)?;
    if analytic.len() != theta.len() {
        return Err(Error::InvalidArgument("hessian length mismatch".into()));
    }
    let mut t = theta.to_vec();
    let centre = probe(&mut f, &mut t, 0, 0.0)?;
    let mut worst = 0.0f64;
    for j in 0..t.len() {
        let plus = probe(&mut f, &mut t, j, eps)?;
        let minus = probe(&mut f, &mut t, j, -eps)?;
        let numeric = (plus - 2.0 * centre + minus) / (eps * eps);
        // differences below the rounding noise of the second difference
        // count as exact
        let scale = centre.abs().max(plus.abs()).max(minus.abs());
        let noise = NOISE_ULPS * f64::EPSILON * scale / (eps * eps);
        let diff = (analytic[j] - numeric).abs();
        let err = if diff <= noise {
            0.0
        } else {
            diff / analytic[j].abs().max(numeric.abs()).max(RELATIVE_FLOOR)
        };
        worst = worst.max(err);
    }
    Ok(worst)
}
