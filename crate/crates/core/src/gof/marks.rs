//! Residual marks for the drift and volatility tests.

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::simulate::Path;

/// Difference quotients `u_i = (r_{i+1} - r_i) / dt`.
pub fn difference_quotients(path: &Path) -> Vec<f64> {
    path.r
        .windows(2)
        .map(|w| (w[1] - w[0]) / path.delta)
        .collect()
}

/// `u_i - m1(r_i)`: the drift residual at each step.
pub fn drift_marks(path: &Path, spec: &ModelSpec, theta: &ParamVector) -> Result<Vec<f64>> {
    drift_marks_from(&path.r, &difference_quotients(path), spec, theta)
}

/// Drift marks for arbitrary responses `u` at the lagged levels `r`.
pub fn drift_marks_from(
    r: &[f64],
    u: &[f64],
    spec: &ModelSpec,
    theta: &ParamVector,
) -> Result<Vec<f64>> {
    if r.len() < u.len() {
        return Err(Error::Length(format!(
            "{} levels for {} responses",
            r.len(),
            u.len()
        )));
    }
    u.iter()
        .zip(r)
        .map(|(u, r)| Ok(u - spec.drift(theta, *r)?))
        .collect()
}

/// `(u_i - m1(r_i))^2 - sigma2_i nu1(r_i)^2 / dt`.
pub fn vol_marks(
    path: &Path,
    spec: &ModelSpec,
    theta: &ParamVector,
    sigma2: &[f64],
) -> Result<Vec<f64>> {
    let u = difference_quotients(path);
    if sigma2.len() != u.len() {
        return Err(Error::Length(format!(
            "{} volatility estimates for {} steps",
            sigma2.len(),
            u.len()
        )));
    }
    let squares = drift_marks_from(&path.r, &u, spec, theta)?
        .iter()
        .map(|d| d * d * path.delta)
        .collect::<Vec<_>>();
    vol_marks_from_squares(&path.r, &squares, sigma2, spec, theta, path.delta)
}

/// Volatility marks from scaled squared residuals `e_i^2 = dt (u_i - m1(r_i))^2`.
pub fn vol_marks_from_squares(
    r: &[f64],
    squares: &[f64],
    sigma2: &[f64],
    spec: &ModelSpec,
    theta: &ParamVector,
    delta: f64,
) -> Result<Vec<f64>> {
    let n = squares.len();
    if sigma2.len() != n || r.len() < n {
        return Err(Error::Length(format!(
            "{} squares, {} volatility estimates, {} levels",
            n,
            sigma2.len(),
            r.len()
        )));
    }
    (0..n)
        .map(|i| {
            if !(sigma2[i] > 0.0) {
                return Err(Error::domain(
                    "sigma2",
                    format!("must be > 0, got {} at step {i}", sigma2[i]),
                ));
            }
            let scale = spec.nu1(theta, r[i])?;
            Ok((squares[i] - sigma2[i] * scale * scale) / delta)
        })
        .collect()
}
