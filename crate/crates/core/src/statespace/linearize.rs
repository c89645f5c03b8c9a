//! Drift regression residuals and their log-square transform.

use crate::error::{Error, Result};
use crate::simulate::Path;

pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Least-squares fit of the discretised linear drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFit {
    pub alpha: f64,
    pub beta: f64,
    /// `e_i = [r_{i+1} - alpha dt - (1 - beta dt) r_i] / sqrt(dt)`, one per step.
    pub residuals: Vec<f64>,
}

/// Regresses `(r_{i+1} - r_i) / dt` on `(1, r_i)`.
pub fn ols_drift_residuals(path: &Path) -> Result<DriftFit> {
    ols_drift_from(&path.r, path.delta)
}

pub(crate) fn ols_drift_from(r: &[f64], delta: f64) -> Result<DriftFit> {
    let n = r.len().saturating_sub(1);
    let u: Vec<f64> = r.windows(2).map(|w| (w[1] - w[0]) / delta).collect();
    ols_drift_on(&r[..n], &u, delta)
}

/// Regresses responses `u` on `(1, levels)` and scales the residuals by `sqrt(dt)`.
pub fn ols_drift_on(levels: &[f64], u: &[f64], delta: f64) -> Result<DriftFit> {
    let n = u.len();
    if n < 3 {
        return Err(Error::Length(format!(
            "drift regression needs at least 3 steps, got {n}"
        )));
    }
    if levels.len() != n {
        return Err(Error::Length(format!(
            "{} levels for {n} responses",
            levels.len()
        )));
    }
    let nf = n as f64;
    let mean_x = levels.iter().sum::<f64>() / nf;
    let mean_u = u.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxu, mut scale) = (0.0, 0.0, 0.0);
    for (x, ui) in levels.iter().zip(u) {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxu += dx * (ui - mean_u);
        scale += x * x;
    }
    if !(sxx > 64.0 * f64::EPSILON * scale) {
        return Err(Error::Rank("the lagged level has no variation".into()));
    }
    let slope = sxu / sxx;
    let intercept = mean_u - slope * mean_x;
    let root_dt = delta.sqrt();
    let residuals = levels
        .iter()
        .zip(u)
        .map(|(x, ui)| (ui - intercept - slope * x) * root_dt)
        .collect();
    Ok(DriftFit {
        alpha: intercept,
        beta: -slope,
        residuals,
    })
}

/// Log-squared residuals with an optional level regressor `log r_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSeries {
    pub y: Vec<f64>,
    /// `2 gamma log r_i` at the left point of each step; zeros without a level effect.
    pub level_offset: Vec<f64>,
    pub residuals: Vec<f64>,
    pub floor_count: usize,
    log_level: Option<Vec<f64>>,
    gamma: f64,
}

/// `y_i = log max(e_i^2, floor)`.
pub fn log_square_transform(residuals: &[f64], floor: f64) -> Result<LinearizedSeries> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(Error::domain(
            "floor",
            format!("must be finite and > 0, got {floor}"),
        ));
    }
    let mut floor_count = 0;
    let y = residuals
        .iter()
        .map(|e| {
            let sq = e * e;
            if sq < floor || !sq.is_finite() {
                floor_count += 1;
                floor.ln()
            } else {
                sq.ln()
            }
        })
        .collect();
    Ok(LinearizedSeries {
        y,
        level_offset: vec![0.0; residuals.len()],
        residuals: residuals.to_vec(),
        floor_count,
        log_level: None,
        gamma: 0.0,
    })
}

impl LinearizedSeries {
    /// Attaches the lagged levels `r_0..r_{n-1}`; all must be positive.
    pub fn with_level(mut self, levels: &[f64], gamma: f64) -> Result<Self> {
        if levels.len() < self.y.len() {
            return Err(Error::Length(format!(
                "{} levels for {} observations",
                levels.len(),
                self.y.len()
            )));
        }
        let log_level = levels[..self.y.len()]
            .iter()
            .enumerate()
            .map(|(i, r)| {
                if *r > 0.0 {
                    Ok(r.ln())
                } else {
                    Err(Error::domain(
                        "r",
                        format!("level effect needs r > 0, got {r} at step {i}"),
                    ))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        self.log_level = Some(log_level);
        self.set_gamma(gamma);
        Ok(self)
    }

    /// Recomputes the offsets for a new level exponent.
    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
        match &self.log_level {
            Some(logs) => self
                .level_offset
                .iter_mut()
                .zip(logs)
                .for_each(|(o, l)| *o = 2.0 * gamma * l),
            None => self.level_offset.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn log_level(&self) -> Option<&[f64]> {
        self.log_level.as_deref()
    }

    pub fn has_level(&self) -> bool {
        self.log_level.is_some()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Residuals, log-squares and (for level-effect models) lagged levels of a path.
pub fn linearize_path(
    path: &Path,
    level_effect: bool,
    gamma: f64,
) -> Result<(DriftFit, LinearizedSeries)> {
    let fit = ols_drift_residuals(path)?;
    let series = log_square_transform(&fit.residuals, DEFAULT_FLOOR)?;
    let series = if level_effect {
        series.with_level(&path.r, gamma)?
    } else {
        series
    };
    Ok((fit, series))
}
