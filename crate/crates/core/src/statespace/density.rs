//! Observation-error densities for the linearised model.

use std::f64::consts::PI;

use crate::models::MixtureSpec;

/// `ln(2 pi)`.
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Mean of `log chi^2_1`, `digamma(1) - ln 2`.
pub const LOGCHI2_MEAN: f64 = -1.270_362_845_461_478_2;

/// Variance of `log chi^2_1`, `pi^2 / 2`.
pub const LOGCHI2_VARIANCE: f64 = PI * PI / 2.0;

/// Log density of `log(z^2)` for standard normal `z`.
#[inline]
pub fn logchi2_ln_pdf(x: f64) -> f64 {
    -0.5 * LN_2PI - 0.5 * (x.exp() - x)
}

/// Density of `log(z^2)` for standard normal `z`.
#[inline]
pub fn logchi2_pdf(x: f64) -> f64 {
    logchi2_ln_pdf(x).exp()
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + variance.ln() + d * d / variance)
}

#[inline]
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    normal_ln_pdf(x, mean, variance).exp()
}

/// `sum_j w_j N(x; mu_j, s_j^2)`.
pub fn mixture_pdf(mix: &MixtureSpec, x: f64) -> f64 {
    mix.weights()
        .iter()
        .zip(mix.means().iter().zip(mix.variances()))
        .map(|(w, (m, v))| w * normal_pdf(x, *m, *v))
        .sum()
}

/// Density of the observation error `y - h` used by the particle filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationDensity {
    LogChiSquared,
    Gaussian { mean: f64, variance: f64 },
}

impl ObservationDensity {
    /// Gaussian with the first two moments of `log chi^2_1`.
    pub fn moment_matched_gaussian() -> Self {
        Self::Gaussian {
            mean: LOGCHI2_MEAN,
            variance: LOGCHI2_VARIANCE,
        }
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::LogChiSquared => logchi2_ln_pdf(x),
            Self::Gaussian { mean, variance } => normal_ln_pdf(x, mean, variance),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::LogChiSquared => LOGCHI2_MEAN,
            Self::Gaussian { mean, .. } => mean,
        }
    }
}

/// Composite Simpson rule on `[a, b]` with `2 * half_panels` subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, half_panels: usize) -> f64 {
    let n = 2 * half_panels.max(1);
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}
