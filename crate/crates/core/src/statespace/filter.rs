//! Gaussian-mixture Kalman filter for the linearised model.
//!
//! Each step mixes `J` Gaussian measurement updates, one per mixture
//! component, weighted by their posterior probabilities. The recursion is
//! algebraically identical to the one-step-ahead form
//! `h_{t+1|t} = phi0 + phi1 h_{t|t-1} + sum_j pi_{j,t} K_{j,t} eps_{j,t}` with
//! `K_{j,t} = phi1 P_{t|t-1} / Sigma_{j,t}`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::models::{DiscreteParams, MixtureSpec};
use crate::simulate::fmt17;

use super::density::LN_2PI;
use super::linearize::LinearizedSeries;

/// Initial predictive moments of the first log-variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatePrior {
    pub mean: f64,
    pub variance: f64,
}

impl StatePrior {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::domain("prior mean", "must be finite"));
        }
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::domain(
                "prior variance",
                format!("must be finite and >= 0, got {variance}"),
            ));
        }
        Ok(Self { mean, variance })
    }

    /// Mean of `y - offset` less the mixture mean, and the variance of `y - offset`.
    pub fn from_series(series: &LinearizedSeries, mix: &MixtureSpec) -> Self {
        Self::from_parts(&series.y, series.log_level(), series.gamma(), mix)
    }

    pub(crate) fn from_parts(
        y: &[f64],
        log_level: Option<&[f64]>,
        gamma: f64,
        mix: &MixtureSpec,
    ) -> Self {
        let n = y.len().max(1) as f64;
        let adjusted = |i: usize| y[i] - log_level.map_or(0.0, |l| 2.0 * gamma * l[i]);
        let mean = (0..y.len()).map(adjusted).sum::<f64>() / n;
        let var = (0..y.len())
            .map(|i| (adjusted(i) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        Self {
            mean: mean - mix.mean(),
            variance: var,
        }
    }
}

/// Per-step moments, per-component quantities and the log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub h_pred: Vec<f64>,
    pub p_pred: Vec<f64>,
    pub h_filt: Vec<f64>,
    pub p_filt: Vec<f64>,
    pub loglik_steps: Vec<f64>,
    pub components: usize,
    innovations: Vec<f64>,
    innovation_vars: Vec<f64>,
    gains: Vec<f64>,
    weights: Vec<f64>,
    pub loglik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.h_pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_pred.is_empty()
    }

    fn row<'a>(&self, data: &'a [f64], i: usize) -> &'a [f64] {
        &data[i * self.components..(i + 1) * self.components]
    }

    /// `eps_{j,i}` for all components at step `i`.
    pub fn innovations(&self, i: usize) -> &[f64] {
        self.row(&self.innovations, i)
    }

    /// `Sigma_{j,i}` for all components at step `i`.
    pub fn innovation_variances(&self, i: usize) -> &[f64] {
        self.row(&self.innovation_vars, i)
    }

    /// `K_{j,i} = phi1 P_{i|i-1} / Sigma_{j,i}`.
    pub fn gains(&self, i: usize) -> &[f64] {
        self.row(&self.gains, i)
    }

    /// Posterior component probabilities at step `i`.
    pub fn weights(&self, i: usize) -> &[f64] {
        self.row(&self.weights, i)
    }

    /// Writes `i,h_pred,P_pred,h_filt,P_filt,loglik_step`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,h_pred,P_pred,h_filt,P_filt,loglik_step")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{i},{},{},{},{},{}",
                fmt17(self.h_pred[i]),
                fmt17(self.p_pred[i]),
                fmt17(self.h_filt[i]),
                fmt17(self.p_filt[i]),
                fmt17(self.loglik_steps[i])
            )?;
        }
        Ok(())
    }
}

/// Filtered volatility `exp(h_{t|t})`.
pub fn volatility_estimate(filter: &FilterOutput) -> Vec<f64> {
    filter.h_filt.iter().map(|h| h.exp()).collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ComponentState {
    pub innovation: f64,
    pub variance: f64,
    pub gain: f64,
    pub weight: f64,
}

pub(crate) struct StepState<'a> {
    pub h_pred: f64,
    pub p_pred: f64,
    pub h_filt: f64,
    pub p_filt: f64,
    pub loglik: f64,
    pub components: &'a [ComponentState],
}

pub(crate) trait Recorder {
    fn record(&mut self, step: &StepState<'_>);
}

impl Recorder for () {
    #[inline(always)]
    fn record(&mut self, _: &StepState<'_>) {}
}

struct FullRecorder(FilterOutput);

impl Recorder for FullRecorder {
    fn record(&mut self, s: &StepState<'_>) {
        let out = &mut self.0;
        out.h_pred.push(s.h_pred);
        out.p_pred.push(s.p_pred);
        out.h_filt.push(s.h_filt);
        out.p_filt.push(s.p_filt);
        out.loglik_steps.push(s.loglik);
        for c in s.components {
            out.innovations.push(c.innovation);
            out.innovation_vars.push(c.variance);
            out.gains.push(c.gain);
            out.weights.push(c.weight);
        }
    }
}

impl FullRecorder {
    fn new(n: usize, j: usize) -> Self {
        let v = || Vec::with_capacity(n);
        let w = || Vec::with_capacity(n * j);
        Self(FilterOutput {
            h_pred: v(),
            p_pred: v(),
            h_filt: v(),
            p_filt: v(),
            loglik_steps: v(),
            components: j,
            innovations: w(),
            innovation_vars: w(),
            gains: w(),
            weights: w(),
            loglik: 0.0,
        })
    }
}

/// Observations plus the level regressor `coef * log r_i`.
#[derive(Clone, Copy)]
pub(crate) struct Observations<'a> {
    pub y: &'a [f64],
    pub log_level: Option<&'a [f64]>,
    pub gamma: f64,
}

impl<'a> Observations<'a> {
    pub fn of(series: &'a LinearizedSeries) -> Self {
        Self {
            y: &series.y,
            log_level: series.log_level(),
            gamma: series.gamma(),
        }
    }

    #[inline]
    fn offset(&self, i: usize) -> f64 {
        match self.log_level {
            Some(l) => 2.0 * self.gamma * l[i],
            None => 0.0,
        }
    }
}

/// State transition applied to the filtered moments.
#[derive(Clone, Copy)]
pub(crate) enum Transition<'a> {
    Linear,
    /// Leverage correction driven by the drift residuals `e_i`.
    Leverage {
        rho: f64,
        residuals: &'a [f64],
    },
}

pub(crate) fn run_filter<R: Recorder>(
    obs: Observations<'_>,
    params: &DiscreteParams,
    mix: &MixtureSpec,
    prior: StatePrior,
    transition: Transition<'_>,
    recorder: &mut R,
) -> Result<f64> {
    let (phi0, phi1, sigma_w2) = (params.phi0, params.phi1(), params.sigma_w2);
    if !phi0.is_finite() || !phi1.is_finite() || !(sigma_w2 >= 0.0) || !sigma_w2.is_finite() {
        return Err(Error::domain(
            "filter parameters",
            format!("phi0 = {phi0}, phi1 = {phi1}, sigma_w2 = {sigma_w2}"),
        ));
    }
    let sigma_w = sigma_w2.sqrt();
    let j = mix.len();
    let weights = mix.weights();
    let ln_weights: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let means = mix.means();
    let noise = mix.variances();
    let mut comps = vec![ComponentState::default(); j];

    let (mut h_pred, mut p_pred) = (prior.mean, prior.variance);
    let mut total = 0.0;
    for i in 0..obs.y.len() {
        let base = obs.y[i] - h_pred - obs.offset(i);
        // Densities up to the common factor (2 pi)^{-1/2}; log space only if they all underflow.
        let mut mass = 0.0;
        for (k, c) in comps.iter_mut().enumerate() {
            let variance = p_pred + noise[k];
            if !(variance > 0.0) || !variance.is_finite() {
                return Err(Error::Degenerate {
                    step: i,
                    detail: format!("innovation variance {variance} in component {k}"),
                });
            }
            let innovation = base - means[k];
            let density =
                weights[k] * (-0.5 * innovation * innovation / variance).exp() / variance.sqrt();
            *c = ComponentState {
                innovation,
                variance,
                gain: phi1 * p_pred / variance,
                weight: density,
            };
            mass += density;
        }
        let loglik = if mass > 1e-280 && mass.is_finite() {
            mass.ln() - 0.5 * LN_2PI
        } else {
            let mut top = f64::NEG_INFINITY;
            for (k, c) in comps.iter_mut().enumerate() {
                c.weight = ln_weights[k]
                    - 0.5 * (LN_2PI + c.variance.ln() + c.innovation * c.innovation / c.variance);
                top = top.max(c.weight);
            }
            if !top.is_finite() {
                return Err(Error::Degenerate {
                    step: i,
                    detail: "predictive density underflowed".into(),
                });
            }
            mass = 0.0;
            for c in comps.iter_mut() {
                c.weight = (c.weight - top).exp();
                mass += c.weight;
            }
            top + mass.ln()
        };
        let (mut shift, mut p_filt) = (0.0, 0.0);
        for (k, c) in comps.iter_mut().enumerate() {
            c.weight /= mass;
            let ratio = p_pred / c.variance;
            shift += c.weight * ratio * c.innovation;
            p_filt += c.weight * ratio * noise[k];
        }
        let h_filt = h_pred + shift;
        recorder.record(&StepState {
            h_pred,
            p_pred,
            h_filt,
            p_filt,
            loglik,
            components: &comps,
        });
        total += loglik;

        (h_pred, p_pred) = match transition {
            Transition::Linear => (phi0 + phi1 * h_filt, phi1 * phi1 * p_filt + sigma_w2),
            Transition::Leverage { rho, residuals } => {
                if rho == 0.0 {
                    (phi0 + phi1 * h_filt, phi1 * phi1 * p_filt + sigma_w2)
                } else {
                    let scaled =
                        (-0.5 * h_filt - obs.gamma * obs.log_level.map_or(0.0, |l| l[i])).exp();
                    let push = rho * sigma_w * residuals[i] * scaled;
                    let slope = phi1 - 0.5 * push;
                    (
                        phi0 + phi1 * h_filt + push,
                        slope * slope * p_filt + sigma_w2 * (1.0 - rho * rho),
                    )
                }
            }
        };
        if !h_pred.is_finite() || !p_pred.is_finite() {
            return Err(Error::Degenerate {
                step: i + 1,
                detail: format!("predicted moments ({h_pred}, {p_pred})"),
            });
        }
    }
    Ok(total)
}

/// Mixture Kalman filter over `series` with its current level exponent.
pub fn kf_filter(
    series: &LinearizedSeries,
    params: &DiscreteParams,
    mix: &MixtureSpec,
    prior: StatePrior,
) -> Result<FilterOutput> {
    let mut rec = FullRecorder::new(series.len(), mix.len());
    let loglik = run_filter(
        Observations::of(series),
        params,
        mix,
        prior,
        Transition::Linear,
        &mut rec,
    )?;
    rec.0.loglik = loglik;
    Ok(rec.0)
}

/// Log-likelihood only; no per-step storage.
pub fn kf_loglik(
    series: &LinearizedSeries,
    params: &DiscreteParams,
    mix: &MixtureSpec,
    prior: StatePrior,
) -> Result<f64> {
    run_filter(
        Observations::of(series),
        params,
        mix,
        prior,
        Transition::Linear,
        &mut (),
    )
}

/// Time-varying filter for correlated level and volatility shocks.
///
/// The prediction step uses
/// `h_{i+1|i} = phi0 + phi1 h + rho sigma_w e_i exp(-h/2) r_i^-gamma` evaluated at
/// `h = h_{i|i}`, with variance `g^2 P_{i|i} + sigma_w^2 (1 - rho^2)` where `g` is the
/// derivative of that map.
pub fn kf_corr_filter(
    series: &LinearizedSeries,
    params: &DiscreteParams,
    rho: f64,
    mix: &MixtureSpec,
    prior: StatePrior,
) -> Result<FilterOutput> {
    check_rho(rho)?;
    let mut rec = FullRecorder::new(series.len(), mix.len());
    let transition = Transition::Leverage {
        rho,
        residuals: &series.residuals,
    };
    let loglik = run_filter(
        Observations::of(series),
        params,
        mix,
        prior,
        transition,
        &mut rec,
    )?;
    rec.0.loglik = loglik;
    Ok(rec.0)
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(rho.abs() < 1.0) {
        return Err(Error::domain(
            "rho_corr",
            format!("must satisfy |rho| < 1, got {rho}"),
        ));
    }
    Ok(())
}

/// Slope of the leverage-corrected transition at `h`.
pub fn leverage_slope(
    phi1: f64,
    sigma_w: f64,
    rho: f64,
    residual: f64,
    h: f64,
    level_factor: f64,
) -> f64 {
    if rho == 0.0 {
        return phi1;
    }
    phi1 - 0.5 * rho * sigma_w * residual * (-0.5 * h).exp() * level_factor
}
