//! Euler-Maruyama sample paths.
//!
//! The level equation uses the left-point volatility: the increment from
//! `t_i` to `t_{i+1}` is `m1(r_i) dt + sigma_i nu1(r_i) sqrt(dt) z1`, and the
//! log-variance follows `h_{i+1} = phi0 + phi1 h_i + sigma_w z2` with
//! `corr(z1, z2) = rho_corr`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::rng::{rng_from_seed, StreamRng};

/// Fraction of reflected steps above which a run report carries a warning.
pub const REFLECTION_WARNING_RATE: f64 = 1e-3;

/// Draws one pair `(z1, z2)` of standard normals with correlation `rho`.
#[inline]
pub fn correlated_pair<R: Rng + ?Sized>(rng: &mut R, rho: f64, orth: f64) -> (f64, f64) {
    let z1: f64 = rng.sample(StandardNormal);
    let zp: f64 = rng.sample(StandardNormal);
    (z1, rho * z1 + orth * zp)
}

fn check_correlation(rho: f64) -> Result<f64> {
    if !rho.is_finite() || rho.abs() > 1.0 {
        return Err(Error::domain(
            "rho_corr",
            format!("must lie in [-1, 1], got {rho}"),
        ));
    }
    Ok((1.0 - rho * rho).sqrt())
}

/// `count` pairs of standard normal increments with correlation `rho`.
pub fn wiener_increments(count: usize, rho: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let orth = check_correlation(rho)?;
    let mut rng = rng_from_seed(seed);
    Ok((0..count)
        .map(|_| correlated_pair(&mut rng, rho, orth))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of retained steps; the path has `n + 1` points.
    pub n: usize,
    pub burn_in: usize,
    pub delta: f64,
    /// Defaults to `alpha / beta`.
    pub r0: Option<f64>,
    /// Defaults to the stationary log-variance mean, or 0 when none exists.
    pub h0: Option<f64>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, delta: f64, seed: u64) -> Self {
        Self {
            n,
            burn_in: 1000,
            delta,
            r0: None,
            h0: None,
            seed,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::domain(
                "n",
                format!("need at least 2 steps, got {}", self.n),
            ));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::domain(
                "delta",
                format!("must be finite and > 0, got {}", self.delta),
            ));
        }
        Ok(())
    }
}

/// An equispaced observed path, optionally with its latent variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub delta: f64,
    pub r: Vec<f64>,
    pub sigma2: Option<Vec<f64>>,
    pub seed: Option<u64>,
    /// Steps (including burn-in) where a non-positive state was reflected.
    pub reflections: usize,
    pub total_steps: usize,
}

impl Path {
    pub fn from_observations(r: Vec<f64>, delta: f64) -> Result<Self> {
        if r.len() < 2 {
            return Err(Error::Length(format!(
                "a path needs at least 2 points, got {}",
                r.len()
            )));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(
                "delta",
                format!("must be finite and > 0, got {delta}"),
            ));
        }
        let total_steps = r.len() - 1;
        Ok(Self {
            delta,
            r,
            sigma2: None,
            seed: None,
            reflections: 0,
            total_steps,
        })
    }

    /// Number of steps `n` (points minus one).
    pub fn steps(&self) -> usize {
        self.r.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.delta
    }

    pub fn reflection_rate(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.reflections as f64 / self.total_steps as f64
        }
    }

    pub fn reflection_warning(&self) -> Option<String> {
        (self.reflection_rate() > REFLECTION_WARNING_RATE).then(|| {
            format!(
                "{} of {} Euler steps ({:.3}%) crossed zero and were reflected",
                self.reflections,
                self.total_steps,
                100.0 * self.reflection_rate()
            )
        })
    }

    /// Writes `t,r[,sigma2]` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        match &self.sigma2 {
            Some(s2) => {
                writeln!(out, "t,r,sigma2")?;
                for (i, (r, s)) in self.r.iter().zip(s2).enumerate() {
                    writeln!(out, "{},{},{}", fmt17(self.time(i)), fmt17(*r), fmt17(*s))?;
                }
            }
            None => {
                writeln!(out, "t,r")?;
                for (i, r) in self.r.iter().enumerate() {
                    writeln!(out, "{},{}", fmt17(self.time(i)), fmt17(*r))?;
                }
            }
        }
        Ok(())
    }
}

/// Renders a float with 17 significant digits, enough for an exact round trip.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Raw Euler output before burn-in removal.
pub(crate) struct EulerOutput {
    pub r: Vec<f64>,
    pub h: Vec<f64>,
    pub reflections: usize,
}

/// Integrates the model from `(r0, h0)` with the supplied standard normal pairs.
pub(crate) fn euler_with_increments<I>(
    spec: &ModelSpec,
    theta: &ParamVector,
    delta: f64,
    r0: f64,
    h0: f64,
    increments: I,
) -> Result<EulerOutput>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let discrete = theta.discretize(delta)?;
    let (phi0, phi1) = (discrete.phi0, discrete.phi1());
    let sigma_w = discrete.sigma_w2.sqrt();
    let sqrt_dt = delta.sqrt();
    let positive = spec.requires_positive_state();

    let iter = increments.into_iter();
    let cap = iter.size_hint().0 + 1;
    let mut r = Vec::with_capacity(cap);
    let mut h = Vec::with_capacity(cap);
    r.push(r0);
    h.push(h0);
    let mut reflections = 0;

    for (step, (z1, z2)) in iter.enumerate() {
        let (ri, hi) = (r[step], h[step]);
        let sigma = (0.5 * hi).exp();
        let drift = spec.drift(theta, ri)?;
        let diffusion = spec.diffusion(theta, ri, sigma)?;
        let mut next = ri + drift * delta + diffusion * sqrt_dt * z1;
        let h_next = phi0 + phi1 * hi + sigma_w * z2;
        if !next.is_finite() || h_next.is_nan() || h_next == f64::INFINITY {
            return Err(Error::Diverged {
                step: step + 1,
                detail: format!("r = {next}, log-variance = {h_next}"),
            });
        }
        if positive && next <= 0.0 {
            next = next.abs().max(f64::MIN_POSITIVE);
            reflections += 1;
        }
        r.push(next);
        h.push(h_next);
    }
    Ok(EulerOutput { r, h, reflections })
}

/// Simulates `cfg.burn_in + cfg.n` Euler steps and keeps the last `n + 1` points.
pub fn simulate_path(spec: &ModelSpec, theta: &ParamVector, cfg: &SimConfig) -> Result<Path> {
    let mut rng = rng_from_seed(cfg.seed);
    simulate_path_with(spec, theta, cfg, &mut rng).map(|mut p| {
        p.seed = Some(cfg.seed);
        p
    })
}

/// As [`simulate_path`], drawing from an existing generator.
pub fn simulate_path_with(
    spec: &ModelSpec,
    theta: &ParamVector,
    cfg: &SimConfig,
    rng: &mut StreamRng,
) -> Result<Path> {
    cfg.validate()?;
    let theta = theta.validate(spec)?;
    let orth = check_correlation(theta.rho_or_zero())?;
    let rho = theta.rho_or_zero();
    let discrete = theta.discretize(cfg.delta)?;

    let r0 = cfg.r0.unwrap_or(if theta.beta != 0.0 {
        theta.alpha / theta.beta
    } else {
        0.0
    });
    let h0 = cfg
        .h0
        .unwrap_or_else(|| discrete.stationary_mean().unwrap_or(0.0));
    let total = cfg.burn_in + cfg.n;
    let increments = (0..total).map(|_| correlated_pair(rng, rho, orth));
    let out = euler_with_increments(spec, &theta, cfg.delta, r0, h0, increments)?;

    let keep = cfg.burn_in..;
    Ok(Path {
        delta: cfg.delta,
        r: out.r[keep.clone()].to_vec(),
        sigma2: Some(out.h[keep].iter().map(|h| h.exp()).collect()),
        seed: None,
        reflections: out.reflections,
        total_steps: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DiscreteParams, ModelFamily};

    fn ou_dgp(delta: f64) -> ParamVector {
        ParamVector::from_discrete(
            0.01,
            0.3,
            None,
            DiscreteParams::new(-0.006, 0.99, 0.0225),
            delta,
        )
        .unwrap()
    }

    #[test]
    fn increment_correlation() {
        let pairs = wiener_increments(1_000_000, 0.0, 11).unwrap();
        let n = pairs.len() as f64;
        let (m1, m2) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (m1, m2) = (m1 / n, m2 / n);
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in &pairs {
            sxy += (a - m1) * (b - m2);
            sxx += (a - m1).powi(2);
            syy += (b - m2).powi(2);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 0.005, "sample correlation {corr}");

        for (a, b) in wiener_increments(1000, 1.0, 3).unwrap() {
            assert_eq!(a, b);
        }
        assert_eq!(
            wiener_increments(50, 0.3, 9).unwrap(),
            wiener_increments(50, 0.3, 9).unwrap()
        );
        assert!(wiener_increments(5, 1.2, 9).is_err());
    }

    #[test]
    fn deterministic_single_step() {
        let theta = ParamVector::ou(0.0, 1.0, 0.0, 0.0, 0.0);
        let cfg = SimConfig {
            n: 2,
            burn_in: 0,
            delta: 0.1,
            r0: Some(1.0),
            h0: Some(f64::NEG_INFINITY),
            seed: 5,
        };
        let path = simulate_path(&ModelSpec::ou_sv(), &theta, &cfg).unwrap();
        assert_eq!(path.r[1], 0.9);
        assert_eq!(path.r.len(), 3);
    }

    #[test]
    fn zero_noise_matches_forward_euler_ode() {
        let theta = ParamVector::ckls(0.04, 0.6, 1.5, 0.0, 0.5, 0.0);
        let cfg = SimConfig {
            n: 500,
            burn_in: 0,
            delta: 0.05,
            r0: Some(0.3),
            h0: Some(f64::NEG_INFINITY),
            seed: 1,
        };
        let path = simulate_path(&ModelSpec::ckls_sv(), &theta, &cfg).unwrap();
        let mut x = 0.3f64;
        for (i, r) in path.r.iter().enumerate() {
            assert!((r - x).abs() <= 1e-12, "step {i}: {r} vs {x}");
            x += (0.04 - 0.6 * x) * 0.05;
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let delta = 1.0 / 52.0;
        let cfg = SimConfig::new(300, delta, 42);
        let a = simulate_path(&ModelSpec::ou_sv(), &ou_dgp(delta), &cfg).unwrap();
        let b = simulate_path(&ModelSpec::ou_sv(), &ou_dgp(delta), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.r.len(), 301);
    }

    #[test]
    fn ou_long_run_mean() {
        // Stationary mean alpha / beta; standard error from batch means.
        let delta = 1.0 / 52.0;
        let theta = ou_dgp(delta);
        let mut means = Vec::new();
        for seed in 0..40 {
            let cfg = SimConfig::new(2080, delta, 1000 + seed);
            let path = simulate_path(&ModelSpec::ou_sv(), &theta, &cfg).unwrap();
            means.push(path.r.iter().sum::<f64>() / path.r.len() as f64);
        }
        let k = means.len() as f64;
        let grand = means.iter().sum::<f64>() / k;
        let sd = (means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let se = sd / k.sqrt();
        assert!(
            (grand - 0.01 / 0.3).abs() < 3.0 * se,
            "mean {grand}, se {se}"
        );
    }

    #[test]
    fn latent_ar1_autocorrelation() {
        let delta = 1.0 / 52.0;
        let theta = ou_dgp(delta);
        let phi1 = theta.discretize(delta).unwrap().phi1();
        let cfg = SimConfig::new(100_000, delta, 77);
        let path = simulate_path(&ModelSpec::ou_sv(), &theta, &cfg).unwrap();
        let h: Vec<f64> = path.sigma2.unwrap().iter().map(|s| s.ln()).collect();
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let num: f64 = h.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let den: f64 = h.iter().map(|x| (x - mean).powi(2)).sum();
        let acf = num / den;
        assert!((acf - phi1).abs() < 0.02, "lag-1 acf {acf} vs {phi1}");
    }

    #[test]
    fn strong_convergence_ratio() {
        // Coarse and fine paths share one Brownian path; errors are measured against
        // a reference at delta / 16 and the ratio err(delta) / err(delta / 2) is averaged.
        let spec = ModelSpec::ou_sv();
        let theta = ParamVector::ou(0.5, 2.0, -1.0, 1.0, 0.2);
        let horizon = 1.0;
        let coarse_steps = 16usize;
        let refine = 16usize;
        let fine_steps = coarse_steps * refine;
        let fine_dt = horizon / fine_steps as f64;
        let mut rng = rng_from_seed(2024);

        let (mut err_coarse, mut err_half) = (0.0, 0.0);
        for _ in 0..200 {
            let fine: Vec<(f64, f64)> = (0..fine_steps)
                .map(|_| correlated_pair(&mut rng, 0.0, 1.0))
                .collect();
            let aggregate = |factor: usize| -> Vec<(f64, f64)> {
                let scale = (factor as f64).sqrt();
                fine.chunks(factor)
                    .map(|c| {
                        let (a, b) = c
                            .iter()
                            .fold((0.0, 0.0), |acc, z| (acc.0 + z.0, acc.1 + z.1));
                        (a / scale, b / scale)
                    })
                    .collect()
            };
            let endpoint = |factor: usize| {
                let dt = fine_dt * factor as f64;
                let out =
                    euler_with_increments(&spec, &theta, dt, 1.0, -1.0, aggregate(factor)).unwrap();
                *out.r.last().unwrap()
            };
            let reference = endpoint(1);
            err_coarse += (endpoint(refine) - reference).abs();
            err_half += (endpoint(refine / 2) - reference).abs();
        }
        let ratio = err_coarse / err_half;
        assert!((1.5..=2.5).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn reflection_counted_for_level_models() {
        let theta = ParamVector::ckls(0.0, 0.0, 0.5, 0.0, 0.0, 0.0);
        let cfg = SimConfig {
            n: 2000,
            burn_in: 0,
            delta: 1.0,
            r0: Some(0.01),
            h0: Some(0.0),
            seed: 3,
        };
        let path = simulate_path(&ModelSpec::ckls_sv(), &theta, &cfg).unwrap();
        assert!(path.r.iter().all(|r| *r > 0.0));
        assert!(path.reflections > 0);
        assert!(path.reflection_warning().is_some());
    }

    #[test]
    fn divergence_reports_step() {
        let theta = ParamVector::ou(0.0, -1e300, 0.0, 0.0, 0.0);
        let cfg = SimConfig {
            n: 10,
            burn_in: 0,
            delta: 1.0,
            r0: Some(1e10),
            h0: Some(0.0),
            seed: 3,
        };
        match simulate_path(&ModelSpec::ou_sv(), &theta, &cfg) {
            Err(Error::Diverged { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn correlated_family_requires_rho() {
        let spec = ModelSpec::new(ModelFamily::CklsSvCorr).unwrap();
        let cfg = SimConfig::new(10, 1.0 / 52.0, 1);
        let theta = ParamVector::ckls(0.04, 0.6, 1.5, -0.5, 0.1, 0.4);
        assert!(simulate_path(&spec, &theta, &cfg).is_err());
        assert!(simulate_path(&spec, &theta.with_correlation(-0.5), &cfg).is_ok());
    }
}
