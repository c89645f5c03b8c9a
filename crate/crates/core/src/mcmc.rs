//! Gibbs sampler for the log-variance path and its AR(1) parameters.
//!
//! Each sweep draws the initial state from its Gaussian full conditional,
//! updates every other state by independent Metropolis-Hastings with a
//! linearised Gaussian proposal, then draws `sigma_w2` and `(phi0, phi1)`
//! from their conjugate Normal-Inverse-Gamma posterior.
//!
//! The latent path is `h_0..h_n`; residual `e[k - 1]` is observed with `h_k`.

use std::io::Write;

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StreamRng};
use crate::simulate::fmt17;

/// Conjugate priors for the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcPriors {
    /// Prior mean of `(phi0, phi1)`.
    pub phi_mean: [f64; 2],
    /// Prior covariance of `(phi0, phi1)` in units of `sigma_w2`.
    pub phi_cov: [[f64; 2]; 2],
    /// Inverse-gamma degrees of freedom.
    pub nu0: f64,
    /// Inverse-gamma scale `s0^2`.
    pub s0_sq: f64,
    /// Prior mean of `h_0`; `None` uses the log sample variance of the residuals.
    pub h0_mean: Option<f64>,
    pub h0_var: f64,
}

impl Default for McmcPriors {
    fn default() -> Self {
        Self {
            phi_mean: [0.0, 0.95],
            phi_cov: [[10.0, 0.0], [0.0, 10.0]],
            nu0: 10.0,
            s0_sq: 0.02,
            h0_mean: None,
            h0_var: 10.0,
        }
    }
}

impl McmcPriors {
    fn validate(&self) -> Result<()> {
        let v = Matrix2::new(
            self.phi_cov[0][0],
            self.phi_cov[0][1],
            self.phi_cov[1][0],
            self.phi_cov[1][1],
        );
        if (v - v.transpose()).abs().max() > 1e-12 * v.abs().max() || v.cholesky().is_none() {
            return Err(Error::domain(
                "phi_cov",
                "must be symmetric positive definite",
            ));
        }
        if !(self.nu0 > 0.0) || !(self.s0_sq > 0.0) {
            return Err(Error::domain("nu0, s0_sq", "must be > 0"));
        }
        if !(self.h0_var > 0.0) {
            return Err(Error::domain("h0_var", "must be > 0"));
        }
        Ok(())
    }

    fn cov(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.phi_cov[0][0],
            self.phi_cov[0][1],
            self.phi_cov[1][0],
            self.phi_cov[1][1],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Total sweeps, including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin_h`-th retained latent path.
    pub thin_h: usize,
    pub priors: McmcPriors,
    pub seed: u64,
    /// Starting `(phi0, phi1, sigma_w2)`.
    pub init: Option<(f64, f64, f64)>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin_h: 10,
            priors: McmcPriors::default(),
            seed: 0,
            init: None,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({}) so that draws are retained",
                self.iterations, self.burn_in
            )));
        }
        if self.thin_h == 0 {
            return Err(Error::Config("thin_h must be >= 1".into()));
        }
        self.priors.validate()
    }
}

/// Location summaries of one scalar chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

impl Summary {
    pub fn of(draws: &[f64]) -> Self {
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let sd =
            (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Self {
            mean,
            sd,
            q025: q(0.025),
            median: q(0.5),
            q975: q(0.975),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcOutput {
    pub phi0: Vec<f64>,
    pub phi1: Vec<f64>,
    pub sigma_w2: Vec<f64>,
    /// Thinned latent paths `h_0..h_n`.
    pub h_draws: Vec<Vec<f64>>,
    /// Posterior mean of each `h_k` over retained sweeps.
    pub h_mean: Vec<f64>,
    /// Acceptance rate of each state `h_1..h_n` over all sweeps.
    pub acceptance: Vec<f64>,
    /// Retained draws with `|phi1| >= 1`.
    pub nonstationary_draws: usize,
}

impl McmcOutput {
    pub fn summary_phi0(&self) -> Summary {
        Summary::of(&self.phi0)
    }

    pub fn summary_phi1(&self) -> Summary {
        Summary::of(&self.phi1)
    }

    pub fn summary_sigma_w2(&self) -> Summary {
        Summary::of(&self.sigma_w2)
    }

    pub fn mean_acceptance(&self) -> f64 {
        self.acceptance.iter().sum::<f64>() / self.acceptance.len().max(1) as f64
    }

    /// Writes `sweep,phi0,phi1,sigma_w2`, numbering retained sweeps from 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "sweep,phi0,phi1,sigma_w2")?;
        for i in 0..self.phi0.len() {
            writeln!(
                out,
                "{i},{},{},{}",
                fmt17(self.phi0[i]),
                fmt17(self.phi1[i]),
                fmt17(self.sigma_w2[i])
            )?;
        }
        Ok(())
    }

    /// Flat `key=value` summary.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (name, s) in [
            ("phi0", self.summary_phi0()),
            ("phi1", self.summary_phi1()),
            ("sigma_w2", self.summary_sigma_w2()),
        ] {
            out += &format!(
                "{name}_mean={:.10e}\n{name}_sd={:.6e}\n{name}_q025={:.10e}\n{name}_median={:.10e}\n{name}_q975={:.10e}\n",
                s.mean, s.sd, s.q025, s.median, s.q975
            );
        }
        out += &format!("draws={}\n", self.phi0.len());
        out += &format!("mean_acceptance={:.6}\n", self.mean_acceptance());
        out += &format!("nonstationary_draws={}\n", self.nonstationary_draws);
        out
    }
}

/// Moments `(m1, c1)` of `h_0 | h_1`.
pub fn h0_moments(
    m0: f64,
    c0: f64,
    phi0: f64,
    phi1: f64,
    sigma_w2: f64,
    h1: f64,
) -> Result<(f64, f64)> {
    if !(c0 > 0.0) || !(sigma_w2 > 0.0) {
        return Err(Error::domain(
            "c0, sigma_w2",
            format!("must be > 0, got ({c0}, {sigma_w2})"),
        ));
    }
    let c1 = 1.0 / (1.0 / c0 + phi1 * phi1 / sigma_w2);
    let m1 = c1 * (m0 / c0 + phi1 * (h1 - phi0) / sigma_w2);
    Ok((m1, c1))
}

/// Draws `h_0 | h_1`.
pub fn sample_h0<R: Rng + ?Sized>(
    rng: &mut R,
    m0: f64,
    c0: f64,
    phi0: f64,
    phi1: f64,
    sigma_w2: f64,
    h1: f64,
) -> Result<f64> {
    let (m1, c1) = h0_moments(m0, c0, phi0, phi1, sigma_w2, h1)?;
    Ok(m1 + c1.sqrt() * rng.sample::<f64, _>(StandardNormal))
}

/// Prior moments of `h_i` given its neighbours; `next = None` for the terminal state.
pub fn conditional_h_moments(
    prev: f64,
    next: Option<f64>,
    phi0: f64,
    phi1: f64,
    sigma_w2: f64,
) -> (f64, f64) {
    match next {
        Some(next) => {
            let denom = 1.0 + phi1 * phi1;
            (
                (1.0 - phi1) / denom * phi0 + phi1 / denom * (prev + next),
                sigma_w2 / denom,
            )
        }
        None => (phi0 + phi1 * prev, sigma_w2),
    }
}

/// Mean of the linearised proposal, `mu + nu2 (e^2 exp(-mu) - 1) / 2`.
#[inline]
pub fn proposal_mean(mu: f64, nu2: f64, e: f64) -> f64 {
    mu + 0.5 * nu2 * (e * e * (-mu).exp() - 1.0)
}

#[inline]
fn log_target(h: f64, mu: f64, nu2: f64, e_sq: f64) -> f64 {
    -0.5 * (h - mu).powi(2) / nu2 - 0.5 * h - 0.5 * e_sq * (-h).exp()
}

/// Log acceptance probability of moving from `current` to `proposal`.
pub fn log_acceptance(current: f64, proposal: f64, e: f64, mu: f64, nu2: f64) -> f64 {
    let shifted = proposal_mean(mu, nu2, e);
    let e_sq = e * e;
    let log_q = |h: f64| -0.5 * (h - shifted).powi(2) / nu2;
    let ratio =
        log_target(proposal, mu, nu2, e_sq) - log_q(proposal) - log_target(current, mu, nu2, e_sq)
            + log_q(current);
    if ratio.is_nan() {
        f64::NEG_INFINITY
    } else {
        ratio.min(0.0)
    }
}

/// One independent Metropolis-Hastings update of a single state.
pub fn mh_sample_h<R: Rng + ?Sized>(
    rng: &mut R,
    current: f64,
    e: f64,
    mu: f64,
    nu2: f64,
) -> (f64, bool) {
    let proposal = proposal_mean(mu, nu2, e) + nu2.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let log_alpha = log_acceptance(current, proposal, e, mu, nu2);
    let u: f64 = rng.random();
    if u.ln() < log_alpha {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Posterior hyperparameters `(phi1_mean, V1, nu1, nu1 s1^2)` given `h_0..h_n`.
pub fn conjugate_posterior(
    h: &[f64],
    priors: &McmcPriors,
) -> Result<(Vector2<f64>, Matrix2<f64>, f64, f64)> {
    if h.len() < 3 {
        return Err(Error::Length(format!(
            "need a path of at least 3 states, got {}",
            h.len()
        )));
    }
    let v0_inv = priors
        .cov()
        .try_inverse()
        .ok_or_else(|| Error::Rank("prior covariance is singular".into()))?;
    let prior_mean = Vector2::new(priors.phi_mean[0], priors.phi_mean[1]);
    let n = h.len() - 1;
    let (mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for w in h.windows(2) {
        sx += w[0];
        sxx += w[0] * w[0];
        sy += w[1];
        sxy += w[0] * w[1];
    }
    let xtx = Matrix2::new(n as f64, sx, sx, sxx);
    let xty = Vector2::new(sy, sxy);
    let v1 = (v0_inv + xtx)
        .try_inverse()
        .ok_or_else(|| Error::Rank("posterior precision is singular".into()))?;
    let mean = v1 * (v0_inv * prior_mean + xty);
    let sse: f64 = h
        .windows(2)
        .map(|w| (w[1] - mean[0] - mean[1] * w[0]).powi(2))
        .sum();
    let dev = mean - prior_mean;
    let nu1 = priors.nu0 + n as f64;
    let scale = priors.nu0 * priors.s0_sq + sse + (dev.transpose() * v0_inv * dev)[(0, 0)];
    Ok((mean, v1, nu1, scale))
}

/// Draws `sigma_w2` from its marginal posterior, then `(phi0, phi1) | sigma_w2`.
pub fn posterior_phi_sigma<R: Rng + ?Sized>(
    rng: &mut R,
    h: &[f64],
    priors: &McmcPriors,
) -> Result<(f64, f64, f64)> {
    let (mean, v1, nu1, scale) = conjugate_posterior(h, priors)?;
    let gamma = Gamma::new(nu1 / 2.0, 1.0).map_err(|e| Error::domain("nu1", e.to_string()))?;
    let sigma_w2 = (scale / 2.0) / gamma.sample(rng);
    let chol = (v1 * sigma_w2)
        .cholesky()
        .ok_or_else(|| Error::Rank("posterior covariance is not positive definite".into()))?;
    let z = Vector2::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    );
    let phi = mean + chol.l() * z;
    Ok((phi[0], phi[1], sigma_w2))
}

/// Runs the sampler on drift residuals.
pub fn gibbs_run(residuals: &[f64], cfg: &McmcConfig) -> Result<McmcOutput> {
    let mut rng = rng_from_seed(cfg.seed);
    gibbs_run_with(residuals, cfg, &mut rng)
}

pub fn gibbs_run_with(
    residuals: &[f64],
    cfg: &McmcConfig,
    rng: &mut StreamRng,
) -> Result<McmcOutput> {
    cfg.validate()?;
    let n = residuals.len();
    if n < 3 {
        return Err(Error::Length(format!("need at least 3 residuals, got {n}")));
    }
    if residuals.iter().any(|e| !e.is_finite()) {
        return Err(Error::domain("residuals", "must be finite"));
    }
    let sample_var = {
        let m = residuals.iter().sum::<f64>() / n as f64;
        residuals.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    let m0 = cfg
        .priors
        .h0_mean
        .unwrap_or_else(|| sample_var.max(1e-300).ln());
    let c0 = cfg.priors.h0_var;

    let (mut phi0, mut phi1, mut sigma_w2) =
        cfg.init.unwrap_or((0.05 * m0, 0.95, cfg.priors.s0_sq));
    let mut h = vec![m0; n + 1];
    let retained = cfg.iterations - cfg.burn_in;
    let mut out = McmcOutput {
        phi0: Vec::with_capacity(retained),
        phi1: Vec::with_capacity(retained),
        sigma_w2: Vec::with_capacity(retained),
        h_draws: Vec::new(),
        h_mean: vec![0.0; n + 1],
        acceptance: vec![0.0; n],
        nonstationary_draws: 0,
    };
    let mut accepted = vec![0usize; n];

    for sweep in 0..cfg.iterations {
        h[0] = sample_h0(rng, m0, c0, phi0, phi1, sigma_w2, h[1])?;
        for k in 1..=n {
            let next = (k < n).then(|| h[k + 1]);
            let (mu, nu2) = conditional_h_moments(h[k - 1], next, phi0, phi1, sigma_w2);
            let (value, ok) = mh_sample_h(rng, h[k], residuals[k - 1], mu, nu2);
            h[k] = value;
            accepted[k - 1] += usize::from(ok);
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::ChainDiverged {
                sweep,
                detail: "non-finite latent state".into(),
            });
        }
        (phi0, phi1, sigma_w2) = posterior_phi_sigma(rng, &h, &cfg.priors)?;
        if !phi0.is_finite() || !phi1.is_finite() || !(sigma_w2 > 0.0) || !sigma_w2.is_finite() {
            return Err(Error::ChainDiverged {
                sweep,
                detail: format!("parameters ({phi0}, {phi1}, {sigma_w2})"),
            });
        }
        if sweep >= cfg.burn_in {
            out.phi0.push(phi0);
            out.phi1.push(phi1);
            out.sigma_w2.push(sigma_w2);
            out.nonstationary_draws += usize::from(phi1.abs() >= 1.0);
            out.h_mean.iter_mut().zip(&h).for_each(|(m, x)| *m += x);
            if (sweep - cfg.burn_in).is_multiple_of(cfg.thin_h) {
                out.h_draws.push(h.clone());
            }
        }
    }
    out.h_mean.iter_mut().for_each(|m| *m /= retained as f64);
    out.acceptance = accepted
        .iter()
        .map(|a| *a as f64 / cfg.iterations as f64)
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::density::simpson;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn h0_limits() {
        let (m1, c1) = h0_moments(3.0, 1e12, 0.0, 1.0, 0.2, -1.5).unwrap();
        assert!((m1 + 1.5).abs() < 1e-9 && (c1 - 0.2).abs() < 1e-9);
        let (m1, c1) = h0_moments(3.0, 2.0, 0.4, 0.0, 0.2, -1.5).unwrap();
        assert_eq!((m1, c1), (3.0, 2.0));
        assert!(h0_moments(0.0, 0.0, 0.0, 0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn h0_draw_moments() {
        let mut rng = rng_from_seed(1);
        let (m1, c1) = h0_moments(-2.0, 3.0, 0.1, 0.9, 0.3, -1.0).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_h0(&mut rng, -2.0, 3.0, 0.1, 0.9, 0.3, -1.0).unwrap())
            .collect();
        let s = Summary::of(&draws);
        assert!((s.mean - m1).abs() < 4.0 * (c1 / n as f64).sqrt());
        let var_se = c1 * (2.0 / n as f64).sqrt();
        assert!((s.sd * s.sd - c1).abs() < 4.0 * var_se);
    }

    #[test]
    fn neighbour_moments_examples() {
        assert_eq!(
            conditional_h_moments(1.0, Some(3.0), 0.7, 0.0, 0.4),
            (0.7, 0.4)
        );
        assert_eq!(
            conditional_h_moments(2.0, Some(2.0), 0.0, 1.0, 0.4),
            (2.0, 0.2)
        );
        assert_eq!(conditional_h_moments(2.0, None, 0.1, 0.5, 0.4), (1.1, 0.4));
    }

    #[test]
    fn neighbour_moments_match_gaussian_conditioning() {
        let mut rng = rng_from_seed(2);
        for _ in 0..200 {
            let (phi0, phi1, s2) = (
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.99..1.2),
                rng.random_range(0.01..2.0),
            );
            let (prev, next) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            // Joint of (h_i, h_{i+1}) given h_{i-1}; condition the first on the second.
            let mean = DVector::from_vec(vec![
                phi0 + phi1 * prev,
                (1.0 + phi1) * phi0 + phi1 * phi1 * prev,
            ]);
            let cov = DMatrix::from_row_slice(
                2,
                2,
                &[s2, s2 * phi1, s2 * phi1, s2 * (1.0 + phi1 * phi1)],
            );
            let gain = cov[(0, 1)] / cov[(1, 1)];
            let cond_mean = mean[0] + gain * (next - mean[1]);
            let cond_var = cov[(0, 0)] - gain * cov[(1, 0)];
            let (mu, nu2) = conditional_h_moments(prev, Some(next), phi0, phi1, s2);
            assert!((mu - cond_mean).abs() < 1e-12 * (1.0 + mu.abs()));
            assert!((nu2 - cond_var).abs() < 1e-12 * (1.0 + nu2));
        }
    }

    #[test]
    fn proposal_shift_and_acceptance_bounds() {
        let mu = 0.7;
        let e = (mu / 2.0f64).exp();
        assert!((proposal_mean(mu, 0.3, e) - mu).abs() < 1e-15);
        let mut rng = rng_from_seed(3);
        for _ in 0..10_000 {
            let la = log_acceptance(
                rng.random_range(-8.0..8.0),
                rng.random_range(-8.0..8.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.01..1.0),
            );
            assert!(la <= 0.0 && la.exp() >= 0.0 && la.exp() <= 1.0);
        }
    }

    /// Total variation between histogram frequencies and bin masses of a density.
    fn total_variation<F: Fn(f64) -> f64>(
        draws: &[f64],
        density: F,
        lo: f64,
        hi: f64,
        bins: usize,
    ) -> f64 {
        let width = (hi - lo) / bins as f64;
        let norm = simpson(
            &density,
            lo - 20.0 * width * bins as f64,
            hi + 20.0 * width * bins as f64,
            200_000,
        );
        let mut counts = vec![0usize; bins + 2];
        for x in draws {
            let idx = if *x < lo {
                0
            } else if *x >= hi {
                bins + 1
            } else {
                1 + ((x - lo) / width) as usize
            };
            counts[idx.min(bins + 1)] += 1;
        }
        let mut masses: Vec<f64> = (0..bins)
            .map(|b| {
                simpson(
                    &density,
                    lo + b as f64 * width,
                    lo + (b + 1) as f64 * width,
                    200,
                ) / norm
            })
            .collect();
        let inside: f64 = masses.iter().sum();
        let below = simpson(&density, lo - 20.0 * width * bins as f64, lo, 100_000) / norm;
        masses.insert(0, below);
        masses.push((1.0 - inside - below).max(0.0));
        let total = draws.len() as f64;
        0.5 * counts
            .iter()
            .zip(&masses)
            .map(|(c, m)| (*c as f64 / total - m).abs())
            .sum::<f64>()
    }

    #[test]
    fn single_site_chain_matches_quadrature() {
        let (mu, nu2, e) = (-1.0, 0.4, 1.7);
        let mut rng = rng_from_seed(4);
        let mut h = mu;
        let mut draws = Vec::with_capacity(1_000_000);
        for _ in 0..1_000_000 {
            h = mh_sample_h(&mut rng, h, e, mu, nu2).0;
            draws.push(h);
        }
        let target = |x: f64| log_target(x, mu, nu2, e * e).exp();
        let sd = nu2.sqrt();
        let tv = total_variation(&draws, target, mu - 4.0 * sd, mu + 5.0 * sd, 30);
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn conjugate_draws_match_grid_posterior() {
        let mut rng = rng_from_seed(5);
        let mut h = vec![-1.0];
        for _ in 0..19 {
            let last = *h.last().unwrap();
            h.push(-0.2 + 0.8 * last + 0.5 * rng.sample::<f64, _>(StandardNormal));
        }
        let priors = McmcPriors {
            phi_mean: [0.0, 0.5],
            phi_cov: [[2.0, 0.3], [0.3, 1.0]],
            nu0: 4.0,
            s0_sq: 0.2,
            ..McmcPriors::default()
        };
        let draws: Vec<(f64, f64, f64)> = (0..300_000)
            .map(|_| posterior_phi_sigma(&mut rng, &h, &priors).unwrap())
            .collect();

        // Unnormalised joint posterior on a grid in (phi0, phi1, log sigma_w2).
        let v0_inv = priors.cov().try_inverse().unwrap();
        let log_post = |p0: f64, p1: f64, s2: f64| {
            let d = Vector2::new(p0 - priors.phi_mean[0], p1 - priors.phi_mean[1]);
            let quad = (d.transpose() * v0_inv * d)[(0, 0)];
            let sse: f64 = h.windows(2).map(|w| (w[1] - p0 - p1 * w[0]).powi(2)).sum();
            let n = (h.len() - 1) as f64;
            -(priors.nu0 / 2.0 + 1.0) * s2.ln()
                - priors.nu0 * priors.s0_sq / (2.0 * s2)
                - s2.ln()
                - quad / (2.0 * s2)
                - 0.5 * n * s2.ln()
                - sse / (2.0 * s2)
        };
        let g = 120;
        let axes = [(-1.5, 1.0), (0.2, 1.4), (-3.5, 0.5)];
        let step: Vec<f64> = axes.iter().map(|(a, b)| (b - a) / g as f64).collect();
        let mut grid = vec![0.0; g * g * g];
        let mut top = f64::NEG_INFINITY;
        for i in 0..g {
            for j in 0..g {
                for k in 0..g {
                    let p0 = axes[0].0 + (i as f64 + 0.5) * step[0];
                    let p1 = axes[1].0 + (j as f64 + 0.5) * step[1];
                    let ls = axes[2].0 + (k as f64 + 0.5) * step[2];
                    // Change of variables to log sigma_w2 adds a factor sigma_w2.
                    let v = log_post(p0, p1, ls.exp()) + ls;
                    grid[(i * g + j) * g + k] = v;
                    top = top.max(v);
                }
            }
        }
        let weights: Vec<f64> = grid.iter().map(|v| (v - top).exp()).collect();
        let mass: f64 = weights.iter().sum();
        for (axis, coord) in [0usize, 1, 2].iter().zip([0usize, 1, 2]) {
            let bins = 24;
            let per = g / bins;
            let mut grid_marginal = vec![0.0; bins];
            for i in 0..g {
                for j in 0..g {
                    for k in 0..g {
                        let idx = [i, j, k][*axis] / per;
                        grid_marginal[idx] += weights[(i * g + j) * g + k] / mass;
                    }
                }
            }
            let mut counts = vec![0.0; bins];
            let mut outside = 0.0;
            for d in &draws {
                let x = match coord {
                    0 => d.0,
                    1 => d.1,
                    _ => d.2.ln(),
                };
                let pos = (x - axes[coord].0) / (step[coord] * per as f64);
                if pos >= 0.0 && (pos as usize) < bins {
                    counts[pos as usize] += 1.0 / draws.len() as f64;
                } else {
                    outside += 1.0 / draws.len() as f64;
                }
            }
            let tv = 0.5
                * (counts
                    .iter()
                    .zip(&grid_marginal)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    + outside);
            assert!(tv < 0.02, "axis {coord}: total variation {tv}");
        }
    }

    #[test]
    fn dogmatic_and_flat_prior_limits() {
        let mut rng = rng_from_seed(6);
        let h: Vec<f64> = (0..200)
            .map(|i| (i as f64 * 0.37).sin() + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let tight = McmcPriors {
            phi_cov: [[1e-12, 0.0], [0.0, 1e-12]],
            ..McmcPriors::default()
        };
        for _ in 0..100 {
            let (p0, p1, _) = posterior_phi_sigma(&mut rng, &h, &tight).unwrap();
            assert!(p0.abs() < 1e-4 && (p1 - 0.95).abs() < 1e-4);
        }

        let flat = McmcPriors {
            phi_cov: [[1e8, 0.0], [0.0, 1e8]],
            ..McmcPriors::default()
        };
        let n = h.len() - 1;
        let x = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { h[r] });
        let y = DVector::from_iterator(n, h[1..].iter().copied());
        let ols = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * y;
        let draws: Vec<(f64, f64, f64)> = (0..20_000)
            .map(|_| posterior_phi_sigma(&mut rng, &h, &flat).unwrap())
            .collect();
        let s0 = Summary::of(&draws.iter().map(|d| d.0).collect::<Vec<_>>());
        let s1 = Summary::of(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
        let k = (draws.len() as f64).sqrt();
        assert!((s0.mean - ols[0]).abs() < 4.0 * s0.sd / k);
        assert!((s1.mean - ols[1]).abs() < 4.0 * s1.sd / k);
    }

    #[test]
    fn inverse_gamma_mean() {
        let mut rng = rng_from_seed(7);
        let h: Vec<f64> = (0..50).map(|i| (i as f64 * 0.9).cos()).collect();
        let priors = McmcPriors::default();
        let (_, _, nu1, scale) = conjugate_posterior(&h, &priors).unwrap();
        let draws: Vec<f64> = (0..100_000)
            .map(|_| posterior_phi_sigma(&mut rng, &h, &priors).unwrap().2)
            .collect();
        let s = Summary::of(&draws);
        let expected = scale / (nu1 - 2.0);
        assert!(
            (s.mean - expected).abs() < 4.0 * s.sd / (draws.len() as f64).sqrt(),
            "{} vs {expected}",
            s.mean
        );
    }

    fn ou_residuals(n: usize, seed: u64) -> Vec<f64> {
        use crate::models::{DiscreteParams, ModelSpec, ParamVector};
        use crate::simulate::{simulate_path, SimConfig};
        use crate::statespace::ols_drift_residuals;
        let delta = 1.0 / 52.0;
        let theta = ParamVector::from_discrete(
            0.01,
            0.3,
            None,
            DiscreteParams::new(-0.006, 0.99, 0.0225),
            delta,
        )
        .unwrap();
        let path =
            simulate_path(&ModelSpec::ou_sv(), &theta, &SimConfig::new(n, delta, seed)).unwrap();
        ols_drift_residuals(&path).unwrap().residuals
    }

    #[test]
    fn chain_reproducible_and_validated() {
        let e = ou_residuals(300, 1);
        let cfg = McmcConfig {
            iterations: 300,
            burn_in: 100,
            thin_h: 50,
            seed: 9,
            ..McmcConfig::default()
        };
        let a = gibbs_run(&e, &cfg).unwrap();
        let b = gibbs_run(&e, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.phi1.len(), 200);
        assert_eq!(a.h_draws.len(), 4);
        assert!(a.acceptance.iter().all(|r| (0.0..=1.0).contains(r)));
        let bad = McmcConfig {
            iterations: 100,
            burn_in: 100,
            ..cfg
        };
        assert!(gibbs_run(&e, &bad).is_err());
    }

    #[test]
    fn posterior_spread_shrinks_with_sample_size() {
        let full = ou_residuals(2080, 11);
        let cfg = McmcConfig {
            iterations: 2500,
            burn_in: 500,
            seed: 3,
            ..McmcConfig::default()
        };
        let sds: Vec<f64> = [520, 1040, 2080]
            .iter()
            .map(|n| gibbs_run(&full[..*n], &cfg).unwrap().summary_phi1().sd)
            .collect();
        assert!(sds[0] > sds[1] && sds[1] > sds[2], "{sds:?}");
    }
}
