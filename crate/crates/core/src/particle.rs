//! Auxiliary particle filter with Liu-West kernel shrinkage for static parameters.
//!
//! Parameter particles live in `(phi0, atanh phi1, log sigma_w2)`. At every
//! step the cloud is shrunk towards its weighted mean by `a`, resampled with
//! first-stage weights evaluated at the conditional mean of the next state,
//! jittered with a Gaussian kernel of covariance `(1 - a^2) V`, propagated,
//! and reweighted by the ratio of exact and first-stage likelihoods.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, StreamRng};
use crate::simulate::fmt17;
use crate::statespace::density::{ObservationDensity, LOGCHI2_MEAN};

/// Resampling scheme for index selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resampling {
    Multinomial,
    Systematic,
}

/// Draws `weights.len()` ancestor indices with probabilities proportional to `weights`.
pub fn resample<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: Resampling,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let count = weights.len();
    resample_into(weights, scheme, rng, count)
}

fn resample_into<R: Rng + ?Sized>(
    weights: &[f64],
    scheme: Resampling,
    rng: &mut R,
    count: usize,
) -> Result<Vec<usize>> {
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("weights", "must be finite and >= 0"));
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for w in weights {
        total += w;
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::domain("weights", "all weights are zero"));
    }
    let last = weights.len() - 1;
    let locate = |target: f64| cumulative.partition_point(|c| *c <= target).min(last);
    let out = match scheme {
        Resampling::Multinomial => (0..count)
            .map(|_| locate(rng.random::<f64>() * total))
            .collect(),
        Resampling::Systematic => {
            let offset: f64 = rng.random();
            let mut idx = 0;
            (0..count)
                .map(|k| {
                    let target = (offset + k as f64) / count as f64 * total;
                    while idx < last && cumulative[idx] <= target {
                        idx += 1;
                    }
                    idx
                })
                .collect()
        }
    };
    Ok(out)
}

/// One particle: a log-variance and transformed parameters `(phi0, atanh phi1, log sigma_w2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub h: f64,
    pub theta: [f64; 3],
}

impl Particle {
    pub fn new(h: f64, phi0: f64, phi1: f64, sigma_w2: f64) -> Self {
        Self {
            h,
            theta: [phi0, phi1.atanh(), sigma_w2.ln()],
        }
    }

    pub fn phi0(&self) -> f64 {
        self.theta[0]
    }

    pub fn phi1(&self) -> f64 {
        self.theta[1].tanh()
    }

    pub fn sigma_w2(&self) -> f64 {
        self.theta[2].exp()
    }
}

/// Source of initial particles for the first observation.
pub trait PriorSampler {
    fn draw(&self, rng: &mut StreamRng) -> Particle;
}

impl<F: Fn(&mut StreamRng) -> Particle> PriorSampler for F {
    fn draw(&self, rng: &mut StreamRng) -> Particle {
        self(rng)
    }
}

/// Weakly informative prior centred on a persistent log-variance.
///
/// `phi1 ~ U(phi1_lo, phi1_hi)`, the stationary mean `~ N(level_mean, level_var)`,
/// `sigma_w2 ~ IG(shape, scale)` and `h` is drawn from its stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusePrior {
    pub phi1_lo: f64,
    pub phi1_hi: f64,
    pub level_mean: f64,
    pub level_var: f64,
    pub shape: f64,
    pub scale: f64,
}

impl DiffusePrior {
    /// Centres the level on `mean(y)` less the mean of `log chi^2_1`.
    pub fn for_observations(y: &[f64]) -> Self {
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        Self {
            phi1_lo: 0.8,
            phi1_hi: 0.9999,
            level_mean: mean - LOGCHI2_MEAN,
            level_var: 1.0,
            shape: 5.0,
            scale: 5.0 * 0.02,
        }
    }
}

impl PriorSampler for DiffusePrior {
    fn draw(&self, rng: &mut StreamRng) -> Particle {
        let phi1 = rng.random_range(self.phi1_lo..self.phi1_hi);
        let level = self.level_mean + self.level_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        let sigma_w2 = self.scale
            / Gamma::new(self.shape, 1.0)
                .expect("positive shape")
                .sample(rng);
        let sd = (sigma_w2 / (1.0 - phi1 * phi1)).sqrt();
        let h = level + sd * rng.sample::<f64, _>(StandardNormal);
        Particle::new(h, (1.0 - phi1) * level, phi1, sigma_w2)
    }
}

/// Fixed parameters with a Gaussian initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMassPrior {
    pub phi0: f64,
    pub phi1: f64,
    pub sigma_w2: f64,
    pub h_mean: f64,
    pub h_var: f64,
}

impl PriorSampler for PointMassPrior {
    fn draw(&self, rng: &mut StreamRng) -> Particle {
        let h = self.h_mean + self.h_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        Particle::new(h, self.phi0, self.phi1, self.sigma_w2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiuWestConfig {
    pub particles: usize,
    /// Shrinkage `a`; the kernel variance factor is `1 - a^2`.
    pub shrinkage: f64,
    pub resampling: Resampling,
    pub density: ObservationDensity,
    pub seed: u64,
}

impl Default for LiuWestConfig {
    fn default() -> Self {
        Self {
            particles: 5000,
            shrinkage: 0.98,
            resampling: Resampling::Systematic,
            density: ObservationDensity::LogChiSquared,
            seed: 0,
        }
    }
}

impl LiuWestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 100 {
            return Err(Error::Config(format!(
                "need at least 100 particles, got {}",
                self.particles
            )));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage < 1.0) {
            return Err(Error::Config(format!(
                "shrinkage must lie in (0, 1), got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

/// Weighted cloud after a filtering step.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
    pub shrinkage: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// `h^2 = 1 - a^2`.
    pub fn dispersion(&self) -> f64 {
        1.0 - self.shrinkage * self.shrinkage
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    fn weighted_mean<F: Fn(&Particle) -> f64>(&self, f: F) -> f64 {
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    fn weighted_quantiles<F: Fn(&Particle) -> f64>(&self, f: F, probs: &[f64]) -> Vec<f64> {
        let mut pairs: Vec<(f64, f64)> = self
            .particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| (f(p), *w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        probs
            .iter()
            .map(|p| {
                let mut acc = 0.0;
                for (x, w) in &pairs {
                    acc += w;
                    if acc >= *p {
                        return *x;
                    }
                }
                pairs.last().map_or(f64::NAN, |x| x.0)
            })
            .collect()
    }
}

/// Posterior means after one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub ess: f64,
    pub phi0_mean: f64,
    pub phi1_mean: f64,
    pub sigma_w2_mean: f64,
    pub h_mean: f64,
}

/// Weighted mean and 2.5/50/97.5% quantiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPosterior {
    pub mean: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiuWestOutput {
    pub steps: Vec<StepSummary>,
    pub phi0: ParamPosterior,
    pub phi1: ParamPosterior,
    pub sigma_w2: ParamPosterior,
    pub cloud: ParticleCloud,
}

impl LiuWestOutput {
    /// Writes `i,ess,phi0_mean,phi1_mean,sigw2_mean`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "i,ess,phi0_mean,phi1_mean,sigw2_mean")?;
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(
                out,
                "{i},{},{},{},{}",
                fmt17(s.ess),
                fmt17(s.phi0_mean),
                fmt17(s.phi1_mean),
                fmt17(s.sigma_w2_mean)
            )?;
        }
        Ok(())
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        for (name, p) in [
            ("phi0", self.phi0),
            ("phi1", self.phi1),
            ("sigma_w2", self.sigma_w2),
        ] {
            out += &format!(
                "{name}_mean={:.10e}\n{name}_q025={:.10e}\n{name}_median={:.10e}\n{name}_q975={:.10e}\n",
                p.mean, p.q025, p.median, p.q975
            );
        }
        let min_ess = self
            .steps
            .iter()
            .map(|s| s.ess)
            .fold(f64::INFINITY, f64::min);
        out += &format!("particles={}\nmin_ess={min_ess:.3}\n", self.cloud.len());
        out
    }
}

/// Weighted mean and covariance of parameter particles.
///
/// The mean is accumulated as offsets from the first particle so that a point
/// mass is reproduced exactly.
#[allow(clippy::needless_range_loop)]
pub fn parameter_moments(particles: &[Particle], weights: &[f64]) -> ([f64; 3], [[f64; 3]; 3]) {
    let base = particles[0].theta;
    let mut mean = [0.0; 3];
    for (p, w) in particles.iter().zip(weights) {
        for k in 0..3 {
            mean[k] += w * (p.theta[k] - base[k]);
        }
    }
    for k in 0..3 {
        mean[k] += base[k];
    }
    let mut cov = [[0.0; 3]; 3];
    for (p, w) in particles.iter().zip(weights) {
        let d = [
            p.theta[0] - mean[0],
            p.theta[1] - mean[1],
            p.theta[2] - mean[2],
        ];
        for r in 0..3 {
            for c in 0..=r {
                cov[r][c] += w * d[r] * d[c];
            }
        }
    }
    for r in 0..3 {
        for c in r + 1..3 {
            cov[r][c] = cov[c][r];
        }
    }
    (mean, cov)
}

/// Lower Cholesky factor of a positive semidefinite 3x3 matrix; null directions get zero columns.
fn psd_cholesky(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    let scale = (0..3).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    let tiny = 1e-14 * scale;
    for j in 0..3 {
        let d = m[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d <= tiny {
            continue;
        }
        let root = d.sqrt();
        l[j][j] = root;
        for i in j + 1..3 {
            l[i][j] = (m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>()) / root;
        }
    }
    l
}

/// Kernel locations `mean + a (theta_j - mean)`.
fn shrink(theta: &[f64; 3], mean: &[f64; 3], a: f64) -> [f64; 3] {
    [
        mean[0] + a * (theta[0] - mean[0]),
        mean[1] + a * (theta[1] - mean[1]),
        mean[2] + a * (theta[2] - mean[2]),
    ]
}

fn jitter<R: Rng + ?Sized>(
    rng: &mut R,
    location: &[f64; 3],
    chol: &[[f64; 3]; 3],
    scale: f64,
) -> [f64; 3] {
    let z: [f64; 3] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let mut out = *location;
    for r in 0..3 {
        let step: f64 = (0..=r).map(|c| chol[r][c] * z[c]).sum();
        out[r] += scale * step;
    }
    out
}

/// Shrinks and jitters every parameter particle in place without resampling.
pub fn kernel_propagate<R: Rng + ?Sized>(
    particles: &mut [Particle],
    weights: &[f64],
    shrinkage: f64,
    rng: &mut R,
) {
    let (mean, cov) = parameter_moments(particles, weights);
    let chol = psd_cholesky(&cov);
    let scale = (1.0 - shrinkage * shrinkage).sqrt();
    for p in particles.iter_mut() {
        p.theta = jitter(rng, &shrink(&p.theta, &mean, shrinkage), &chol, scale);
    }
}

fn normalise_log(log_w: &[f64], out: &mut [f64], step: usize) -> Result<()> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Degenerate {
            step,
            detail: "all particle likelihoods vanished".into(),
        });
    }
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(log_w) {
        *o = (l - top).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

/// Runs the filter over log-squared residuals `y`.
pub fn lw_filter<P: PriorSampler + ?Sized>(
    y: &[f64],
    prior: &P,
    cfg: &LiuWestConfig,
) -> Result<LiuWestOutput> {
    let mut rng = rng_from_seed(cfg.seed);
    lw_filter_with(y, prior, cfg, &mut rng)
}

pub fn lw_filter_with<P: PriorSampler + ?Sized>(
    y: &[f64],
    prior: &P,
    cfg: &LiuWestConfig,
    rng: &mut StreamRng,
) -> Result<LiuWestOutput> {
    cfg.validate()?;
    if y.is_empty() {
        return Err(Error::Length("no observations".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("y", "observations must be finite"));
    }
    let l = cfg.particles;
    let a = cfg.shrinkage;
    let kernel_scale = (1.0 - a * a).sqrt();
    let density = cfg.density;

    let mut particles: Vec<Particle> = (0..l).map(|_| prior.draw(rng)).collect();
    let mut weights = vec![0.0; l];
    let mut log_w: Vec<f64> = particles
        .iter()
        .map(|p| density.ln_pdf(y[0] - p.h))
        .collect();
    normalise_log(&log_w, &mut weights, 0)?;

    let mut steps = Vec::with_capacity(y.len());
    let summarise = |particles: &[Particle], weights: &[f64]| {
        let cloud = |f: &dyn Fn(&Particle) -> f64| {
            particles
                .iter()
                .zip(weights)
                .map(|(p, w)| w * f(p))
                .sum::<f64>()
        };
        StepSummary {
            ess: 1.0 / weights.iter().map(|w| w * w).sum::<f64>(),
            phi0_mean: cloud(&|p| p.phi0()),
            phi1_mean: cloud(&|p| p.phi1()),
            sigma_w2_mean: cloud(&|p| p.sigma_w2()),
            h_mean: cloud(&|p| p.h),
        }
    };
    steps.push(summarise(&particles, &weights));

    let mut predicted = vec![0.0; l];
    let mut first_ln = vec![0.0; l];
    let mut first_w = vec![0.0; l];
    let mut next = particles.clone();
    for (t, &obs) in y.iter().enumerate().skip(1) {
        let (mean, cov) = parameter_moments(&particles, &weights);
        let chol = psd_cholesky(&cov);
        for j in 0..l {
            let p = &particles[j];
            predicted[j] = p.phi0() + p.phi1() * p.h;
            first_ln[j] = density.ln_pdf(obs - predicted[j]);
            log_w[j] = weights[j].ln() + first_ln[j];
        }
        normalise_log(&log_w, &mut first_w, t)?;
        let ancestors = resample(&first_w, cfg.resampling, rng)?;
        for (j, &k) in ancestors.iter().enumerate() {
            let parent = &particles[k];
            let theta = jitter(rng, &shrink(&parent.theta, &mean, a), &chol, kernel_scale);
            let proposal = Particle { h: 0.0, theta };
            let h = proposal.phi0()
                + proposal.phi1() * parent.h
                + proposal.sigma_w2().sqrt() * rng.sample::<f64, _>(StandardNormal);
            next[j] = Particle { h, theta };
            log_w[j] = density.ln_pdf(obs - h) - first_ln[k];
        }
        std::mem::swap(&mut particles, &mut next);
        normalise_log(&log_w, &mut weights, t)?;
        let summary = summarise(&particles, &weights);
        if !(summary.ess >= 2.0) {
            return Err(Error::WeightDegeneracy {
                step: t,
                ess: summary.ess,
            });
        }
        if !summary.h_mean.is_finite() {
            return Err(Error::Degenerate {
                step: t,
                detail: "non-finite state mean".into(),
            });
        }
        steps.push(summary);
    }

    let cloud = ParticleCloud {
        particles,
        weights,
        shrinkage: a,
    };
    let posterior = |f: &dyn Fn(&Particle) -> f64| {
        let q = cloud.weighted_quantiles(f, &[0.025, 0.5, 0.975]);
        ParamPosterior {
            mean: cloud.weighted_mean(f),
            q025: q[0],
            median: q[1],
            q975: q[2],
        }
    };
    Ok(LiuWestOutput {
        steps,
        phi0: posterior(&|p| p.phi0()),
        phi1: posterior(&|p| p.phi1()),
        sigma_w2: posterior(&|p| p.sigma_w2()),
        cloud,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{DiscreteParams, MixtureSpec};
    use crate::statespace::density::LOGCHI2_VARIANCE;
    use crate::statespace::{kf_filter, log_square_transform, StatePrior};

    #[test]
    fn uniform_weights_give_uniform_indices() {
        let mut rng = rng_from_seed(1);
        let cells = 20;
        let weights = vec![1.0; cells];
        let mut counts = vec![0usize; cells];
        for _ in 0..(100_000 / cells) {
            for idx in resample(&weights, Resampling::Multinomial, &mut rng).unwrap() {
                counts[idx] += 1;
            }
        }
        let expected = 100_000.0 / cells as f64;
        let chi2: f64 = counts
            .iter()
            .map(|c| (*c as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of chi-square with 19 degrees of freedom.
        assert!(chi2 < 36.19, "chi2 {chi2}");
    }

    #[test]
    fn one_hot_and_zero_weights() {
        let mut rng = rng_from_seed(2);
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let idx = resample(&[0.0, 0.0, 3.0, 0.0], scheme, &mut rng).unwrap();
            assert_eq!(idx, vec![2; 4]);
            assert!(resample(&[0.0, 0.0], scheme, &mut rng).is_err());
        }
    }

    #[test]
    fn systematic_has_lower_count_variance() {
        let mut rng = rng_from_seed(3);
        let weights: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let reps = 2000;
        let spread = |scheme: Resampling, rng: &mut StreamRng| {
            let mut sq = vec![0.0; weights.len()];
            for _ in 0..reps {
                let mut counts = vec![0.0; weights.len()];
                for i in resample(&weights, scheme, rng).unwrap() {
                    counts[i] += 1.0;
                }
                for (k, c) in counts.iter().enumerate() {
                    sq[k] += (c - 50.0 * weights[k] / total).powi(2);
                }
            }
            sq.iter().sum::<f64>() / reps as f64
        };
        let sys = spread(Resampling::Systematic, &mut rng);
        let multi = spread(Resampling::Multinomial, &mut rng);
        assert!(sys <= multi, "{sys} > {multi}");
    }

    #[test]
    fn kernel_preserves_first_two_moments() {
        let mut rng = rng_from_seed(4);
        let l = 5000;
        let cloud: Vec<Particle> = (0..l)
            .map(|_| Particle {
                h: 0.0,
                theta: [
                    rng.random_range(-1.0..1.0),
                    2.0 + rng.sample::<f64, _>(StandardNormal),
                    rng.random_range(-4.0..-2.0),
                ],
            })
            .collect();
        let weights = vec![1.0 / l as f64; l];
        let (mean0, cov0) = parameter_moments(&cloud, &weights);
        let rounds = 200;
        let (mut mean_acc, mut cov_acc) = ([0.0; 3], [[0.0; 3]; 3]);
        for _ in 0..rounds {
            let mut moved = cloud.clone();
            kernel_propagate(&mut moved, &weights, 0.98, &mut rng);
            let (m, c) = parameter_moments(&moved, &weights);
            for r in 0..3 {
                mean_acc[r] += m[r] / rounds as f64;
                for k in 0..3 {
                    cov_acc[r][k] += c[r][k] / rounds as f64;
                }
            }
        }
        for r in 0..3 {
            assert!(
                (mean_acc[r] - mean0[r]).abs() < 0.05 * cov0[r][r].sqrt(),
                "mean {r}"
            );
            assert!(
                (cov_acc[r][r] / cov0[r][r] - 1.0).abs() < 0.05,
                "variance {r}"
            );
        }
    }

    #[test]
    fn point_mass_prior_stays_fixed() {
        let mut rng = rng_from_seed(5);
        let e: Vec<f64> = (0..100)
            .map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = log_square_transform(&e, 1e-12).unwrap().y;
        let prior = PointMassPrior {
            phi0: -0.1,
            phi1: 0.95,
            sigma_w2: 0.05,
            h_mean: -2.0,
            h_var: 1.0,
        };
        let cfg = LiuWestConfig {
            particles: 500,
            shrinkage: 0.999_999,
            seed: 1,
            ..LiuWestConfig::default()
        };
        let out = lw_filter(&y, &prior, &cfg).unwrap();
        let reference = Particle::new(0.0, -0.1, 0.95, 0.05).theta;
        assert!(out.cloud.particles.iter().all(|p| p.theta == reference));
        for s in &out.steps {
            assert!(s.ess >= 2.0);
        }
        let w: f64 = out.cloud.weights.iter().sum();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gaussian_observation_tracks_kalman_filter() {
        let mut rng = rng_from_seed(6);
        let (phi0, phi1, sw2): (f64, f64, f64) = (-0.05, 0.95, 0.1);
        let mut h = phi0 / (1.0 - phi1);
        let y: Vec<f64> = (0..300)
            .map(|_| {
                h = phi0 + phi1 * h + sw2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                h + LOGCHI2_MEAN + LOGCHI2_VARIANCE.sqrt() * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        let (m0, c0) = (-1.0, 1.0);
        let l = 5000;
        let prior = PointMassPrior {
            phi0,
            phi1,
            sigma_w2: sw2,
            h_mean: m0,
            h_var: c0,
        };
        let cfg = LiuWestConfig {
            particles: l,
            density: ObservationDensity::moment_matched_gaussian(),
            seed: 2,
            ..LiuWestConfig::default()
        };
        let pf = lw_filter(&y, &prior, &cfg).unwrap();

        let mut series = log_square_transform(&[1.0; 300], 1e-12).unwrap();
        series.y = y.clone();
        let mix = MixtureSpec::single(LOGCHI2_MEAN, LOGCHI2_VARIANCE).unwrap();
        let kf = kf_filter(
            &series,
            &DiscreteParams::new(phi0, phi1, sw2),
            &mix,
            StatePrior::new(m0, c0).unwrap(),
        )
        .unwrap();
        let rmse = (pf
            .steps
            .iter()
            .zip(&kf.h_filt)
            .map(|(s, k)| (s.h_mean - k).powi(2))
            .sum::<f64>()
            / y.len() as f64)
            .sqrt();
        assert!(rmse <= 3.0 / (l as f64).sqrt(), "rmse {rmse}");
    }

    #[test]
    fn deterministic_and_validated() {
        let mut rng = rng_from_seed(7);
        let e: Vec<f64> = (0..60)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = log_square_transform(&e, 1e-12).unwrap().y;
        let prior = DiffusePrior::for_observations(&y);
        let cfg = LiuWestConfig {
            particles: 300,
            seed: 4,
            ..LiuWestConfig::default()
        };
        assert_eq!(
            lw_filter(&y, &prior, &cfg).unwrap(),
            lw_filter(&y, &prior, &cfg).unwrap()
        );
        assert!(lw_filter(
            &y,
            &prior,
            &LiuWestConfig {
                particles: 50,
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(lw_filter(
            &y,
            &prior,
            &LiuWestConfig {
                shrinkage: 1.0,
                ..cfg
            }
        )
        .is_err());
    }
}
