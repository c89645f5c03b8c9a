//! Maximum likelihood for the mixture Kalman filter.
//!
//! The search runs in unconstrained coordinates: `phi1 = tanh(u)`, every
//! variance is `exp(v)` and the shock correlation is `tanh(w)`. Coordinates are
//! laid out as
//! `[phi0, u, log sigma_w2, (mu1, log s0^2, log s1^2), (gamma), (w)]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::models::{DiscreteParams, MixtureSpec, ModelSpec, ParamVector};
use crate::rng::rng_from_seed;
use crate::simulate::Path;

use super::filter::{check_rho, run_filter, FilterOutput, Observations, StatePrior, Transition};
use super::linearize::{linearize_path, DriftFit, LinearizedSeries};
use super::optim::{hessian, nelder_mead, Minimum, NelderMeadOptions};
use super::{kf_corr_filter, kf_filter};

/// Which observation-error mixture the likelihood uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureMode {
    /// Two equally weighted components, first mean fixed at 0; means and variances estimated.
    TwoMix,
    /// The fixed seven-component approximation.
    SevenMix,
}

impl MixtureMode {
    pub fn name(&self) -> &'static str {
        match self {
            Self::TwoMix => "two_mix",
            Self::SevenMix => "seven_mix",
        }
    }
}

/// Treatment of the level exponent in the offset `2 gamma log r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelExponent {
    /// No level regressor.
    Absent,
    Fixed(f64),
    /// Profile over a grid, then refine jointly.
    Profile {
        lo: f64,
        hi: f64,
        step: f64,
    },
    /// Joint local search from the initial value, restricted to `[lo, hi]`.
    Local {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleOptions {
    pub mode: MixtureMode,
    pub level: LevelExponent,
    pub multistarts: usize,
    pub nelder_mead: NelderMeadOptions,
    pub seed: u64,
    /// Overrides the moment-based prior for the first log-variance.
    pub prior: Option<StatePrior>,
    pub standard_errors: bool,
    pub init: Option<KfParams>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            mode: MixtureMode::SevenMix,
            level: LevelExponent::Absent,
            multistarts: 5,
            nelder_mead: NelderMeadOptions::default(),
            seed: 0,
            prior: None,
            standard_errors: true,
            init: None,
        }
    }
}

impl MleOptions {
    /// Profiles `gamma` over `[0, 3]` when the model has a level effect.
    pub fn for_spec(spec: &ModelSpec, mode: MixtureMode) -> Self {
        let level = if spec.has_level_effect() {
            LevelExponent::Profile {
                lo: 0.0,
                hi: 3.0,
                step: 0.01,
            }
        } else {
            LevelExponent::Absent
        };
        Self {
            mode,
            level,
            ..Self::default()
        }
    }

    /// Single local search warm-started at `previous`, as used for bootstrap refits.
    pub fn warm_start(&self, previous: &KfParams) -> Self {
        Self {
            level: self.level.localized(),
            multistarts: 1,
            standard_errors: false,
            init: Some(previous.clone()),
            ..self.clone()
        }
    }
}

impl LevelExponent {
    fn localized(self) -> Self {
        match self {
            Self::Profile { lo, hi, .. } => Self::Local { lo, hi },
            other => other,
        }
    }
}

/// Parameters of the linearised model.
#[derive(Debug, Clone, PartialEq)]
pub struct KfParams {
    pub discrete: DiscreteParams,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub mixture: MixtureSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StdErrors {
    pub phi0: f64,
    pub phi1: f64,
    pub sigma_w2: f64,
    /// `(mu1, s0^2, s1^2)` for the two-component mixture.
    pub mixture: Option<[f64; 3]>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub params: KfParams,
    pub loglik: f64,
    pub initial_loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `|phi1|` or `sigma_w2` pinned at the edge of the search region.
    pub at_boundary: bool,
    pub std_errors: Option<StdErrors>,
    /// `(gamma, max loglik)` along the profile grid, when profiled.
    pub gamma_profile: Vec<(f64, f64)>,
}

impl MleResult {
    /// Flat `key=value` lines.
    pub fn report(&self) -> String {
        let p = &self.params;
        let mut lines = vec![
            format!("phi0={:.10e}", p.discrete.phi0),
            format!("phi1={:.10e}", p.discrete.phi1()),
            format!("sigma_w2={:.10e}", p.discrete.sigma_w2),
        ];
        if let Some(g) = p.gamma {
            lines.push(format!("gamma={g:.10e}"));
        }
        if let Some(r) = p.rho {
            lines.push(format!("rho_corr={r:.10e}"));
        }
        if p.mixture.len() == 2 {
            lines.push(format!("mix_mu1={:.10e}", p.mixture.means()[1]));
            lines.push(format!("mix_var0={:.10e}", p.mixture.variances()[0]));
            lines.push(format!("mix_var1={:.10e}", p.mixture.variances()[1]));
        }
        lines.push(format!("loglik={:.10e}", self.loglik));
        lines.push(format!("converged={}", self.converged));
        lines.push(format!("iterations={}", self.iterations));
        lines.push(format!("at_boundary={}", self.at_boundary));
        if let Some(se) = &self.std_errors {
            lines.push(format!("se_phi0={:.6e}", se.phi0));
            lines.push(format!("se_phi1={:.6e}", se.phi1));
            lines.push(format!("se_sigma_w2={:.6e}", se.sigma_w2));
            if let Some(g) = se.gamma {
                lines.push(format!("se_gamma={g:.6e}"));
            }
            if let Some(r) = se.rho {
                lines.push(format!("se_rho_corr={r:.6e}"));
            }
            if let Some(m) = se.mixture {
                lines.push(format!("se_mix_mu1={:.6e}", m[0]));
                lines.push(format!("se_mix_var0={:.6e}", m[1]));
                lines.push(format!("se_mix_var1={:.6e}", m[2]));
            }
        }
        lines.join("\n") + "\n"
    }
}

/// Sample moments of `y` and `log r` so the prior can be rebuilt for any `gamma` in O(1).
#[derive(Clone, Copy)]
struct Moments {
    mean_y: f64,
    mean_l: f64,
    var_y: f64,
    cov_yl: f64,
    var_l: f64,
}

impl Moments {
    fn of(y: &[f64], log_level: Option<&[f64]>) -> Self {
        let n = y.len() as f64;
        let mean_y = y.iter().sum::<f64>() / n;
        let dof = (n - 1.0).max(1.0);
        let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / dof;
        match log_level {
            None => Self {
                mean_y,
                mean_l: 0.0,
                var_y,
                cov_yl: 0.0,
                var_l: 0.0,
            },
            Some(l) => {
                let mean_l = l.iter().sum::<f64>() / n;
                let cov_yl = y
                    .iter()
                    .zip(l)
                    .map(|(a, b)| (a - mean_y) * (b - mean_l))
                    .sum::<f64>()
                    / dof;
                let var_l = l.iter().map(|b| (b - mean_l).powi(2)).sum::<f64>() / dof;
                Self {
                    mean_y,
                    mean_l,
                    var_y,
                    cov_yl,
                    var_l,
                }
            }
        }
    }

    fn prior(&self, gamma: f64, mix_mean: f64) -> StatePrior {
        let c = 2.0 * gamma;
        let variance = (self.var_y - 2.0 * c * self.cov_yl + c * c * self.var_l).max(0.0);
        StatePrior {
            mean: self.mean_y - c * self.mean_l - mix_mean,
            variance,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum GammaSlot {
    Absent,
    Fixed(f64),
    Free { lo: f64, hi: f64 },
}

/// A likelihood surface over the search coordinates.
struct Problem<'a> {
    y: &'a [f64],
    log_level: Option<&'a [f64]>,
    residuals: &'a [f64],
    mode: MixtureMode,
    gamma: GammaSlot,
    corr: bool,
    moments: Moments,
    prior: Option<StatePrior>,
    seven: MixtureSpec,
}

impl<'a> Problem<'a> {
    fn new(
        series: &'a LinearizedSeries,
        mode: MixtureMode,
        gamma: GammaSlot,
        corr: bool,
        prior: Option<StatePrior>,
    ) -> Self {
        Self {
            y: &series.y,
            log_level: series.log_level(),
            residuals: &series.residuals,
            mode,
            gamma,
            corr,
            moments: Moments::of(&series.y, series.log_level()),
            prior,
            seven: MixtureSpec::seven_component(),
        }
    }

    fn dim(&self) -> usize {
        3 + if self.mode == MixtureMode::TwoMix {
            3
        } else {
            0
        } + usize::from(self.gamma_free())
            + usize::from(self.corr)
    }

    fn gamma_index(&self) -> Option<usize> {
        self.gamma_free()
            .then(|| self.dim() - 1 - usize::from(self.corr))
    }

    fn gamma_free(&self) -> bool {
        matches!(self.gamma, GammaSlot::Free { .. })
    }

    fn encode(&self, p: &KfParams) -> Vec<f64> {
        let mut u = vec![
            p.discrete.phi0,
            p.discrete.phi1().clamp(-0.999_999, 0.999_999).atanh(),
            p.discrete.sigma_w2.max(1e-12).ln(),
        ];
        if self.mode == MixtureMode::TwoMix {
            let (m, v) = (p.mixture.means(), p.mixture.variances());
            let (mu1, v0, v1) = if p.mixture.len() == 2 {
                (m[1], v[0], v[1])
            } else {
                default_two_mix()
            };
            u.extend([mu1, v0.ln(), v1.ln()]);
        }
        if self.gamma_free() {
            u.push(p.gamma.unwrap_or(1.0));
        }
        if self.corr {
            u.push(p.rho.unwrap_or(0.0).clamp(-0.99, 0.99).atanh());
        }
        u
    }

    fn decode(&self, u: &[f64]) -> Option<KfParams> {
        let phi1 = u[1].tanh();
        let discrete = DiscreteParams::new(u[0], phi1, u[2].exp());
        let mut k = 3;
        let mixture = match self.mode {
            MixtureMode::SevenMix => self.seven.clone(),
            MixtureMode::TwoMix => {
                k = 6;
                MixtureSpec::two_component(u[3], u[4].exp(), u[5].exp()).ok()?
            }
        };
        let gamma = match self.gamma {
            GammaSlot::Absent => None,
            GammaSlot::Fixed(g) => Some(g),
            GammaSlot::Free { lo, hi } => {
                k += 1;
                if !(lo..=hi).contains(&u[k - 1]) {
                    return None;
                }
                Some(u[k - 1])
            }
        };
        let rho = self.corr.then(|| u[k].tanh());
        Some(KfParams {
            discrete,
            gamma,
            rho,
            mixture,
        })
    }

    fn loglik_of(&self, p: &KfParams) -> Result<f64> {
        let gamma = p.gamma.unwrap_or(0.0);
        let prior = self
            .prior
            .unwrap_or_else(|| self.moments.prior(gamma, p.mixture.mean()));
        let obs = Observations {
            y: self.y,
            log_level: self.log_level,
            gamma,
        };
        let transition = match p.rho {
            Some(rho) => {
                check_rho(rho)?;
                Transition::Leverage {
                    rho,
                    residuals: self.residuals,
                }
            }
            None => Transition::Linear,
        };
        run_filter(obs, &p.discrete, &p.mixture, prior, transition, &mut ())
    }

    fn objective(&self, u: &[f64]) -> f64 {
        if u.iter().any(|x| !x.is_finite()) {
            return f64::INFINITY;
        }
        match self.decode(u).map(|p| self.loglik_of(&p)) {
            Some(Ok(ll)) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    }

    fn initial_step(&self) -> Vec<f64> {
        let mut s = vec![0.05, 0.3, 0.5];
        if self.mode == MixtureMode::TwoMix {
            s.extend([0.3, 0.3, 0.3]);
        }
        if self.gamma_free() {
            s.push(0.1);
        }
        if self.corr {
            s.push(0.3);
        }
        s
    }

    /// Minimises with the coordinate at `fixed.0` pinned to `fixed.1`.
    fn minimize_with_fixed(
        &self,
        start: &[f64],
        fixed: Option<(usize, f64)>,
        step: &[f64],
        opts: NelderMeadOptions,
    ) -> Minimum {
        match fixed {
            None => nelder_mead(|u| self.objective(u), start, step, opts),
            Some((idx, value)) => {
                let pick = |v: &[f64]| -> Vec<f64> {
                    v.iter()
                        .enumerate()
                        .filter(|(i, _)| *i != idx)
                        .map(|(_, x)| *x)
                        .collect()
                };
                let expand = |v: &[f64]| -> Vec<f64> {
                    let mut full = v.to_vec();
                    full.insert(idx, value);
                    full
                };
                let m = nelder_mead(
                    |v| self.objective(&expand(v)),
                    &pick(start),
                    &pick(step),
                    opts,
                );
                Minimum {
                    x: expand(&m.x),
                    ..m
                }
            }
        }
    }

    fn std_errors(&self, u: &[f64]) -> Option<StdErrors> {
        let h = hessian(|v| self.objective(v), u, 1e-4);
        if h.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let cov = h.cholesky()?.inverse();
        let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
        let mut se = StdErrors {
            phi0: sd(0),
            phi1: (1.0 - u[1].tanh().powi(2)) * sd(1),
            sigma_w2: u[2].exp() * sd(2),
            mixture: None,
            gamma: None,
            rho: None,
        };
        if self.mode == MixtureMode::TwoMix {
            se.mixture = Some([sd(3), u[4].exp() * sd(4), u[5].exp() * sd(5)]);
        }
        if let Some(g) = self.gamma_index() {
            se.gamma = Some(sd(g));
        }
        if self.corr {
            let k = self.dim() - 1;
            se.rho = Some((1.0 - u[k].tanh().powi(2)) * sd(k));
        }
        Some(se)
    }
}

fn default_two_mix() -> (f64, f64, f64) {
    (-2.5, 1.0, 5.5)
}

fn initial_mixture(mode: MixtureMode) -> MixtureSpec {
    match mode {
        MixtureMode::SevenMix => MixtureSpec::seven_component(),
        MixtureMode::TwoMix => {
            let (mu1, v0, v1) = default_two_mix();
            MixtureSpec::two_component(mu1, v0, v1).expect("default two-component mixture is valid")
        }
    }
}

/// Moment-based starting point for a given level exponent.
pub fn default_init(series: &LinearizedSeries, mode: MixtureMode, gamma: Option<f64>) -> KfParams {
    let mixture = initial_mixture(mode);
    let moments = Moments::of(&series.y, series.log_level());
    let prior = moments.prior(gamma.unwrap_or(0.0), mixture.mean());
    let phi1 = 0.95;
    let sigma_w2 = ((prior.variance - mixture.variance()) * (1.0 - phi1 * phi1)).max(0.01);
    KfParams {
        discrete: DiscreteParams::new((1.0 - phi1) * prior.mean, phi1, sigma_w2),
        gamma,
        rho: None,
        mixture,
    }
}

fn check_init(p: &KfParams) -> Result<()> {
    let d = &p.discrete;
    if !d.phi0.is_finite()
        || !(d.phi1().abs() < 1.0)
        || !(d.sigma_w2 > 0.0)
        || !d.sigma_w2.is_finite()
    {
        return Err(Error::domain(
            "init",
            format!(
                "need finite phi0, |phi1| < 1 and sigma_w2 > 0; got ({}, {}, {})",
                d.phi0,
                d.phi1(),
                d.sigma_w2
            ),
        ));
    }
    if let Some(g) = p.gamma {
        if !g.is_finite() {
            return Err(Error::domain("init", "gamma must be finite"));
        }
    }
    if let Some(r) = p.rho {
        check_rho(r)?;
    }
    Ok(())
}

fn perturb(rng: &mut impl Rng, base: &[f64], problem: &Problem<'_>) -> Vec<f64> {
    let mut u = base.to_vec();
    let mean_level = base[0] / (1.0 - base[1].tanh()).max(1e-6);
    let z = |rng: &mut dyn rand::RngCore| -> f64 { rng.sample(StandardNormal) };
    u[1] = (base[1] + 0.5 * z(rng)).clamp(-5.0, 5.0);
    u[2] = base[2] + z(rng);
    u[0] = (1.0 - u[1].tanh()) * (mean_level + 0.5 * z(rng));
    if problem.mode == MixtureMode::TwoMix {
        for k in 3..6 {
            u[k] = base[k] + 0.3 * z(rng);
        }
    }
    if let Some(g) = problem.gamma_index() {
        u[g] = base[g] + 0.1 * z(rng);
    }
    if problem.corr {
        let k = problem.dim() - 1;
        u[k] = 0.7 * z(rng);
    }
    u
}

fn gamma_slot(level: LevelExponent) -> GammaSlot {
    match level {
        LevelExponent::Absent => GammaSlot::Absent,
        LevelExponent::Fixed(g) => GammaSlot::Fixed(g),
        LevelExponent::Profile { lo, hi, .. } | LevelExponent::Local { lo, hi } => {
            GammaSlot::Free { lo, hi }
        }
    }
}

fn optimise(problem: &Problem<'_>, init: &KfParams, opts: &MleOptions) -> Result<MleResult> {
    check_init(init)?;
    let start = problem.encode(init);
    let initial_loglik = -problem.objective(&start);
    if !initial_loglik.is_finite() {
        return Err(Error::domain(
            "init",
            "log-likelihood is not finite at the initial point",
        ));
    }
    let step = problem.initial_step();
    let mut rng = rng_from_seed(opts.seed);

    let mut gamma_profile = Vec::new();
    let mut anchor = start.clone();
    if let (
        LevelExponent::Profile {
            lo,
            hi,
            step: grid_step,
        },
        Some(g),
    ) = (opts.level, problem.gamma_index())
    {
        if !(grid_step > 0.0) || !(hi >= lo) {
            return Err(Error::domain(
                "gamma grid",
                format!("need lo <= hi and step > 0; got [{lo}, {hi}] by {grid_step}"),
            ));
        }
        // The profile only selects the anchor of the joint refinement, so it is solved loosely.
        let profile_opts = NelderMeadOptions {
            max_iter: 400,
            xtol: 1e-3,
            ftol: 1e-5,
        };
        let fine_step: Vec<f64> = step.iter().map(|s| s * 0.05).collect();
        let points = ((hi - lo) / grid_step + 1e-9).floor() as usize + 1;
        let mut warm = start.clone();
        let mut best = (f64::INFINITY, warm.clone());
        for k in 0..points {
            let gamma = lo + k as f64 * grid_step;
            warm[g] = gamma;
            let s = if k == 0 { &step } else { &fine_step };
            let m = problem.minimize_with_fixed(&warm, Some((g, gamma)), s, profile_opts);
            gamma_profile.push((gamma, -m.value));
            if m.value.is_finite() {
                warm = m.x.clone();
            }
            if m.value < best.0 {
                best = (m.value, m.x);
            }
        }
        anchor = best.1;
    }

    let mut starts = vec![anchor.clone()];
    if anchor != start {
        starts.push(start.clone());
    }
    while starts.len() < opts.multistarts.max(1) {
        starts.push(perturb(&mut rng, &anchor, problem));
    }

    let mut best: Option<Minimum> = None;
    let mut iterations = 0;
    for s in &starts {
        let m = problem.minimize_with_fixed(s, None, &step, opts.nelder_mead);
        iterations += m.iterations;
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::Estimation(
            "no start reached a finite log-likelihood".into(),
        ));
    }
    let params = problem
        .decode(&best.x)
        .ok_or_else(|| Error::Estimation("optimum left the parameter space".into()))?;
    let at_boundary = params.discrete.phi1().abs() > 1.0 - 1e-6 || params.discrete.sigma_w2 < 1e-8;
    let std_errors = if opts.standard_errors {
        problem.std_errors(&best.x)
    } else {
        None
    };
    Ok(MleResult {
        params,
        loglik: -best.value,
        initial_loglik,
        converged: best.converged,
        iterations,
        at_boundary,
        std_errors,
        gamma_profile,
    })
}

/// Maximises the mixture-filter likelihood of `series`.
///
/// The series' own level exponent is ignored; `opts.level` decides how `gamma` is handled.
pub fn kf_mle(series: &LinearizedSeries, opts: &MleOptions) -> Result<MleResult> {
    if series.len() < 20 {
        return Err(Error::Length(format!(
            "likelihood fit needs at least 20 observations, got {}",
            series.len()
        )));
    }
    let slot = gamma_slot(opts.level);
    if slot != GammaSlot::Absent && !series.has_level() {
        return Err(Error::Config(
            "a level exponent needs a series with lagged levels".into(),
        ));
    }
    let problem = Problem::new(series, opts.mode, slot, false, opts.prior);
    let init_gamma = match slot {
        GammaSlot::Absent => None,
        GammaSlot::Fixed(g) => Some(g),
        GammaSlot::Free { lo, hi } => Some(
            opts.init
                .as_ref()
                .and_then(|p| p.gamma)
                .unwrap_or(1.0)
                .clamp(lo, hi),
        ),
    };
    let init = match &opts.init {
        Some(p) => KfParams {
            gamma: init_gamma,
            rho: None,
            ..p.clone()
        },
        None => default_init(series, opts.mode, init_gamma),
    };
    optimise(&problem, &init, opts)
}

/// Likelihood fit with correlated level and volatility shocks.
///
/// Starts from `start` (typically a [`kf_mle`] fit) with `gamma` searched locally.
pub fn kf_corr_mle(
    series: &LinearizedSeries,
    start: &KfParams,
    opts: &MleOptions,
) -> Result<MleResult> {
    if series.len() < 20 {
        return Err(Error::Length(format!(
            "likelihood fit needs at least 20 observations, got {}",
            series.len()
        )));
    }
    let level = opts.level.localized();
    let slot = gamma_slot(level);
    if slot != GammaSlot::Absent && !series.has_level() {
        return Err(Error::Config(
            "a level exponent needs a series with lagged levels".into(),
        ));
    }
    let problem = Problem::new(series, opts.mode, slot, true, opts.prior);
    let gamma = match slot {
        GammaSlot::Absent => None,
        GammaSlot::Fixed(g) => Some(g),
        GammaSlot::Free { lo, hi } => Some(start.gamma.unwrap_or(1.0).clamp(lo, hi)),
    };
    let init = KfParams {
        gamma,
        rho: Some(start.rho.unwrap_or(0.0)),
        ..start.clone()
    };
    optimise(
        &problem,
        &init,
        &MleOptions {
            level,
            ..opts.clone()
        },
    )
}

/// Full fit of one observed path: drift regression, linearisation, likelihood and filter.
#[derive(Debug, Clone)]
pub struct PathFit {
    pub drift: DriftFit,
    pub series: LinearizedSeries,
    pub mle: MleResult,
    pub filter: FilterOutput,
    pub theta: ParamVector,
}

impl PathFit {
    pub fn prior(&self) -> StatePrior {
        StatePrior::from_series(&self.series, &self.mle.params.mixture)
    }
}

/// Fits `spec` to `path`. Correlated families add the leverage refinement.
pub fn fit_path(path: &Path, spec: &ModelSpec, opts: &MleOptions) -> Result<PathFit> {
    let (drift, series) = linearize_path(path, spec.has_level_effect(), 0.0)?;
    fit_linearized(drift, series, path.delta, spec, opts)
}

/// Fits an already linearised series; `drift` supplies the level-equation estimates.
pub fn fit_linearized(
    drift: DriftFit,
    mut series: LinearizedSeries,
    delta: f64,
    spec: &ModelSpec,
    opts: &MleOptions,
) -> Result<PathFit> {
    let level = if spec.has_level_effect() {
        opts.level
    } else {
        LevelExponent::Absent
    };
    let opts = MleOptions {
        level,
        ..opts.clone()
    };
    let mut mle = kf_mle(&series, &opts)?;
    if spec.has_correlation() {
        let corr = kf_corr_mle(&series, &mle.params, &opts)?;
        mle = MleResult {
            initial_loglik: mle.initial_loglik,
            gamma_profile: mle.gamma_profile,
            ..corr
        };
    }
    let params = &mle.params;
    series.set_gamma(params.gamma.unwrap_or(0.0));
    let prior = opts
        .prior
        .unwrap_or_else(|| StatePrior::from_series(&series, &params.mixture));
    let filter = match params.rho {
        Some(rho) => kf_corr_filter(&series, &params.discrete, rho, &params.mixture, prior)?,
        None => kf_filter(&series, &params.discrete, &params.mixture, prior)?,
    };
    let (theta0, theta1, xi) = params.discrete.to_continuous(delta)?;
    let mut theta = ParamVector {
        alpha: drift.alpha,
        beta: drift.beta,
        gamma: params.gamma,
        theta0,
        theta1,
        xi,
        rho_corr: None,
    };
    if spec.has_level_effect() && theta.gamma.is_none() {
        theta.gamma = Some(0.0);
    }
    if let Some(r) = params.rho {
        theta = theta.with_correlation(r);
    }
    Ok(PathFit {
        drift,
        series,
        mle,
        filter,
        theta,
    })
}
