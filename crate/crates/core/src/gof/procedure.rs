//! Bootstrap-calibrated goodness-of-fit tests for the drift and the diffusion scale.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::rng::{stream, StreamRng};
use crate::simulate::{fmt17, Path};
use crate::statespace::{
    fit_linearized, fit_path, log_square_transform, ols_drift_on, volatility_estimate, DriftFit,
    KfParams, MixtureMode, MleOptions, PathFit,
};

use super::bootstrap::{bootstrap_resample, BootstrapSample, InnovationRecord};
use super::marks::{difference_quotients, drift_marks_from, vol_marks, vol_marks_from_squares};
use super::process::{process_eval, Coordinates, EvalMode, Functional, MarkedProcessEval};

pub const MIN_BOOTSTRAP: usize = 100;
pub const MIN_OBSERVATIONS: usize = 100;
/// Share of dropped bootstrap replicates above which a warning is attached.
pub const DROP_WARNING_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    /// Tests the drift form through `u - m1(r)`.
    Drift,
    /// Tests the diffusion scale through `(u - m1(r))^2 - sigma^2 nu1(r)^2 / dt`.
    Volatility,
}

impl TestKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Drift => "drift",
            Self::Volatility => "vol",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "drift" => Ok(Self::Drift),
            "vol" | "volatility" => Ok(Self::Volatility),
            other => Err(Error::Config(format!(
                "unknown test kind `{other}`, expected drift or vol"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GofConfig {
    pub kind: TestKind,
    pub functionals: Vec<Functional>,
    /// Bootstrap replicates `B`.
    pub bootstrap: usize,
    /// Nominal level `alpha`.
    pub level: f64,
    pub seed: u64,
    /// Likelihood settings for the fit under the null; replicates warm-start from it.
    pub mle: MleOptions,
    pub eval_mode: EvalMode,
}

impl GofConfig {
    /// Both functionals, seven-component likelihood, `gamma` profiled when the null has a level effect.
    pub fn new(kind: TestKind, null: &ModelSpec, bootstrap: usize, level: f64, seed: u64) -> Self {
        let mle = MleOptions {
            standard_errors: false,
            seed,
            ..MleOptions::for_spec(null, MixtureMode::SevenMix)
        };
        Self {
            kind,
            functionals: Functional::ALL.to_vec(),
            bootstrap,
            level,
            seed,
            mle,
            eval_mode: EvalMode::Observed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bootstrap < MIN_BOOTSTRAP {
            return Err(Error::Config(format!(
                "need at least {MIN_BOOTSTRAP} bootstrap replicates, got {}",
                self.bootstrap
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.functionals.is_empty() {
            return Err(Error::Config("no functional selected".into()));
        }
        Ok(())
    }
}

/// Outcome of one functional.
#[derive(Debug, Clone, PartialEq)]
pub struct GofResult {
    pub kind: TestKind,
    pub functional: Functional,
    pub statistic: f64,
    /// Replicate statistics in replicate order; dropped replicates are absent.
    pub bootstrap_statistics: Vec<f64>,
    pub requested: usize,
    pub dropped: usize,
    /// `#{U* > U} / B_eff`.
    pub p_value: f64,
    pub level: f64,
    /// Order statistic `ceil(B_eff (1 - alpha))` of the replicate statistics.
    pub critical_value: f64,
    /// `U > c*`.
    pub reject: bool,
    pub theta_hat: ParamVector,
    /// Mean of the refitted parameters over the kept replicates.
    pub theta_star_mean: ParamVector,
    pub warning: Option<String>,
}

impl GofResult {
    pub fn effective_replicates(&self) -> usize {
        self.bootstrap_statistics.len()
    }

    /// Flat `key=value` lines.
    pub fn report(&self) -> String {
        let mut out = format!(
            "test={}\nfunctional={}\nstatistic={:.10e}\nbootstrap_requested={}\nbootstrap_effective={}\nbootstrap_dropped={}\n\
             p_value={:.6}\nlevel={}\ncritical_value={:.10e}\nreject={}\n",
            self.kind.name(),
            self.functional.name(),
            self.statistic,
            self.requested,
            self.effective_replicates(),
            self.dropped,
            self.p_value,
            self.level,
            self.critical_value,
            self.reject
        );
        for (prefix, theta) in [
            ("theta_hat", &self.theta_hat),
            ("theta_star_mean", &self.theta_star_mean),
        ] {
            out += &param_lines(prefix, theta);
        }
        if let Some(w) = &self.warning {
            out += &format!("warning={w}\n");
        }
        out
    }

    /// Writes `replicate,statistic`.
    pub fn write_replicates_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "replicate,statistic")?;
        for (b, s) in self.bootstrap_statistics.iter().enumerate() {
            writeln!(out, "{b},{}", fmt17(*s))?;
        }
        Ok(())
    }
}

pub(crate) fn param_lines(prefix: &str, theta: &ParamVector) -> String {
    let mut out = format!(
        "{prefix}.alpha={:.10e}\n{prefix}.beta={:.10e}\n{prefix}.theta0={:.10e}\n{prefix}.theta1={:.10e}\n{prefix}.xi={:.10e}\n",
        theta.alpha, theta.beta, theta.theta0, theta.theta1, theta.xi
    );
    if let Some(g) = theta.gamma {
        out += &format!("{prefix}.gamma={g:.10e}\n");
    }
    if let Some(r) = theta.rho_corr {
        out += &format!("{prefix}.rho_corr={r:.10e}\n");
    }
    out
}

/// Fit under the null and one result per requested functional.
#[derive(Debug, Clone)]
pub struct GofReport {
    pub fit: PathFit,
    pub results: Vec<GofResult>,
}

impl GofReport {
    pub fn result(&self, functional: Functional) -> Option<&GofResult> {
        self.results.iter().find(|r| r.functional == functional)
    }
}

/// Everything a replicate needs, shared read-only across workers.
struct Context<'a> {
    spec: &'a ModelSpec,
    cfg: &'a GofConfig,
    delta: f64,
    levels: &'a [f64],
    fit: &'a PathFit,
    record: InnovationRecord,
    fitted_drift: Vec<f64>,
    refit: MleOptions,
}

struct Replicate {
    statistics: Vec<f64>,
    theta: ParamVector,
}

impl Context<'_> {
    fn statistics(&self, eval: &MarkedProcessEval) -> Vec<f64> {
        self.cfg.functionals.iter().map(|f| f.apply(eval)).collect()
    }

    fn sample(&self, rng: &mut StreamRng) -> Result<BootstrapSample> {
        let kf = &self.fit.mle.params;
        bootstrap_resample(
            &self.record,
            &kf.discrete,
            &kf.mixture,
            &self.fit.series.level_offset,
            rng,
        )
    }

    fn signed_roots(sample: &BootstrapSample, rng: &mut StreamRng) -> Vec<f64> {
        sample
            .e2
            .iter()
            .map(|e2| {
                if rng.random::<bool>() {
                    e2.sqrt()
                } else {
                    -e2.sqrt()
                }
            })
            .collect()
    }

    fn drift_replicate(&self, rng: &mut StreamRng) -> Result<Replicate> {
        let sample = self.sample(rng)?;
        let errors = Self::signed_roots(&sample, rng);
        let root_dt = self.delta.sqrt();
        let u: Vec<f64> = self
            .fitted_drift
            .iter()
            .zip(&errors)
            .map(|(m, e)| m + e / root_dt)
            .collect();
        let refit = ols_drift_on(self.levels, &u, self.delta)?;
        let theta = ParamVector {
            alpha: refit.alpha,
            beta: refit.beta,
            ..self.fit.theta
        };
        let marks = drift_marks_from(self.levels, &u, self.spec, &theta)?;
        let eval = process_eval(&marks, Coordinates::Level(self.levels), self.cfg.eval_mode)?;
        Ok(Replicate {
            statistics: self.statistics(&eval),
            theta,
        })
    }

    fn volatility_replicate(&self, rng: &mut StreamRng) -> Result<Replicate> {
        let sample = self.sample(rng)?;
        let errors = Self::signed_roots(&sample, rng);
        let mut series = log_square_transform(&errors, f64::MIN_POSITIVE)?;
        series.y.clone_from(&sample.y);
        if self.spec.has_level_effect() {
            series = series.with_level(self.levels, self.fit.series.gamma())?;
        }
        let drift = DriftFit {
            alpha: self.fit.theta.alpha,
            beta: self.fit.theta.beta,
            residuals: errors,
        };
        let refit = fit_linearized(drift, series, self.delta, self.spec, &self.refit)?;
        let sigma2 = volatility_estimate(&refit.filter);
        let marks = vol_marks_from_squares(
            self.levels,
            &sample.e2,
            &sigma2,
            self.spec,
            &refit.theta,
            self.delta,
        )?;
        let eval = process_eval(
            &marks,
            Coordinates::LevelVolatility(self.levels, &sigma2),
            self.cfg.eval_mode,
        )?;
        Ok(Replicate {
            statistics: self.statistics(&eval),
            theta: refit.theta,
        })
    }

    /// Runs replicate `b`, retrying once on a fresh stream.
    fn replicate(&self, b: usize) -> Option<Replicate> {
        (0..2u64).find_map(|attempt| {
            let mut rng = stream(self.cfg.seed, &[b as u64, attempt]);
            let out = match self.cfg.kind {
                TestKind::Drift => self.drift_replicate(&mut rng),
                TestKind::Volatility => self.volatility_replicate(&mut rng),
            };
            out.ok()
                .filter(|r| r.statistics.iter().all(|s| s.is_finite()))
        })
    }
}

/// Observed marks and coordinates under the fitted null.
fn observed_eval(
    path: &Path,
    spec: &ModelSpec,
    fit: &PathFit,
    cfg: &GofConfig,
) -> Result<MarkedProcessEval> {
    let levels = &path.r[..path.steps()];
    match cfg.kind {
        TestKind::Drift => {
            let marks = drift_marks_from(levels, &difference_quotients(path), spec, &fit.theta)?;
            process_eval(&marks, Coordinates::Level(levels), cfg.eval_mode)
        }
        TestKind::Volatility => {
            let sigma2 = volatility_estimate(&fit.filter);
            let marks = vol_marks(path, spec, &fit.theta, &sigma2)?;
            process_eval(
                &marks,
                Coordinates::LevelVolatility(levels, &sigma2),
                cfg.eval_mode,
            )
        }
    }
}

/// `#{U* > U} / B`, the `ceil(B (1 - alpha))` order statistic and `U > c*`.
pub fn bootstrap_decision(
    statistic: f64,
    replicates: &[f64],
    level: f64,
) -> Result<(f64, f64, bool)> {
    if replicates.is_empty() {
        return Err(Error::Estimation("no bootstrap replicate succeeded".into()));
    }
    let b = replicates.len();
    let exceed = replicates.iter().filter(|s| **s > statistic).count();
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((b as f64) * (1.0 - level)).ceil().clamp(1.0, b as f64) as usize;
    let critical = sorted[rank - 1];
    Ok((exceed as f64 / b as f64, critical, statistic > critical))
}

fn mean_theta(thetas: &[ParamVector], fallback: &ParamVector) -> ParamVector {
    if thetas.is_empty() {
        return *fallback;
    }
    let n = thetas.len() as f64;
    let avg = |f: fn(&ParamVector) -> f64| thetas.iter().map(f).sum::<f64>() / n;
    let avg_opt = |f: fn(&ParamVector) -> Option<f64>| {
        thetas.iter().map(f).sum::<Option<f64>>().map(|s| s / n)
    };
    ParamVector {
        alpha: avg(|t| t.alpha),
        beta: avg(|t| t.beta),
        gamma: avg_opt(|t| t.gamma),
        theta0: avg(|t| t.theta0),
        theta1: avg(|t| t.theta1),
        xi: avg(|t| t.xi),
        rho_corr: avg_opt(|t| t.rho_corr),
    }
}

/// Fits `spec` to `path` and calibrates the requested statistics by the state-space bootstrap.
pub fn gof_test(path: &Path, spec: &ModelSpec, cfg: &GofConfig) -> Result<GofReport> {
    cfg.validate()?;
    if path.steps() < MIN_OBSERVATIONS {
        return Err(Error::Config(format!(
            "goodness-of-fit needs at least {MIN_OBSERVATIONS} steps, got {}",
            path.steps()
        )));
    }
    let fit = fit_path(path, spec, &cfg.mle)
        .map_err(|e| Error::Estimation(format!("fit under the null failed: {e}")))?;
    let observed = observed_eval(path, spec, &fit, cfg)?;
    let levels = &path.r[..path.steps()];
    let fitted_drift = levels
        .iter()
        .map(|r| spec.drift(&fit.theta, *r))
        .collect::<Result<Vec<_>>>()?;
    let warm: KfParams = fit.mle.params.clone();
    let ctx = Context {
        spec,
        cfg,
        delta: path.delta,
        levels,
        fit: &fit,
        record: InnovationRecord::from_filter(&fit.filter),
        fitted_drift,
        refit: cfg.mle.warm_start(&warm),
    };

    let replicates: Vec<Option<Replicate>> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| ctx.replicate(b))
        .collect();
    let kept: Vec<&Replicate> = replicates.iter().flatten().collect();
    let dropped = cfg.bootstrap - kept.len();
    let warning = (dropped as f64 > DROP_WARNING_RATE * cfg.bootstrap as f64).then(|| {
        format!(
            "{dropped} of {} bootstrap replicates failed twice and were dropped",
            cfg.bootstrap
        )
    });
    let thetas: Vec<ParamVector> = kept.iter().map(|r| r.theta).collect();
    let theta_star_mean = mean_theta(&thetas, &fit.theta);

    let results = cfg
        .functionals
        .iter()
        .enumerate()
        .map(|(k, functional)| {
            let statistic = functional.apply(&observed);
            let stats: Vec<f64> = kept.iter().map(|r| r.statistics[k]).collect();
            let (p_value, critical_value, reject) =
                bootstrap_decision(statistic, &stats, cfg.level)?;
            Ok(GofResult {
                kind: cfg.kind,
                functional: *functional,
                statistic,
                bootstrap_statistics: stats,
                requested: cfg.bootstrap,
                dropped,
                p_value,
                level: cfg.level,
                critical_value,
                reject,
                theta_hat: fit.theta,
                theta_star_mean,
                warning: warning.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GofReport { fit, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_path, SimConfig};

    #[test]
    fn decision_lattice_and_order_statistic() {
        let reps: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let (p, c, reject) = bootstrap_decision(95.5, &reps, 0.05).unwrap();
        assert_eq!(p, 0.05);
        assert_eq!(c, 95.0);
        assert!(reject);
        let (p, _, reject) = bootstrap_decision(95.0, &reps, 0.05).unwrap();
        assert_eq!(p, 0.05);
        assert!(!reject);
        let (p, _, _) = bootstrap_decision(0.0, &reps, 0.05).unwrap();
        assert_eq!(p, 1.0);
        assert!(bootstrap_decision(1.0, &[], 0.05).is_err());
    }

    #[test]
    fn config_validation() {
        let spec = ModelSpec::ckls_sv();
        assert!(GofConfig::new(TestKind::Drift, &spec, 50, 0.05, 1)
            .validate()
            .is_err());
        assert!(GofConfig::new(TestKind::Drift, &spec, 100, 1.0, 1)
            .validate()
            .is_err());
        let short = Path::from_observations(vec![0.1; 50], 1.0 / 52.0).unwrap();
        assert!(gof_test(
            &short,
            &spec,
            &GofConfig::new(TestKind::Drift, &spec, 100, 0.05, 1)
        )
        .is_err());
    }

    fn ou_path(seed: u64) -> Path {
        let theta = ParamVector::ou(0.04, 0.6, -0.7, 0.1, 0.4);
        simulate_path(
            &ModelSpec::ou_sv(),
            &theta,
            &SimConfig::new(300, 1.0 / 52.0, seed),
        )
        .unwrap()
    }

    #[test]
    fn drift_test_is_deterministic_and_on_the_lattice() {
        let spec = ModelSpec::ou_sv();
        let path = ou_path(1);
        let cfg = GofConfig::new(TestKind::Drift, &spec, 100, 0.05, 9);
        let a = gof_test(&path, &spec, &cfg).unwrap();
        let b = gof_test(&path, &spec, &cfg).unwrap();
        assert_eq!(a.results, b.results);
        for r in &a.results {
            let exceed = r
                .bootstrap_statistics
                .iter()
                .filter(|s| **s > r.statistic)
                .count();
            assert_eq!(r.p_value, exceed as f64 / r.effective_replicates() as f64);
            assert!((0.0..=1.0).contains(&r.p_value));
            assert_eq!(r.reject, r.statistic > r.critical_value);
        }
    }

    #[test]
    fn volatility_test_runs() {
        let spec = ModelSpec::ou_sv();
        let path = ou_path(2);
        let mut cfg = GofConfig::new(TestKind::Volatility, &spec, 100, 0.05, 3);
        cfg.functionals = vec![Functional::Ks];
        let report = gof_test(&path, &spec, &cfg).unwrap();
        let r = &report.results[0];
        assert_eq!(r.effective_replicates() + r.dropped, 100);
        assert!(r.bootstrap_statistics.iter().all(|s| *s >= 0.0));
        assert!(r.report().contains("functional=ks"));
    }
}
