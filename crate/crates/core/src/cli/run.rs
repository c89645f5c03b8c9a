//! Orchestration of one configured run and its artifacts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gof::procedure::param_lines;
use crate::gof::{gof_test, mc_study, EvalMode, GofConfig, McStudy, StudyDesign};
use crate::mcmc::{gibbs_run, McmcConfig, Summary};
use crate::models::{ModelFamily, ModelSpec};
use crate::particle::{lw_filter, DiffusePrior, LiuWestConfig, ParamPosterior};
use crate::rng::{derive_seed, RNG_ALGORITHM};
use crate::simulate::{fmt17, simulate_path, Path, SimConfig};
use crate::statespace::linearize::DEFAULT_FLOOR;
use crate::statespace::{
    fit_path, log_square_transform, ols_drift_residuals, FilterOutput, MleOptions, PathFit,
};

use super::config::{Command, Estimator, RunConfig};
use super::ingest::{convention_name, ingest_csv, IngestOptions};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const RESULTS_FILE: &str = "results.csv";
pub const REPORT_FILE: &str = "report.txt";

/// Files written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub out: PathBuf,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// In-memory outputs of a command before they are written.
#[derive(Debug, Default)]
struct Outputs {
    results: Vec<u8>,
    report: String,
    plots: Vec<(String, Vec<u8>)>,
    warnings: Vec<String>,
}

impl Outputs {
    fn with_report(report: String) -> Self {
        Self {
            report,
            ..Self::default()
        }
    }
}

/// Resolves `config`, runs its command on a pool of `workers` threads and writes the artifacts.
pub fn run(config: RunConfig) -> Result<RunArtifacts> {
    let cfg = config.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut files = vec![cfg.out.join(MANIFEST_FILE)];
    std::fs::write(&files[0], manifest(&cfg)?)?;

    let outputs = pool.install(|| execute(&cfg))?;
    let mut report = outputs.report;
    for w in &outputs.warnings {
        writeln!(report, "warning={w}").expect("writing to a String");
    }
    for (name, bytes) in [
        (RESULTS_FILE.to_string(), outputs.results),
        (REPORT_FILE.to_string(), report.into_bytes()),
    ]
    .into_iter()
    .chain(
        outputs
            .plots
            .into_iter()
            .map(|(name, bytes)| (format!("plotdata_{name}.csv"), bytes)),
    ) {
        let path = cfg.out.join(name);
        std::fs::write(&path, bytes)?;
        files.push(path);
    }
    Ok(RunArtifacts {
        out: cfg.out.clone(),
        files,
        warnings: outputs.warnings,
    })
}

/// The resolved configuration preceded by provenance comments.
///
/// The hash covers everything except `workers` and `out`, which never change
/// numerical results. Passing the manifest back as `--config` repeats the run.
pub fn manifest(cfg: &RunConfig) -> Result<String> {
    let body = cfg.to_toml()?;
    let numerical = RunConfig {
        workers: 0,
        out: PathBuf::new(),
        ..cfg.clone()
    }
    .to_toml()?;
    let mut out = String::new();
    writeln!(out, "# svdiff run manifest").expect("writing to a String");
    writeln!(out, "# version = {}", env!("CARGO_PKG_VERSION")).expect("writing to a String");
    writeln!(out, "# rng = {RNG_ALGORITHM}").expect("writing to a String");
    writeln!(out, "# seed = {}", cfg.seed).expect("writing to a String");
    writeln!(
        out,
        "# config_sha256 = {}",
        hex_digest(numerical.as_bytes())
    )
    .expect("writing to a String");
    if let Some(data) = &cfg.data {
        let bytes = std::fs::read(&data.csv)?;
        writeln!(out, "# data_sha256 = {}", hex_digest(&bytes)).expect("writing to a String");
    }
    writeln!(
        out,
        "# rerun: svdiff {} --config <this file>",
        cfg.command()?.name()
    )
    .expect("writing to a String");
    out.push_str(&body);
    Ok(out)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn execute(cfg: &RunConfig) -> Result<Outputs> {
    match cfg.command()? {
        Command::Simulate => run_simulate(cfg),
        Command::Estimate => run_estimate(cfg),
        Command::Gof => run_gof(cfg),
        Command::McStudy => run_study(cfg),
    }
}

/// Seed of the simulated path; shared by every command so `simulate` and `estimate` see the same series.
fn path_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, &[0])
}

/// Seed of the estimator or test.
fn method_seed(cfg: &RunConfig) -> u64 {
    derive_seed(cfg.seed, &[1])
}

fn load_path(cfg: &RunConfig) -> Result<Path> {
    if let Some(data) = &cfg.data {
        let opts = IngestOptions {
            delta: data.delta,
            max_gap_steps: data.max_gap_steps,
            max_gap_days: data.max_gap_days.unwrap_or(5),
        };
        return ingest_csv(&data.csv, &opts);
    }
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::Config("no data source".into()))?;
    let delta = sim.delta()?;
    let spec = cfg.model.spec()?;
    let theta = cfg.model.params(delta)?;
    let sim_cfg = SimConfig {
        r0: sim.r0,
        h0: sim.h0,
        ..SimConfig::new(sim.n, delta, path_seed(cfg)).with_burn_in(sim.burn_in)
    };
    simulate_path(&spec, &theta, &sim_cfg)
}

fn path_header(path: &Path) -> String {
    format!(
        "n={}\ndelta={}\ndelta_convention={}\n",
        path.steps(),
        fmt17(path.delta),
        convention_name(path.delta)
    )
}

fn run_simulate(cfg: &RunConfig) -> Result<Outputs> {
    let path = load_path(cfg)?;
    let spec = cfg.model.spec()?;
    let theta = cfg.model.params(path.delta)?;
    let mut out = Outputs::default();
    path.write_csv(&mut out.results)?;
    let n = path.r.len() as f64;
    let mean = path.r.iter().sum::<f64>() / n;
    let sd = (path.r.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    out.report = format!(
        "command=simulate\nfamily={spec}\n{}seed={}\n{}r_mean={mean:.10e}\nr_sd={sd:.10e}\nreflections={}\ntotal_steps={}\n",
        path_header(&path),
        path_seed(cfg),
        param_lines("theta", &theta),
        path.reflections,
        path.total_steps
    );
    out.warnings.extend(path.reflection_warning());
    Ok(out)
}

fn run_estimate(cfg: &RunConfig) -> Result<Outputs> {
    let path = load_path(cfg)?;
    let mut out = match cfg.estimate.estimator {
        Estimator::Kf2 | Estimator::Kf7 | Estimator::KfCorr => estimate_kf(cfg, &path)?,
        Estimator::Mcmc => estimate_mcmc(cfg, &path)?,
        Estimator::Pf => estimate_pf(cfg, &path)?,
    };
    out.warnings.extend(path.reflection_warning());
    Ok(out)
}

fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Kf2 => "kf2",
        Estimator::Kf7 => "kf7",
        Estimator::KfCorr => "kf-corr",
        Estimator::Mcmc => "mcmc",
        Estimator::Pf => "pf",
    }
}

fn estimate_kf(cfg: &RunConfig, path: &Path) -> Result<Outputs> {
    let est = &cfg.estimate;
    let mut spec = cfg.model.spec()?;
    if est.estimator == Estimator::KfCorr && !spec.has_correlation() {
        if !spec.has_level_effect() {
            return Err(Error::Config(format!(
                "kf-corr needs a family with a level effect, got {spec}"
            )));
        }
        spec = ModelSpec::new(ModelFamily::CklsSvCorr)?;
    }
    let opts = MleOptions {
        level: est.level(),
        multistarts: est.multistarts,
        seed: method_seed(cfg),
        standard_errors: est.standard_errors,
        ..MleOptions::for_spec(&spec, est.mixture_mode())
    };
    let fit = fit_path(path, &spec, &opts)?;
    let mut out = Outputs::with_report(format!(
        "command=estimate\nestimator={}\nfamily={spec}\n{}",
        estimator_name(est.estimator),
        path_header(path)
    ));
    out.report += &param_lines("theta_hat", &fit.theta);
    out.report += &fit.mle.report();
    if fit.mle.at_boundary {
        out.warnings
            .push("an estimate lies on the boundary of its search range".into());
    }
    if !fit.mle.converged {
        out.warnings
            .push("the optimiser stopped before meeting its tolerance".into());
    }
    out.results = kf_results(&fit)?;
    out.plots
        .push(("volatility".into(), volatility_band(&fit.filter, path)?));
    Ok(out)
}

fn kf_results(fit: &PathFit) -> Result<Vec<u8>> {
    let p = &fit.mle.params;
    let se = fit.mle.std_errors.as_ref();
    let mut rows: Vec<(&str, f64, Option<f64>)> = vec![
        ("alpha", fit.theta.alpha, None),
        ("beta", fit.theta.beta, None),
        ("phi0", p.discrete.phi0, se.map(|s| s.phi0)),
        ("phi1", p.discrete.phi1(), se.map(|s| s.phi1)),
        ("sigma_w2", p.discrete.sigma_w2, se.map(|s| s.sigma_w2)),
        ("theta0", fit.theta.theta0, None),
        ("theta1", fit.theta.theta1, None),
        ("xi", fit.theta.xi, None),
    ];
    if let Some(g) = p.gamma {
        rows.push(("gamma", g, se.and_then(|s| s.gamma)));
    }
    if let Some(r) = p.rho {
        rows.push(("rho", r, se.and_then(|s| s.rho)));
    }
    let mut buf = Vec::new();
    writeln!(buf, "parameter,estimate,std_error")?;
    for (name, value, error) in rows {
        writeln!(
            buf,
            "{name},{},{}",
            fmt17(value),
            error.map_or("NA".into(), fmt17)
        )?;
    }
    writeln!(buf, "loglik,{},NA", fmt17(fit.mle.loglik))?;
    Ok(buf)
}

/// Filtered log-variance with a 95% band, one row per residual.
fn volatility_band(filter: &FilterOutput, path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "i,t,h_filt,lower,upper")?;
    for i in 0..filter.len() {
        let half = 1.96 * filter.p_filt[i].max(0.0).sqrt();
        let h = filter.h_filt[i];
        writeln!(
            buf,
            "{i},{},{},{},{}",
            fmt17(path.time(i + 1)),
            fmt17(h),
            fmt17(h - half),
            fmt17(h + half)
        )?;
    }
    Ok(buf)
}

/// Drift residuals, divided by `r^gamma` for level-effect families.
fn standardized_residuals(cfg: &RunConfig, path: &Path) -> Result<Vec<f64>> {
    let spec = cfg.model.spec()?;
    let drift = ols_drift_residuals(path)?;
    if !spec.has_level_effect() {
        return Ok(drift.residuals);
    }
    let gamma = cfg.estimate.gamma.fixed().ok_or_else(|| {
        Error::Config(format!(
            "{} on family {spec} needs a fixed estimate.gamma",
            estimator_name(cfg.estimate.estimator)
        ))
    })?;
    drift
        .residuals
        .iter()
        .zip(&path.r)
        .enumerate()
        .map(|(i, (e, r))| {
            if *r > 0.0 {
                Ok(e / r.powf(gamma))
            } else {
                Err(Error::domain(
                    "r",
                    format!("level effect needs r > 0, got {r} at step {i}"),
                ))
            }
        })
        .collect()
}

fn estimate_mcmc(cfg: &RunConfig, path: &Path) -> Result<Outputs> {
    let est = &cfg.estimate;
    let residuals = standardized_residuals(cfg, path)?;
    let mcmc_cfg = McmcConfig {
        iterations: est.mcmc_iterations,
        burn_in: est.mcmc_burn_in,
        thin_h: est.mcmc_thin,
        seed: method_seed(cfg),
        ..McmcConfig::default()
    };
    let chain = gibbs_run(&residuals, &mcmc_cfg)?;
    let mut out = Outputs::with_report(format!(
        "command=estimate\nestimator=mcmc\nfamily={}\n{}",
        cfg.model.spec()?,
        path_header(path)
    ));
    out.report += &chain.report();
    let mut buf = Vec::new();
    writeln!(buf, "parameter,mean,sd,q025,median,q975")?;
    for (name, s) in [
        ("phi0", chain.summary_phi0()),
        ("phi1", chain.summary_phi1()),
        ("sigma_w2", chain.summary_sigma_w2()),
    ] {
        writeln!(buf, "{name},{}", summary_fields(&s))?;
    }
    out.results = buf;

    let mut band = Vec::new();
    writeln!(band, "i,t,h_mean,lower,upper")?;
    for i in 0..residuals.len() {
        let draws: Vec<f64> = chain.h_draws.iter().map(|h| h[i + 1]).collect();
        let s = Summary::of(&draws);
        writeln!(
            band,
            "{i},{},{},{},{}",
            fmt17(path.time(i + 1)),
            fmt17(chain.h_mean[i + 1]),
            fmt17(s.q025),
            fmt17(s.q975)
        )?;
    }
    out.plots.push(("volatility".into(), band));
    let mut trace = Vec::new();
    chain.write_csv(&mut trace)?;
    out.plots.push(("chain".into(), trace));
    Ok(out)
}

fn summary_fields(s: &Summary) -> String {
    [s.mean, s.sd, s.q025, s.median, s.q975]
        .map(fmt17)
        .join(",")
}

fn estimate_pf(cfg: &RunConfig, path: &Path) -> Result<Outputs> {
    let est = &cfg.estimate;
    let residuals = standardized_residuals(cfg, path)?;
    let y = log_square_transform(&residuals, DEFAULT_FLOOR)?.y;
    let lw_cfg = LiuWestConfig {
        particles: est.particles,
        shrinkage: est.shrinkage,
        resampling: est.resampling.into(),
        seed: method_seed(cfg),
        ..LiuWestConfig::default()
    };
    let result = lw_filter(&y, &DiffusePrior::for_observations(&y), &lw_cfg)?;
    let mut out = Outputs::with_report(format!(
        "command=estimate\nestimator=pf\nfamily={}\n{}",
        cfg.model.spec()?,
        path_header(path)
    ));
    out.report += &result.report();
    let mut buf = Vec::new();
    writeln!(buf, "parameter,mean,q025,median,q975")?;
    for (name, p) in [
        ("phi0", result.phi0),
        ("phi1", result.phi1),
        ("sigma_w2", result.sigma_w2),
    ] {
        writeln!(buf, "{name},{}", posterior_fields(&p))?;
    }
    out.results = buf;
    let mut steps = Vec::new();
    result.write_csv(&mut steps)?;
    out.plots.push(("particle".into(), steps));
    Ok(out)
}

fn posterior_fields(p: &ParamPosterior) -> String {
    [p.mean, p.q025, p.median, p.q975].map(fmt17).join(",")
}

fn run_gof(cfg: &RunConfig) -> Result<Outputs> {
    let path = load_path(cfg)?;
    let (null, level) = cfg.null_spec()?;
    let t = &cfg.test;
    let mut gof_cfg = GofConfig::new(t.kind.into(), &null, t.bootstrap, t.level, method_seed(cfg));
    gof_cfg.functionals = t.functional.functionals();
    gof_cfg.eval_mode = if t.exact_grid {
        EvalMode::ExactGrid
    } else {
        EvalMode::Observed
    };
    if let Some(level) = level {
        gof_cfg.mle.level = level;
    }
    let report = gof_test(&path, &null, &gof_cfg)?;

    let mut out = Outputs::with_report(format!("command=gof\nnull={null}\n{}", path_header(&path)));
    out.report += &param_lines("null_fit", &report.fit.theta);
    let mut buf = Vec::new();
    writeln!(buf, "test,functional,statistic,p_value,critical_value,reject,bootstrap_effective,bootstrap_dropped")?;
    for r in &report.results {
        out.report += &r.report();
        writeln!(
            buf,
            "{},{},{},{},{},{},{},{}",
            r.kind.name(),
            r.functional.name(),
            fmt17(r.statistic),
            fmt17(r.p_value),
            fmt17(r.critical_value),
            r.reject,
            r.effective_replicates(),
            r.dropped
        )?;
        let mut reps = Vec::new();
        r.write_replicates_csv(&mut reps)?;
        out.plots
            .push((format!("bootstrap_{}", r.functional.name()), reps));
        out.warnings.extend(r.warning.clone());
    }
    out.results = buf;
    out.plots.push((
        "volatility".into(),
        volatility_band(&report.fit.filter, &path)?,
    ));
    out.warnings.extend(path.reflection_warning());
    Ok(out)
}

fn run_study(cfg: &RunConfig) -> Result<Outputs> {
    let sim = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| Error::Config("mc-study needs a [simulation] section".into()))?;
    let delta = sim.delta()?;
    let designs = cfg
        .study
        .designs
        .iter()
        .map(|d| {
            let model = cfg.design_model(d);
            let null_name = d.null.clone().unwrap_or_else(|| cfg.test.null.clone());
            Ok(StudyDesign {
                label: d.label.clone(),
                dgp: model.spec()?,
                theta: model.params(delta)?,
                null: ModelSpec::new(ModelFamily::parse(&null_name, 0.0)?)?,
                null_level: d
                    .null_gamma
                    .unwrap_or(cfg.test.null_gamma)
                    .fixed()
                    .map(crate::statespace::LevelExponent::Fixed),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let study = McStudy {
        kind: cfg.test.kind.into(),
        designs,
        sizes: cfg.study.sizes.clone(),
        replicates: cfg.study.replicates,
        bootstrap: cfg.test.bootstrap,
        level: cfg.test.level,
        functionals: cfg.test.functional.functionals(),
        delta,
        burn_in: sim.burn_in,
        eval_mode: if cfg.test.exact_grid {
            EvalMode::ExactGrid
        } else {
            EvalMode::Observed
        },
    };
    let table = mc_study(&study, cfg.seed)?;
    let mut out = Outputs::default();
    table.write_csv(&mut out.results)?;
    out.report = format!(
        "command=mc-study\nreplicates={}\nbootstrap={}\nlevel={}\n",
        study.replicates, study.bootstrap, study.level
    );
    out.report += &table.report();
    let failed: usize = table.cells.iter().map(|c| c.failed).sum();
    if failed > 0 {
        out.warnings.push(format!(
            "{failed} replicate cells failed to simulate or fit"
        ));
    }
    Ok(out)
}
