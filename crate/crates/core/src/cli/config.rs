//! Run configuration: a sectioned TOML document.
//!
//! Every key has a default. [`RunConfig::resolve`] fills the defaults that
//! depend on other keys, so the resolved document printed into the manifest
//! reproduces the run on its own.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gof::{Functional, TestKind};
use crate::models::{DiscreteParams, ModelFamily, ModelSpec, ParamVector};
use crate::particle::Resampling;
use crate::statespace::{LevelExponent, MixtureMode};

/// Business days per year.
pub const DAILY_DELTA: f64 = 1.0 / 252.0;
/// Weeks per year.
pub const WEEKLY_DELTA: f64 = 1.0 / 52.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Estimate,
    Gof,
    McStudy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Estimate => "estimate",
            Self::Gof => "gof",
            Self::McStudy => "mc-study",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Two-component mixture with estimated means and variances.
    Kf2,
    /// Fixed seven-component mixture.
    Kf7,
    /// Seven-component mixture with the leverage correction.
    KfCorr,
    Mcmc,
    Pf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calendar {
    /// `t,r` files: spacing of the first two rows. `date,rate` files: daily.
    Auto,
    Daily,
    Weekly,
}

/// Time step: a named calendar convention or an explicit value in years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Calendar(Calendar),
    Years(f64),
}

impl StepSize {
    /// The step in years, or `None` for `auto`.
    pub fn years(&self) -> Option<f64> {
        match self {
            Self::Calendar(Calendar::Auto) => None,
            Self::Calendar(Calendar::Daily) => Some(DAILY_DELTA),
            Self::Calendar(Calendar::Weekly) => Some(WEEKLY_DELTA),
            Self::Years(d) => Some(*d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKeyword {
    Profile,
}

/// Level exponent handling: profiled over a grid or held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaChoice {
    Profile(ProfileKeyword),
    Fixed(f64),
}

impl GammaChoice {
    pub const PROFILE: Self = Self::Profile(ProfileKeyword::Profile);

    pub fn fixed(&self) -> Option<f64> {
        match self {
            Self::Fixed(g) => Some(*g),
            Self::Profile(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunctionalChoice {
    Ks,
    Cvm,
    Both,
}

impl FunctionalChoice {
    pub fn functionals(&self) -> Vec<Functional> {
        match self {
            Self::Ks => vec![Functional::Ks],
            Self::Cvm => vec![Functional::Cvm],
            Self::Both => Functional::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindChoice {
    Drift,
    Vol,
}

impl From<KindChoice> for TestKind {
    fn from(k: KindChoice) -> Self {
        match k {
            KindChoice::Drift => TestKind::Drift,
            KindChoice::Vol => TestKind::Volatility,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingChoice {
    Systematic,
    Multinomial,
}

impl From<ResamplingChoice> for Resampling {
    fn from(r: ResamplingChoice) -> Self {
        match r {
            ResamplingChoice::Systematic => Resampling::Systematic,
            ResamplingChoice::Multinomial => Resampling::Multinomial,
        }
    }
}

/// Model family and continuous-time parameters.
///
/// `gamma` is used by level-effect families and `rho_corr` by `ckls_sv_corr`.
/// Setting all of `phi0`, `phi1`, `sigma_w2` replaces `theta0`, `theta1`, `xi`
/// through the Euler map at the run's time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub family: String,
    /// `rho` of the perturbed families `drift_alt` and `vol_alt`.
    pub perturbation: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub theta0: f64,
    pub theta1: f64,
    pub xi: f64,
    pub rho_corr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_w2: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            family: "ckls_sv".into(),
            perturbation: 0.0,
            alpha: 0.04,
            beta: 0.6,
            gamma: 1.5,
            theta0: -0.7,
            theta1: 0.1,
            xi: 0.4,
            rho_corr: 0.0,
            phi0: None,
            phi1: None,
            sigma_w2: None,
        }
    }
}

impl ModelSection {
    pub fn spec(&self) -> Result<ModelSpec> {
        ModelSpec::new(ModelFamily::parse(&self.family, self.perturbation)?)
    }

    /// The parameter vector for this family at step `delta`.
    pub fn params(&self, delta: f64) -> Result<ParamVector> {
        let spec = self.spec()?;
        let gamma = spec.has_level_effect().then_some(self.gamma);
        let mut theta = match (self.phi0, self.phi1, self.sigma_w2) {
            (None, None, None) => ParamVector {
                alpha: self.alpha,
                beta: self.beta,
                gamma,
                theta0: self.theta0,
                theta1: self.theta1,
                xi: self.xi,
                rho_corr: None,
            },
            (Some(phi0), Some(phi1), Some(sw2)) => ParamVector::from_discrete(
                self.alpha,
                self.beta,
                gamma,
                DiscreteParams::new(phi0, phi1, sw2),
                delta,
            )?,
            _ => {
                return Err(Error::Config(
                    "model: set all of phi0, phi1, sigma_w2 or none of them".into(),
                ))
            }
        };
        if spec.has_correlation() {
            theta = theta.with_correlation(self.rho_corr);
        }
        theta.validate(&spec)
    }
}

/// An observed series read from CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub csv: PathBuf,
    #[serde(default = "auto_step")]
    pub delta: StepSize,
    /// Largest allowed spacing of a `t,r` file, in units of its first spacing.
    #[serde(default = "default_max_gap_steps")]
    pub max_gap_steps: f64,
    /// Largest allowed calendar gap of a `date,rate` file; defaults by convention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_gap_days: Option<i64>,
}

fn auto_step() -> StepSize {
    StepSize::Calendar(Calendar::Auto)
}

fn default_max_gap_steps() -> f64 {
    1.5
}

/// A simulated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n: usize,
    pub burn_in: usize,
    pub delta: StepSize,
    /// Initial level; `alpha / beta` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    /// Initial log-variance; the stationary mean when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n: 2080,
            burn_in: 1000,
            delta: StepSize::Calendar(Calendar::Weekly),
            r0: None,
            h0: None,
        }
    }
}

impl SimulationSection {
    pub fn delta(&self) -> Result<f64> {
        self.delta.years().ok_or_else(|| {
            Error::Config("simulation.delta must be daily, weekly or a number".into())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub estimator: Estimator,
    /// Level exponent: `"profile"` or a fixed value. MCMC and PF need a fixed value for level-effect families.
    pub gamma: GammaChoice,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub gamma_step: f64,
    pub multistarts: usize,
    pub standard_errors: bool,
    pub mcmc_iterations: usize,
    pub mcmc_burn_in: usize,
    pub mcmc_thin: usize,
    pub particles: usize,
    pub shrinkage: f64,
    pub resampling: ResamplingChoice,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self {
            estimator: Estimator::Kf7,
            gamma: GammaChoice::PROFILE,
            gamma_lo: 0.0,
            gamma_hi: 3.0,
            gamma_step: 0.01,
            multistarts: 5,
            standard_errors: true,
            mcmc_iterations: 5000,
            mcmc_burn_in: 1000,
            mcmc_thin: 10,
            particles: 5000,
            shrinkage: 0.98,
            resampling: ResamplingChoice::Systematic,
        }
    }
}

impl EstimateSection {
    pub fn mixture_mode(&self) -> MixtureMode {
        match self.estimator {
            Estimator::Kf2 => MixtureMode::TwoMix,
            _ => MixtureMode::SevenMix,
        }
    }

    pub fn level(&self) -> LevelExponent {
        match self.gamma {
            GammaChoice::Fixed(g) => LevelExponent::Fixed(g),
            GammaChoice::Profile(_) => LevelExponent::Profile {
                lo: self.gamma_lo,
                hi: self.gamma_hi,
                step: self.gamma_step,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestSection {
    pub kind: KindChoice,
    pub functional: FunctionalChoice,
    pub bootstrap: usize,
    pub level: f64,
    /// Null family; the model family's null counterpart when empty.
    pub null: String,
    /// Level exponent under the null: `"profile"` or a fixed value (simple hypothesis).
    pub null_gamma: GammaChoice,
    /// Take the KS supremum over the full grid of observed coordinates.
    pub exact_grid: bool,
}

impl Default for TestSection {
    fn default() -> Self {
        Self {
            kind: KindChoice::Vol,
            functional: FunctionalChoice::Both,
            bootstrap: 200,
            level: 0.05,
            null: String::new(),
            null_gamma: GammaChoice::PROFILE,
            exact_grid: false,
        }
    }
}

/// One simulated design of a size or power study; empty fields inherit from `[model]` and `[test]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_gamma: Option<GammaChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub replicates: usize,
    pub sizes: Vec<usize>,
    pub designs: Vec<DesignSection>,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            replicates: 200,
            sizes: vec![500],
            designs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub seed: u64,
    /// Worker threads; 0 uses every available core. Never changes results.
    pub workers: usize,
    pub out: PathBuf,
    pub model: ModelSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSection>,
    pub estimate: EstimateSection,
    pub test: TestSection,
    pub study: StudySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            workers: 1,
            out: PathBuf::from("svdiff-out"),
            model: ModelSection::default(),
            data: None,
            simulation: None,
            estimate: EstimateSection::default(),
            test: TestSection::default(),
            study: StudySection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative CSV paths are taken relative to the file.
    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(data) = cfg.data.as_mut() {
            if data.csv.is_relative() {
                data.csv = path.parent().unwrap_or(FsPath::new("")).join(&data.csv);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn command(&self) -> Result<Command> {
        self.command
            .ok_or_else(|| Error::Config("no command given".into()))
    }

    /// Checks the document and fills every derived default.
    pub fn resolve(mut self) -> Result<Self> {
        let command = self.command()?;
        let model_spec = self.model.spec()?;
        match (command, &self.data, &self.simulation) {
            (Command::Simulate | Command::McStudy, Some(_), _) => {
                return Err(Error::Config(format!(
                    "`{}` simulates its data; remove the [data] section",
                    command.name()
                )));
            }
            (Command::Simulate | Command::McStudy, None, None) => {
                self.simulation = Some(SimulationSection::default())
            }
            (Command::Estimate | Command::Gof, Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give exactly one data source: [data] or [simulation]".into(),
                ));
            }
            (Command::Estimate | Command::Gof, None, None) => {
                return Err(Error::Config(
                    "no data source: add a [data] or [simulation] section".into(),
                ));
            }
            _ => {}
        }
        if let Some(data) = self.data.as_mut() {
            if !data.csv.is_file() {
                return Err(Error::Config(format!(
                    "data file {} does not exist",
                    data.csv.display()
                )));
            }
            data.csv = data.csv.canonicalize()?;
            if data.max_gap_days.is_none() {
                data.max_gap_days = Some(if data.delta == StepSize::Calendar(Calendar::Weekly) {
                    10
                } else {
                    5
                });
            }
        }
        if let Some(sim) = &self.simulation {
            sim.delta()?;
        }
        if self.test.null.trim().is_empty() {
            self.test.null = model_spec.null_counterpart().family().name().to_string();
        }
        ModelFamily::parse(&self.test.null, 0.0)?;
        if command == Command::McStudy {
            if self.study.designs.is_empty() {
                self.study.designs.push(DesignSection {
                    label: self.model.family.clone(),
                    ..DesignSection::default()
                });
            }
            for (i, d) in self.study.designs.iter_mut().enumerate() {
                if d.label.trim().is_empty() {
                    d.label = format!("design{i}");
                }
                d.family.get_or_insert_with(|| self.model.family.clone());
                d.perturbation.get_or_insert(self.model.perturbation);
                d.gamma.get_or_insert(self.model.gamma);
                d.null.get_or_insert_with(|| self.test.null.clone());
                d.null_gamma.get_or_insert(self.test.null_gamma);
            }
        }
        Ok(self)
    }

    /// The model section as seen by a study design.
    pub fn design_model(&self, design: &DesignSection) -> ModelSection {
        ModelSection {
            family: design
                .family
                .clone()
                .unwrap_or_else(|| self.model.family.clone()),
            perturbation: design.perturbation.unwrap_or(self.model.perturbation),
            gamma: design.gamma.unwrap_or(self.model.gamma),
            ..self.model.clone()
        }
    }

    /// The null family and its level treatment.
    pub fn null_spec(&self) -> Result<(ModelSpec, Option<LevelExponent>)> {
        let spec = ModelSpec::new(ModelFamily::parse(&self.test.null, 0.0)?)?;
        Ok((spec, self.test.null_gamma.fixed().map(LevelExponent::Fixed)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig {
            command: Some(Command::Simulate),
            ..RunConfig::default()
        }
        .resolve()
        .unwrap();
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("delta = \"weekly\""), "{text}");
        assert!(text.contains("gamma = \"profile\""), "{text}");
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn step_sizes_parse() {
        let cfg = RunConfig::from_toml(
            "[simulation]\ndelta = 0.01\n[estimate]\ngamma = 1.5\nestimator = \"kf-corr\"\n",
        )
        .unwrap();
        assert_eq!(cfg.simulation.unwrap().delta.years(), Some(0.01));
        assert_eq!(cfg.estimate.gamma.fixed(), Some(1.5));
        assert_eq!(cfg.estimate.estimator, Estimator::KfCorr);
        assert!(RunConfig::from_toml("[model]\nunknown = 1\n").is_err());
        assert!(RunConfig::from_toml("[simulation]\ndelta = \"monthly\"\n").is_err());
    }

    #[test]
    fn exactly_one_data_source() {
        let estimate = RunConfig {
            command: Some(Command::Estimate),
            ..RunConfig::default()
        };
        assert!(matches!(estimate.clone().resolve(), Err(Error::Config(_))));
        let missing = RunConfig {
            data: Some(DataSection {
                csv: "/nonexistent/rates.csv".into(),
                delta: auto_step(),
                max_gap_steps: 1.5,
                max_gap_days: None,
            }),
            ..estimate.clone()
        };
        assert!(matches!(missing.clone().resolve(), Err(Error::Config(_))));
        let both = RunConfig {
            simulation: Some(SimulationSection::default()),
            ..missing
        };
        assert!(both.resolve().is_err());
        let sim = RunConfig {
            simulation: Some(SimulationSection::default()),
            ..estimate
        };
        let resolved = sim.resolve().unwrap();
        assert_eq!(resolved.test.null, "ckls_sv");
    }

    #[test]
    fn model_parameters() {
        let mut m = ModelSection {
            family: "ou_sv".into(),
            ..ModelSection::default()
        };
        assert_eq!(m.params(WEEKLY_DELTA).unwrap().gamma, None);
        m.phi0 = Some(-0.006);
        assert!(m.params(WEEKLY_DELTA).is_err());
        m.phi1 = Some(0.99);
        m.sigma_w2 = Some(0.0225);
        let theta = m.params(WEEKLY_DELTA).unwrap();
        assert!((theta.discretize(WEEKLY_DELTA).unwrap().phi1() - 0.99).abs() < 1e-12);
        let corr = ModelSection {
            family: "ckls_sv_corr".into(),
            rho_corr: -0.5,
            ..ModelSection::default()
        };
        assert_eq!(corr.params(WEEKLY_DELTA).unwrap().rho_corr, Some(-0.5));
    }

    #[test]
    fn study_designs_inherit() {
        let text = "command = \"mc-study\"\n[model]\nfamily = \"drift_alt\"\n[[study.designs]]\nlabel = \"rho0.07\"\nperturbation = 0.07\n";
        let cfg = RunConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(cfg.test.null, "ckls_sv");
        let d = &cfg.study.designs[0];
        assert_eq!(d.family.as_deref(), Some("drift_alt"));
        assert_eq!(d.perturbation, Some(0.07));
        assert_eq!(d.null_gamma, Some(GammaChoice::PROFILE));
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap())
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(again, cfg);
    }
}
