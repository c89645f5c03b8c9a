//! Parametric two-factor diffusion families.
//!
//! Every family has the form
//!
//! ```text
//! dr_t        = m1(r_t) dt + sigma_t nu1(r_t) dW1_t
//! d log s2_t  = (theta0 - theta1 log s2_t) dt + xi dW2_t,     dW1 dW2 = rho_corr dt
//! ```
//!
//! with `m1(r) = alpha - beta r` and `nu1 = 1` (OU) or `r^gamma` (CKLS). The two
//! perturbed families add `rho (1 - r^rho)` to the drift or to the whole
//! diffusion coefficient; `rho = 0` recovers the CKLS model exactly.
//!
//! Parameters are held in continuous time. The Euler map for the log-variance
//! recursion `h_t = phi0 + phi1 h_{t-1} + w_t`, `w_t ~ N(0, sigma_w2)`, is applied
//! per time step through [`DiscreteParams`].

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelFamily {
    /// Ornstein-Uhlenbeck level with OU log-variance, `nu1 = 1`.
    OuSv,
    /// CKLS level effect `nu1 = r^gamma` with OU log-variance.
    CklsSv,
    /// `CklsSv` with correlated Wiener increments (leverage).
    CklsSvCorr,
    /// CKLS level effect with driftless (random-walk) log-variance.
    CklsNull,
    /// `CklsSv` drift plus `rho (1 - r^rho)`.
    DriftAlt { rho: f64 },
    /// `CklsSv` diffusion plus `rho (1 - r^rho)`.
    VolAlt { rho: f64 },
}

impl ModelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::OuSv => "ou_sv",
            ModelFamily::CklsSv => "ckls_sv",
            ModelFamily::CklsSvCorr => "ckls_sv_corr",
            ModelFamily::CklsNull => "ckls_null",
            ModelFamily::DriftAlt { .. } => "drift_alt",
            ModelFamily::VolAlt { .. } => "vol_alt",
        }
    }

    /// Parses a family name; `perturbation` is used by the two perturbed families only.
    pub fn parse(name: &str, perturbation: f64) -> Result<Self> {
        let family = match name.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "ou_sv" | "ou_ou" => ModelFamily::OuSv,
            "ckls_sv" | "ckls_ou" => ModelFamily::CklsSv,
            "ckls_sv_corr" => ModelFamily::CklsSvCorr,
            "ckls_null" => ModelFamily::CklsNull,
            "drift_alt" => ModelFamily::DriftAlt { rho: perturbation },
            "vol_alt" => ModelFamily::VolAlt { rho: perturbation },
            other => return Err(Error::Config(format!("unknown model family `{other}`"))),
        };
        Ok(family)
    }
}

/// A model family together with its symbolic component descriptors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    family: ModelFamily,
}

impl ModelSpec {
    pub fn new(family: ModelFamily) -> Result<Self> {
        if let ModelFamily::DriftAlt { rho } | ModelFamily::VolAlt { rho } = family {
            if !rho.is_finite() || rho < 0.0 {
                return Err(Error::domain(
                    "perturbation",
                    format!("must be finite and >= 0, got {rho}"),
                ));
            }
        }
        Ok(Self { family })
    }

    pub fn ou_sv() -> Self {
        Self {
            family: ModelFamily::OuSv,
        }
    }

    pub fn ckls_sv() -> Self {
        Self {
            family: ModelFamily::CklsSv,
        }
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn drift_form(&self) -> &'static str {
        match self.family {
            ModelFamily::DriftAlt { .. } => "alpha - beta*r + rho*(1 - r^rho)",
            _ => "alpha - beta*r",
        }
    }

    pub fn diffusion_form(&self) -> &'static str {
        match self.family {
            ModelFamily::OuSv => "sigma",
            ModelFamily::VolAlt { .. } => "sigma*r^gamma + rho*(1 - r^rho)",
            _ => "sigma*r^gamma",
        }
    }

    pub fn vol_dynamics_form(&self) -> &'static str {
        match self.family {
            ModelFamily::CklsNull => "dlog(sigma^2) = xi dW2",
            ModelFamily::CklsSvCorr => {
                "dlog(sigma^2) = (theta0 - theta1*log(sigma^2)) dt + xi dW2, dW1 dW2 = rho_corr dt"
            }
            _ => "dlog(sigma^2) = (theta0 - theta1*log(sigma^2)) dt + xi dW2",
        }
    }

    /// Whether `nu1 = r^gamma` (as opposed to `nu1 = 1`).
    pub fn has_level_effect(&self) -> bool {
        !matches!(self.family, ModelFamily::OuSv)
    }

    pub fn has_correlation(&self) -> bool {
        matches!(self.family, ModelFamily::CklsSvCorr)
    }

    /// Perturbation size of the alternative families, zero otherwise.
    pub fn perturbation(&self) -> f64 {
        match self.family {
            ModelFamily::DriftAlt { rho } | ModelFamily::VolAlt { rho } => rho,
            _ => 0.0,
        }
    }

    /// States must stay strictly positive for every family with a level effect.
    pub fn requires_positive_state(&self) -> bool {
        self.has_level_effect()
    }

    /// Drift `m1(r)`.
    pub fn drift(&self, theta: &ParamVector, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::domain("r", format!("state must be finite, got {r}")));
        }
        check_finite_params(theta)?;
        let base = theta.alpha - theta.beta * r;
        match self.family {
            ModelFamily::DriftAlt { rho } => Ok(base + perturbation_term(rho, r)?),
            _ => Ok(base),
        }
    }

    /// Level function `nu1(r)` (excluding any additive perturbation).
    pub fn nu1(&self, theta: &ParamVector, r: f64) -> Result<f64> {
        if !self.has_level_effect() {
            return Ok(1.0);
        }
        let gamma = theta.gamma.unwrap_or(0.0);
        level_power(r, gamma)
    }

    /// Diffusion coefficient `sigma * nu1(r)` (plus the perturbation for `VolAlt`).
    pub fn diffusion(&self, theta: &ParamVector, r: f64, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::domain(
                "sigma",
                format!("volatility must be finite and >= 0, got {sigma}"),
            ));
        }
        if !r.is_finite() {
            return Err(Error::domain("r", format!("state must be finite, got {r}")));
        }
        let base = sigma * self.nu1(theta, r)?;
        match self.family {
            ModelFamily::VolAlt { rho } => Ok(base + perturbation_term(rho, r)?),
            _ => Ok(base),
        }
    }

    /// The null-hypothesis counterpart: perturbed families map to `CklsSv`.
    pub fn null_counterpart(&self) -> ModelSpec {
        match self.family {
            ModelFamily::DriftAlt { .. } | ModelFamily::VolAlt { .. } => ModelSpec::ckls_sv(),
            _ => *self,
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            ModelFamily::DriftAlt { rho } | ModelFamily::VolAlt { rho } => {
                write!(f, "{}(rho={})", self.family.name(), rho)
            }
            _ => f.write_str(self.family.name()),
        }
    }
}

fn is_integer(x: f64) -> bool {
    x.fract() == 0.0
}

fn level_power(r: f64, gamma: f64) -> Result<f64> {
    if !r.is_finite() {
        return Err(Error::domain("r", format!("state must be finite, got {r}")));
    }
    if r <= 0.0 && !is_integer(gamma) {
        return Err(Error::domain(
            "r",
            format!("r^gamma needs r > 0 for gamma = {gamma}, got r = {r}"),
        ));
    }
    Ok(r.powf(gamma))
}

fn perturbation_term(rho: f64, r: f64) -> Result<f64> {
    if r <= 0.0 && !is_integer(rho) {
        return Err(Error::domain(
            "r",
            format!("r^rho needs r > 0 for rho = {rho}, got r = {r}"),
        ));
    }
    Ok(rho * (1.0 - r.powf(rho)))
}

fn check_finite_params(theta: &ParamVector) -> Result<()> {
    for (name, value) in theta.fields() {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(Error::domain(name, format!("must be finite, got {v}")));
            }
        }
    }
    Ok(())
}

/// Continuous-time parameters.
///
/// `gamma` is only used by families with a level effect and `rho_corr` only by
/// [`ModelFamily::CklsSvCorr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamVector {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub theta0: f64,
    pub theta1: f64,
    pub xi: f64,
    pub rho_corr: Option<f64>,
}

impl ParamVector {
    pub fn ou(alpha: f64, beta: f64, theta0: f64, theta1: f64, xi: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma: None,
            theta0,
            theta1,
            xi,
            rho_corr: None,
        }
    }

    pub fn ckls(alpha: f64, beta: f64, gamma: f64, theta0: f64, theta1: f64, xi: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma: Some(gamma),
            theta0,
            theta1,
            xi,
            rho_corr: None,
        }
    }

    pub fn with_correlation(mut self, rho_corr: f64) -> Self {
        self.rho_corr = Some(rho_corr);
        self
    }

    /// Builds continuous parameters from the discrete log-variance map at step `delta`.
    pub fn from_discrete(
        alpha: f64,
        beta: f64,
        gamma: Option<f64>,
        discrete: DiscreteParams,
        delta: f64,
    ) -> Result<Self> {
        let (theta0, theta1, xi) = discrete.to_continuous(delta)?;
        Ok(Self {
            alpha,
            beta,
            gamma,
            theta0,
            theta1,
            xi,
            rho_corr: None,
        })
    }

    pub fn discretize(&self, delta: f64) -> Result<DiscreteParams> {
        DiscreteParams::from_continuous(self.theta0, self.theta1, self.xi, delta)
    }

    pub fn gamma_or_zero(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }

    pub fn rho_or_zero(&self) -> f64 {
        self.rho_corr.unwrap_or(0.0)
    }

    fn fields(&self) -> [(&'static str, Option<f64>); 7] {
        [
            ("alpha", Some(self.alpha)),
            ("beta", Some(self.beta)),
            ("gamma", self.gamma),
            ("theta0", Some(self.theta0)),
            ("theta1", Some(self.theta1)),
            ("xi", Some(self.xi)),
            ("rho_corr", self.rho_corr),
        ]
    }

    /// Accepts the vector for `spec` or reports the first offending field.
    pub fn validate(&self, spec: &ModelSpec) -> Result<ParamVector> {
        check_finite_params(self)?;
        if self.xi < 0.0 {
            return Err(Error::domain(
                "xi",
                format!("volatility of volatility must be >= 0, got {}", self.xi),
            ));
        }
        if spec.has_level_effect() && self.gamma.is_none() {
            return Err(Error::domain("gamma", format!("required by family {spec}")));
        }
        match (spec.has_correlation(), self.rho_corr) {
            (true, None) => {
                return Err(Error::domain(
                    "rho_corr",
                    format!("required by family {spec}"),
                ))
            }
            (true, Some(rho)) if rho.abs() > 1.0 => {
                return Err(Error::domain(
                    "rho_corr",
                    format!("must lie in [-1, 1], got {rho}"),
                ));
            }
            (false, Some(rho)) if rho != 0.0 => {
                return Err(Error::domain(
                    "rho_corr",
                    format!("family {spec} has independent Wiener processes"),
                ));
            }
            _ => {}
        }
        if matches!(spec.family(), ModelFamily::CklsNull)
            && (self.theta0 != 0.0 || self.theta1 != 0.0)
        {
            return Err(Error::domain(
                "theta0/theta1",
                "the null family has driftless log-variance",
            ));
        }
        Ok(*self)
    }
}

/// Euler map of the log-variance equation at a fixed step.
///
/// `phi1` is stored through its complement `1 - phi1 = theta1 * delta`, which
/// keeps the continuous/discrete round trip exact to a couple of ulps even when
/// `theta1 * delta` is tiny.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteParams {
    pub phi0: f64,
    persistence_gap: f64,
    pub sigma_w2: f64,
}

impl DiscreteParams {
    pub fn new(phi0: f64, phi1: f64, sigma_w2: f64) -> Self {
        Self {
            phi0,
            persistence_gap: 1.0 - phi1,
            sigma_w2,
        }
    }

    pub fn from_continuous(theta0: f64, theta1: f64, xi: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            phi0: theta0 * delta,
            persistence_gap: theta1 * delta,
            sigma_w2: delta * xi * xi,
        })
    }

    /// Inverse map, returning `(theta0, theta1, xi)`.
    pub fn to_continuous(&self, delta: f64) -> Result<(f64, f64, f64)> {
        check_delta(delta)?;
        if self.sigma_w2 < 0.0 {
            return Err(Error::domain(
                "sigma_w2",
                format!("must be >= 0, got {}", self.sigma_w2),
            ));
        }
        Ok((
            self.phi0 / delta,
            self.persistence_gap / delta,
            (self.sigma_w2 / delta).sqrt(),
        ))
    }

    pub fn phi1(&self) -> f64 {
        1.0 - self.persistence_gap
    }

    pub fn is_stationary(&self) -> bool {
        self.phi1().abs() < 1.0
    }

    /// Stationary mean `phi0 / (1 - phi1)` when it exists.
    pub fn stationary_mean(&self) -> Option<f64> {
        (self.is_stationary() && self.persistence_gap != 0.0)
            .then(|| self.phi0 / self.persistence_gap)
    }

    pub fn stationary_variance(&self) -> Option<f64> {
        self.is_stationary()
            .then(|| self.sigma_w2 / (1.0 - self.phi1().powi(2)))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::domain(
            "delta",
            format!("time step must be finite and > 0, got {delta}"),
        ));
    }
    Ok(())
}

/// Gaussian mixture used in place of the `log chi^2_1` observation error.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

/// Seven-component approximation: `(weight, mean, variance)`.
pub const SEVEN_COMPONENTS: [(f64, f64, f64); 7] = [
    (0.00730, -11.400, 5.7960),
    (0.10556, -5.2432, 2.6137),
    (0.00002, -9.8373, 5.1795),
    (0.04395, 1.5075, 0.1674),
    (0.34001, -0.6510, 0.6401),
    (0.24566, 0.5248, 0.3402),
    (0.25750, -2.3586, 1.2626),
];

impl MixtureSpec {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::Length(
                "mixture weights, means and variances must be non-empty and equal length".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::domain("weights", "must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(
                "weights",
                format!("must sum to 1, got {total}"),
            ));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::domain("means", "must be finite"));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::domain("variances", "must be finite and > 0"));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    pub fn single(mean: f64, variance: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![variance])
    }

    /// Two components with uniform prior weights, the first centred at zero.
    pub fn two_component(mu1: f64, var0: f64, var1: f64) -> Result<Self> {
        Self::new(vec![0.5, 0.5], vec![0.0, mu1], vec![var0, var1])
    }

    /// The fixed seven-component approximation to `log chi^2_1`.
    pub fn seven_component() -> Self {
        Self {
            weights: SEVEN_COMPONENTS.iter().map(|c| c.0).collect(),
            means: SEVEN_COMPONENTS.iter().map(|c| c.1).collect(),
            variances: SEVEN_COMPONENTS.iter().map(|c| c.2).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, m)| w * m)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.weights
            .iter()
            .zip(self.means.iter().zip(&self.variances))
            .map(|(w, (m, v))| w * (v + (m - mean).powi(2)))
            .sum()
    }
}
