//! Linearised state-space estimation of the log-variance.

pub mod density;
pub mod filter;
pub mod linearize;
pub mod mle;
pub mod optim;

pub use density::{logchi2_pdf, mixture_pdf, ObservationDensity};
pub use filter::{
    kf_corr_filter, kf_filter, kf_loglik, volatility_estimate, FilterOutput, StatePrior,
};
pub use linearize::{
    linearize_path, log_square_transform, ols_drift_on, ols_drift_residuals, DriftFit,
    LinearizedSeries,
};
pub use mle::{
    fit_linearized, fit_path, kf_corr_mle, kf_mle, KfParams, LevelExponent, MixtureMode,
    MleOptions, MleResult, PathFit,
};
