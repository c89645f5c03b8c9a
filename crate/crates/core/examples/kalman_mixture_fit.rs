//! Quasi-likelihood fit of the log-variance with the two- and seven-component mixture filters.
//!
//! `cargo run --release --example kalman_mixture_fit`

use svdiff::models::{DiscreteParams, ModelSpec, ParamVector};
use svdiff::simulate::{simulate_path, SimConfig};
use svdiff::statespace::{fit_path, MixtureMode, MleOptions};

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let truth = DiscreteParams::new(-0.006, 0.99, 0.0225);
    let theta = ParamVector::from_discrete(0.01, 0.3, None, truth, delta)?;
    let spec = ModelSpec::ou_sv();
    let path = simulate_path(&spec, &theta, &SimConfig::new(2080, delta, 7))?;
    println!(
        "truth: phi0 = {:.4}, phi1 = {:.4}, sigma_w2 = {:.4}",
        truth.phi0,
        truth.phi1(),
        truth.sigma_w2
    );

    for mode in [MixtureMode::TwoMix, MixtureMode::SevenMix] {
        let fit = fit_path(&path, &spec, &MleOptions::for_spec(&spec, mode))?;
        let p = &fit.mle.params.discrete;
        let se = fit
            .mle
            .std_errors
            .as_ref()
            .expect("standard errors requested");
        println!(
            "{:>9}: phi0 = {:.4} ({:.4}), phi1 = {:.4} ({:.4}), sigma_w2 = {:.4} ({:.4}), loglik = {:.2}",
            mode.name(),
            p.phi0,
            se.phi0,
            p.phi1(),
            se.phi1,
            p.sigma_w2,
            se.sigma_w2,
            fit.mle.loglik
        );
    }

    let ckls = ParamVector::ckls(0.04, 0.6, 1.5, -0.010 / delta, 0.002 / delta, 0.4);
    let path = simulate_path(
        &ModelSpec::ckls_sv(),
        &ckls,
        &SimConfig::new(2080, delta, 8),
    )?;
    let fit = fit_path(
        &path,
        &ModelSpec::ckls_sv(),
        &MleOptions::for_spec(&ModelSpec::ckls_sv(), MixtureMode::SevenMix),
    )?;
    println!(
        "ckls_sv: gamma profiled to {:.3} (truth 1.5)",
        fit.mle.params.gamma.unwrap_or(f64::NAN)
    );
    Ok(())
}
