//! Gibbs sampler with single-site Metropolis-Hastings updates of the log-variance path.
//!
//! `cargo run --release --example mcmc_gibbs`

use svdiff::mcmc::{gibbs_run, McmcConfig};
use svdiff::models::{DiscreteParams, ModelSpec, ParamVector};
use svdiff::simulate::{simulate_path, SimConfig};
use svdiff::statespace::ols_drift_residuals;

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let theta = ParamVector::from_discrete(
        0.01,
        0.3,
        None,
        DiscreteParams::new(-0.006, 0.99, 0.0225),
        delta,
    )?;
    let path = simulate_path(&ModelSpec::ou_sv(), &theta, &SimConfig::new(2080, delta, 3))?;
    let residuals = ols_drift_residuals(&path)?.residuals;

    let chain = gibbs_run(
        &residuals,
        &McmcConfig {
            seed: 11,
            ..McmcConfig::default()
        },
    )?;
    for (name, s) in [
        ("phi0", chain.summary_phi0()),
        ("phi1", chain.summary_phi1()),
        ("sigma_w2", chain.summary_sigma_w2()),
    ] {
        println!(
            "{name:>8}: mean {:.4}, sd {:.4}, 95% [{:.4}, {:.4}]",
            s.mean, s.sd, s.q025, s.q975
        );
    }
    println!("mean MH acceptance = {:.3}", chain.mean_acceptance());
    println!("retained latent paths = {}", chain.h_draws.len());
    Ok(())
}
