//! Kalman filter, MCMC and particle filter estimates of the persistence on common paths.
//!
//! `cargo run --release --example estimator_comparison`

use svdiff::mcmc::{gibbs_run, McmcConfig};
use svdiff::models::{DiscreteParams, ModelSpec, ParamVector};
use svdiff::particle::{lw_filter, DiffusePrior, LiuWestConfig};
use svdiff::rng::derive_seed;
use svdiff::simulate::{simulate_path, SimConfig};
use svdiff::statespace::{fit_path, linearize_path, MixtureMode, MleOptions};

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let phi1 = 0.99;
    let theta = ParamVector::from_discrete(
        0.01,
        0.3,
        None,
        DiscreteParams::new(-0.006, phi1, 0.0225),
        delta,
    )?;
    let spec = ModelSpec::ou_sv();
    let replicates = 5;
    let mut errors = [[0.0; 2]; 3];
    for rep in 0..replicates {
        let seed = derive_seed(99, &[rep]);
        let path = simulate_path(&spec, &theta, &SimConfig::new(2080, delta, seed))?;
        let (drift, series) = linearize_path(&path, false, 0.0)?;
        let kf = fit_path(
            &path,
            &spec,
            &MleOptions {
                standard_errors: false,
                ..MleOptions::for_spec(&spec, MixtureMode::SevenMix)
            },
        )?;
        let mcmc = gibbs_run(
            &drift.residuals,
            &McmcConfig {
                seed,
                ..McmcConfig::default()
            },
        )?;
        let pf = lw_filter(
            &series.y,
            &DiffusePrior::for_observations(&series.y),
            &LiuWestConfig {
                seed,
                ..LiuWestConfig::default()
            },
        )?;
        let estimates = [
            kf.mle.params.discrete.phi1(),
            mcmc.summary_phi1().mean,
            pf.phi1.mean,
        ];
        println!(
            "rep {rep}: kf7 {:.4}  mcmc {:.4}  pf {:.4}",
            estimates[0], estimates[1], estimates[2]
        );
        for (e, est) in errors.iter_mut().zip(estimates) {
            e[0] += est / replicates as f64;
            e[1] += (est - phi1).powi(2) / replicates as f64;
        }
    }
    for (name, [mean, mse]) in ["kf7", "mcmc", "pf"].iter().zip(errors) {
        println!("{name:>5}: mean phi1 {mean:.4}, mse {mse:.2e}");
    }
    Ok(())
}
