//! Bootstrap test of a linear drift against a perturbed nonlinear one.
//!
//! `cargo run --release --example gof_drift_test`

use svdiff::gof::{gof_test, GofConfig, TestKind};
use svdiff::models::{ModelFamily, ModelSpec, ParamVector};
use svdiff::simulate::{simulate_path, SimConfig};

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let theta = ParamVector::ckls(0.04, 0.6, 1.5, -0.7, 0.1, 0.4);
    let null = ModelSpec::ckls_sv();
    for (label, dgp) in [
        ("null", null),
        (
            "rho = 0.15",
            ModelSpec::new(ModelFamily::DriftAlt { rho: 0.15 })?,
        ),
    ] {
        let path = simulate_path(&dgp, &theta, &SimConfig::new(500, delta, 31))?;
        let report = gof_test(
            &path,
            &null,
            &GofConfig::new(TestKind::Drift, &null, 200, 0.05, 32),
        )?;
        for r in &report.results {
            println!(
                "{label:>10} {:>3}: U = {:.3e}, c* = {:.3e}, p = {:.3}, reject = {}",
                r.functional.name(),
                r.statistic,
                r.critical_value,
                r.p_value,
                r.reject
            );
        }
    }
    Ok(())
}
