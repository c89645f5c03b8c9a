//! Simulates the OU-SV and CKLS-SV families and writes one path as CSV.
//!
//! `cargo run --release --example simulate_paths`

use svdiff::models::{DiscreteParams, ModelSpec, ParamVector};
use svdiff::simulate::{simulate_path, SimConfig};

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let ou = ParamVector::from_discrete(
        0.01,
        0.3,
        None,
        DiscreteParams::new(-0.006, 0.99, 0.0225),
        delta,
    )?;
    let ckls = ParamVector::ckls(0.04, 0.6, 1.5, -0.7, 0.1, 0.4);

    for (spec, theta) in [(ModelSpec::ou_sv(), ou), (ModelSpec::ckls_sv(), ckls)] {
        let path = simulate_path(&spec, &theta, &SimConfig::new(2080, delta, 1))?;
        let n = path.r.len() as f64;
        let mean = path.r.iter().sum::<f64>() / n;
        let sd = (path.r.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        println!(
            "{spec:>8}: dr = {}, dr diffusion = {}",
            spec.drift_form(),
            spec.diffusion_form()
        );
        println!(
            "          mean r = {mean:.5}, sd r = {sd:.5}, reflections = {}",
            path.reflections
        );
        if let Some(w) = path.reflection_warning() {
            println!("          warning: {w}");
        }
    }

    let path = simulate_path(&ModelSpec::ckls_sv(), &ckls, &SimConfig::new(520, delta, 2))?;
    let file = std::env::temp_dir().join("svdiff_ckls_path.csv");
    path.write_csv(std::fs::File::create(&file)?)?;
    println!("wrote {} ({} points)", file.display(), path.r.len());
    Ok(())
}
