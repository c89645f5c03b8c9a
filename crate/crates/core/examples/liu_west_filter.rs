//! Sequential parameter learning with the auxiliary Liu-West particle filter.
//!
//! `cargo run --release --example liu_west_filter`

use svdiff::models::{DiscreteParams, ModelSpec, ParamVector};
use svdiff::particle::{lw_filter, DiffusePrior, LiuWestConfig};
use svdiff::simulate::{simulate_path, SimConfig};
use svdiff::statespace::linearize_path;

fn main() -> svdiff::Result<()> {
    let delta = 1.0 / 52.0;
    let theta = ParamVector::from_discrete(
        0.01,
        0.3,
        None,
        DiscreteParams::new(-0.006, 0.99, 0.0225),
        delta,
    )?;
    let path = simulate_path(&ModelSpec::ou_sv(), &theta, &SimConfig::new(2080, delta, 5))?;
    let (_, series) = linearize_path(&path, false, 0.0)?;

    let cfg = LiuWestConfig {
        seed: 21,
        ..LiuWestConfig::default()
    };
    let out = lw_filter(&series.y, &DiffusePrior::for_observations(&series.y), &cfg)?;
    for i in [0, 100, 500, 1000, series.y.len() - 1] {
        let s = &out.steps[i];
        println!(
            "step {i:>4}: ess {:>7.1}, phi1 {:.4}, sigma_w2 {:.4}",
            s.ess, s.phi1_mean, s.sigma_w2_mean
        );
    }
    println!(
        "final phi1 = {:.4} [{:.4}, {:.4}]",
        out.phi1.mean, out.phi1.q025, out.phi1.q975
    );
    Ok(())
}
