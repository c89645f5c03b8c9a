//! A small Monte Carlo size and power study of the drift test.
//!
//! `cargo run --release --example size_power_study`

use svdiff::gof::{mc_study, EvalMode, Functional, McStudy, StudyDesign, TestKind};
use svdiff::models::{ModelFamily, ModelSpec, ParamVector};

fn main() -> svdiff::Result<()> {
    let theta = ParamVector::ckls(0.04, 0.6, 1.5, -0.7, 0.1, 0.4);
    let null = ModelSpec::ckls_sv();
    let design = |label: &str, dgp: ModelSpec| StudyDesign {
        label: label.into(),
        dgp,
        theta,
        null,
        null_level: None,
    };
    let study = McStudy {
        kind: TestKind::Drift,
        designs: vec![
            design("null", null),
            design(
                "rho0.15",
                ModelSpec::new(ModelFamily::DriftAlt { rho: 0.15 })?,
            ),
        ],
        sizes: vec![250],
        replicates: 10,
        bootstrap: 100,
        level: 0.05,
        functionals: Functional::ALL.to_vec(),
        delta: 1.0 / 52.0,
        burn_in: 1000,
        eval_mode: EvalMode::Observed,
    };
    let table = mc_study(&study, 2024)?;
    print!("{}", table.report());
    table.write_csv(std::io::stdout())?;
    Ok(())
}
