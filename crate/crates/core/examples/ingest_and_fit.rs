//! Ingests a dated rate series and runs the estimate and test commands on it.
//!
//! `cargo run --release --example ingest_and_fit`

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use svdiff::cli::{run, Command, RunConfig};
use svdiff::models::{ModelSpec, ParamVector};
use svdiff::simulate::{simulate_path, SimConfig};

fn main() -> svdiff::Result<()> {
    let dir = std::env::temp_dir().join("svdiff_ingest_example");
    std::fs::create_dir_all(&dir)?;

    // A business-daily series stands in for an observed money-market rate.
    let theta = ParamVector::ckls(0.04, 0.6, 1.5, -0.7, 0.1, 0.4);
    let path = simulate_path(
        &ModelSpec::ckls_sv(),
        &theta,
        &SimConfig::new(1077, 1.0 / 252.0, 17),
    )?;
    let csv = dir.join("rates.csv");
    let mut file = std::fs::File::create(&csv)?;
    writeln!(file, "date,rate")?;
    let mut day = NaiveDate::from_ymd_opt(2004, 1, 2).expect("valid date");
    for r in &path.r {
        writeln!(file, "{day},{r}")?;
        day += Duration::days(1);
        while matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            day += Duration::days(1);
        }
    }

    let config = format!(
        "seed = 5\nout = \"{}\"\n[model]\nfamily = \"ckls_sv\"\n[data]\ncsv = \"{}\"\ndelta = \"daily\"\n[test]\nkind = \"vol\"\nbootstrap = 100\n",
        dir.join("estimate").display(),
        csv.display()
    );
    let mut cfg = RunConfig::from_toml(&config)?;
    cfg.command = Some(Command::Estimate);
    let artifacts = run(cfg.clone())?;
    println!(
        "{}",
        std::fs::read_to_string(artifacts.out.join("results.csv"))?
    );

    cfg.command = Some(Command::Gof);
    cfg.out = dir.join("gof");
    let artifacts = run(cfg)?;
    println!(
        "{}",
        std::fs::read_to_string(artifacts.out.join("results.csv"))?
    );
    for f in artifacts.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
