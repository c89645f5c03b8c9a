use std::fs;
use std::path::Path;
use std::process::Command as Process;

use svdiff::cli::{
    build_config, ingest_csv, run, Command, IngestOptions, Overrides, RunConfig, MANIFEST_FILE,
};

const OU_SIMULATION: &str = "[model]\nfamily = \"ou_sv\"\nalpha = 0.01\nbeta = 0.3\nphi0 = -0.006\nphi1 = 0.99\nsigma_w2 = 0.0225\n\
                             [simulation]\nn = 400\ndelta = \"weekly\"\n";

fn config(text: &str, command: Command, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_toml(text).unwrap();
    cfg.command = Some(command);
    cfg.out = out.to_path_buf();
    cfg
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(name).display()))
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|name| name != MANIFEST_FILE)
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|name| (name.clone(), read(dir, &name)))
        .collect()
}

#[test]
fn simulate_twice_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(config(OU_SIMULATION, Command::Simulate, &a)).unwrap();
    run(config(OU_SIMULATION, Command::Simulate, &b)).unwrap();
    assert_eq!(outputs(&a), outputs(&b));
    assert!(String::from_utf8(read(&a, "results.csv"))
        .unwrap()
        .starts_with("t,r,sigma2\n"));
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let text = format!("{OU_SIMULATION}[estimate]\nestimator = \"kf2\"\n");
    run(config(&text, Command::Estimate, &first)).unwrap();
    let manifest = String::from_utf8(read(&first, MANIFEST_FILE)).unwrap();
    for key in [
        "# version = ",
        "# rng = ",
        "# seed = ",
        "# config_sha256 = ",
        "multistarts = 5",
        "estimator = \"kf2\"",
    ] {
        assert!(manifest.contains(key), "manifest lacks {key}");
    }
    let second = tmp.path().join("second");
    let flags = Overrides {
        config: Some(first.join(MANIFEST_FILE)),
        out: Some(second.clone()),
        ..Overrides::default()
    };
    run(build_config(Command::Estimate, &flags).unwrap()).unwrap();
    assert_eq!(outputs(&first), outputs(&second));
    let hash = |m: &str| {
        m.lines()
            .find(|l| l.starts_with("# config_sha256"))
            .unwrap()
            .to_string()
    };
    assert_eq!(
        hash(&manifest),
        hash(&String::from_utf8(read(&second, MANIFEST_FILE)).unwrap())
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let gof = "[model]\nfamily = \"ou_sv\"\n[simulation]\nn = 150\nburn_in = 100\n[test]\nkind = \"drift\"\nbootstrap = 100\n";
    let study = "[model]\nfamily = \"ou_sv\"\n[simulation]\nburn_in = 100\n[test]\nkind = \"drift\"\nbootstrap = 100\n\
                 [study]\nreplicates = 4\nsizes = [120]\n";
    for (text, command) in [(gof, Command::Gof), (study, Command::McStudy)] {
        let mut dirs = Vec::new();
        for workers in [1, 3] {
            let dir = tmp.path().join(format!("{}-{workers}", command.name()));
            let mut cfg = config(text, command, &dir);
            cfg.workers = workers;
            run(cfg).unwrap();
            dirs.push(dir);
        }
        assert_eq!(outputs(&dirs[0]), outputs(&dirs[1]), "{}", command.name());
    }
}

#[test]
fn exported_path_reingests_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim");
    run(config(OU_SIMULATION, Command::Simulate, &out)).unwrap();
    let path = ingest_csv(&out.join("results.csv"), &IngestOptions::default()).unwrap();
    assert_eq!(path.r.len(), 401);
    assert_eq!(path.delta, 1.0 / 52.0);

    let text = format!(
        "[model]\nfamily = \"ou_sv\"\n[data]\ncsv = \"{}\"\n",
        out.join("results.csv").display()
    );
    let estimate = tmp.path().join("est");
    run(config(&text, Command::Estimate, &estimate)).unwrap();
    let simulated = tmp.path().join("est-sim");
    run(config(OU_SIMULATION, Command::Estimate, &simulated)).unwrap();
    assert_eq!(
        read(&estimate, "results.csv"),
        read(&simulated, "results.csv")
    );
}

#[test]
fn level_effect_estimate_reports_gamma() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nfamily = \"ckls_sv\"\n[simulation]\nn = 300\n[estimate]\nstandard_errors = false\n";
    let out = tmp.path().join("ckls");
    run(config(text, Command::Estimate, &out)).unwrap();
    let report = String::from_utf8(read(&out, "report.txt")).unwrap();
    assert!(report.contains("theta_hat.gamma="), "{report}");
    let band = String::from_utf8(read(&out, "plotdata_volatility.csv")).unwrap();
    assert!(band.starts_with("i,t,h_filt,lower,upper\n"));
    assert_eq!(band.lines().count(), 301);
}

#[test]
fn binary_exits_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("dup.csv");
    fs::write(&csv, "t,r\n0,0.01\n1,0.02\n1,0.03\n").unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[data]\ncsv = \"dup.csv\"\n").unwrap();
    let output = Process::new(env!("CARGO_BIN_EXE_svdiff"))
        .args([
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            tmp.path().join("o").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(
        stderr.contains("dup.csv:4") && stderr.contains("duplicated"),
        "{stderr}"
    );

    let output = Process::new(env!("CARGO_BIN_EXE_svdiff"))
        .args(["gof", "--out", tmp.path().join("g").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
}

#[test]
fn binary_runs_simulate_with_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.toml");
    fs::write(&cfg, OU_SIMULATION).unwrap();
    let mut dirs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "2")] {
        let dir = tmp.path().join(name);
        let output = Process::new(env!("CARGO_BIN_EXE_svdiff"))
            .args([
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                "9",
                "--workers",
                workers,
                "--out",
                dir.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert!(output.status.success());
        dirs.push(dir);
    }
    assert_eq!(outputs(&dirs[0]), outputs(&dirs[1]));
    assert!(String::from_utf8(read(&dirs[0], MANIFEST_FILE))
        .unwrap()
        .contains("seed = 9\n"));
}
