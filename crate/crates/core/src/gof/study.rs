//! Monte Carlo size and power of the bootstrap tests.

use std::io::Write;

use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamVector};
use crate::rng::derive_seed;
use crate::simulate::{simulate_path, SimConfig};
use crate::statespace::LevelExponent;

use super::procedure::{gof_test, GofConfig, TestKind, MIN_OBSERVATIONS};
use super::process::{EvalMode, Functional};

/// One data-generating process tested against a null family.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDesign {
    pub label: String,
    pub dgp: ModelSpec,
    pub theta: ParamVector,
    pub null: ModelSpec,
    /// Level-exponent treatment under the null; `None` profiles it when the null has a level effect.
    pub null_level: Option<LevelExponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStudy {
    pub kind: TestKind,
    pub designs: Vec<StudyDesign>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub bootstrap: usize,
    pub level: f64,
    pub functionals: Vec<Functional>,
    pub delta: f64,
    pub burn_in: usize,
    pub eval_mode: EvalMode,
}

impl McStudy {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.designs.is_empty() || self.sizes.is_empty() {
            return Err(Error::Config(
                "a study needs at least one design and one sample size".into(),
            ));
        }
        if let Some(n) = self.sizes.iter().find(|n| **n < MIN_OBSERVATIONS) {
            return Err(Error::Config(format!(
                "sample size {n} is below {MIN_OBSERVATIONS}"
            )));
        }
        for d in &self.designs {
            d.theta.validate(&d.dgp)?;
        }
        self.gof_config(&self.designs[0], 0).validate()
    }

    fn gof_config(&self, design: &StudyDesign, seed: u64) -> GofConfig {
        let mut cfg = GofConfig::new(self.kind, &design.null, self.bootstrap, self.level, seed);
        cfg.functionals.clone_from(&self.functionals);
        cfg.eval_mode = self.eval_mode;
        if let Some(level) = design.null_level {
            cfg.mle.level = level;
        }
        cfg
    }
}

/// Rejection count for one (design, n, functional).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyCell {
    pub design: usize,
    pub n: usize,
    pub functional: Functional,
    pub rejections: usize,
    /// Replicates whose test completed.
    pub completed: usize,
    /// Replicates whose simulation or null fit failed.
    pub failed: usize,
}

impl StudyCell {
    pub fn rate(&self) -> f64 {
        if self.completed == 0 {
            f64::NAN
        } else {
            self.rejections as f64 / self.completed as f64
        }
    }

    /// Binomial standard error of the rate.
    pub fn std_error(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.completed as f64).sqrt()
    }

    /// Exact (Clopper-Pearson) interval for the rejection probability.
    pub fn exact_interval(&self, confidence: f64) -> (f64, f64) {
        clopper_pearson(self.rejections, self.completed, confidence)
    }
}

/// Exact binomial confidence interval for `successes` out of `trials`.
pub fn clopper_pearson(successes: usize, trials: usize, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let tail = 0.5 * (1.0 - confidence);
    let (x, n) = (successes as f64, trials as f64);
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(x, n - x + 1.0)
            .expect("positive shapes")
            .inverse_cdf(tail)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(x + 1.0, n - x)
            .expect("positive shapes")
            .inverse_cdf(1.0 - tail)
    };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub kind: TestKind,
    pub labels: Vec<String>,
    pub sizes: Vec<usize>,
    pub functionals: Vec<Functional>,
    pub cells: Vec<StudyCell>,
}

impl StudyTable {
    pub fn cell(&self, design: usize, n: usize, functional: Functional) -> Option<&StudyCell> {
        self.cells
            .iter()
            .find(|c| c.design == design && c.n == n && c.functional == functional)
    }

    /// One row per design; columns are rates then standard errors per functional and size.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["dgp".to_string()];
        for f in &self.functionals {
            for n in &self.sizes {
                header.push(format!("{}_n{n}", f.name()));
            }
        }
        for f in &self.functionals {
            for n in &self.sizes {
                header.push(format!("{}_n{n}_se", f.name()));
            }
        }
        writeln!(out, "{}", header.join(","))?;
        for (d, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            let cells = || {
                self.functionals
                    .iter()
                    .flat_map(move |f| self.sizes.iter().map(move |n| self.cell(d, *n, *f)))
            };
            row.extend(cells().map(|c| c.map_or("NA".into(), |c| format!("{:.4}", c.rate()))));
            row.extend(cells().map(|c| c.map_or("NA".into(), |c| format!("{:.4}", c.std_error()))));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn report(&self) -> String {
        let mut out = format!("test={}\n", self.kind.name());
        for c in &self.cells {
            let (lo, hi) = c.exact_interval(0.95);
            out += &format!(
                "{}.n{}.{}: rate={:.4} se={:.4} ci95=[{:.4},{:.4}] rejections={} completed={} failed={}\n",
                self.labels[c.design],
                c.n,
                c.functional.name(),
                c.rate(),
                c.std_error(),
                lo,
                hi,
                c.rejections,
                c.completed,
                c.failed
            );
        }
        out
    }
}

enum ReplicateOutcome {
    Rejections(Vec<bool>),
    Failed,
}

/// Simulates each design at each size and records how often each functional rejects.
///
/// Replicate `(d, k, rep)` draws its path and bootstrap from seeds derived from
/// `(seed, d, k, rep)`, so the table does not depend on scheduling.
pub fn mc_study(study: &McStudy, seed: u64) -> Result<StudyTable> {
    study.validate()?;
    let jobs: Vec<(usize, usize, usize)> = (0..study.designs.len())
        .flat_map(|d| {
            (0..study.sizes.len())
                .flat_map(move |k| (0..study.replicates).map(move |rep| (d, k, rep)))
        })
        .collect();
    let outcomes: Vec<Result<ReplicateOutcome>> = jobs
        .par_iter()
        .map(|&(d, k, rep)| {
            let design = &study.designs[d];
            let rep_seed = derive_seed(seed, &[d as u64, k as u64, rep as u64]);
            let sim = SimConfig::new(study.sizes[k], study.delta, derive_seed(rep_seed, &[0]))
                .with_burn_in(study.burn_in);
            let path = match simulate_path(&design.dgp, &design.theta, &sim) {
                Ok(p) => p,
                Err(Error::Config(msg)) => return Err(Error::Config(msg)),
                Err(_) => return Ok(ReplicateOutcome::Failed),
            };
            let cfg = study.gof_config(design, derive_seed(rep_seed, &[1]));
            match gof_test(&path, &design.null, &cfg) {
                Ok(report) => Ok(ReplicateOutcome::Rejections(
                    report.results.iter().map(|r| r.reject).collect(),
                )),
                Err(Error::Config(msg)) => Err(Error::Config(msg)),
                Err(_) => Ok(ReplicateOutcome::Failed),
            }
        })
        .collect();

    let mut cells = Vec::new();
    for d in 0..study.designs.len() {
        for (k, &n) in study.sizes.iter().enumerate() {
            for (fi, functional) in study.functionals.iter().enumerate() {
                cells.push(StudyCell {
                    design: d,
                    n,
                    functional: *functional,
                    rejections: 0,
                    completed: 0,
                    failed: 0,
                });
                let cell = cells.last_mut().expect("just pushed");
                for (job, outcome) in jobs.iter().zip(&outcomes) {
                    if job.0 != d || job.1 != k {
                        continue;
                    }
                    match outcome {
                        Ok(ReplicateOutcome::Rejections(r)) => {
                            cell.completed += 1;
                            cell.rejections += r[fi] as usize;
                        }
                        Ok(ReplicateOutcome::Failed) => cell.failed += 1,
                        Err(e) => return Err(Error::Config(e.to_string())),
                    }
                }
            }
        }
    }
    Ok(StudyTable {
        kind: study.kind,
        labels: study.designs.iter().map(|d| d.label.clone()).collect(),
        sizes: study.sizes.clone(),
        functionals: study.functionals.clone(),
        cells,
    })
}
