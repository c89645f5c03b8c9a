//! CSV ingestion of observed series.
//!
//! Two layouts are accepted: `t,r[,sigma2]` with numeric times (the layout
//! written by [`Path::write_csv`]) and `date,rate` with ISO dates.

use std::path::{Path as FsPath, PathBuf};

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::simulate::Path;

use super::config::{Calendar, StepSize, DAILY_DELTA, WEEKLY_DELTA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub delta: StepSize,
    /// Largest spacing of a `t,r` file relative to its first spacing.
    pub max_gap_steps: f64,
    /// Largest calendar gap of a `date,rate` file.
    pub max_gap_days: i64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delta: StepSize::Calendar(Calendar::Auto),
            max_gap_steps: 1.5,
            max_gap_days: 5,
        }
    }
}

enum Layout {
    Times { with_sigma2: bool },
    Dates,
}

/// Reads `path` into an equispaced [`Path`].
pub fn ingest_csv(path: &FsPath, opts: &IngestOptions) -> Result<Path> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, path, opts)
}

/// Parses CSV text; `origin` only labels errors.
pub fn parse_csv(text: &str, origin: &FsPath, opts: &IngestOptions) -> Result<Path> {
    let fail = |line: usize, reason: String| Error::Parse {
        path: PathBuf::from(origin),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or_else(|| fail(1, "empty file".into()))?;
    let columns: Vec<String> = header
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    let layout = match columns
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>()
        .as_slice()
    {
        ["t", "r"] => Layout::Times { with_sigma2: false },
        ["t", "r", "sigma2"] => Layout::Times { with_sigma2: true },
        ["date", "rate"] => Layout::Dates,
        _ => {
            return Err(fail(
                header_line,
                format!("expected header `t,r`, `t,r,sigma2` or `date,rate`, got `{header}`"),
            ))
        }
    };
    let width = columns.len();

    let mut r = Vec::new();
    let mut sigma2 = Vec::new();
    let mut times = Vec::new();
    let mut dates: Vec<NaiveDate> = Vec::new();
    let number = |line: usize, field: &str, name: &str| -> Result<f64> {
        let v: f64 = field.trim().parse().map_err(|_| {
            fail(
                line,
                format!("`{field}` is not a number in column `{name}`"),
            )
        })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fail(line, format!("non-finite value in column `{name}`")))
        }
    };
    for (line, row) in lines {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != width {
            return Err(fail(
                line,
                format!("expected {width} fields, got {}", fields.len()),
            ));
        }
        match layout {
            Layout::Times { with_sigma2 } => {
                let t = number(line, fields[0], "t")?;
                if let Some(&prev) = times.last() {
                    check_order(t, prev).map_err(|reason| fail(line, reason))?;
                    if times.len() >= 2 {
                        let first = times[1] - times[0];
                        if t - prev > opts.max_gap_steps * first {
                            return Err(fail(
                                line,
                                format!(
                                    "gap of {} exceeds {} times the first spacing {first}",
                                    t - prev,
                                    opts.max_gap_steps
                                ),
                            ));
                        }
                    }
                }
                times.push(t);
                r.push(number(line, fields[1], "r")?);
                if with_sigma2 {
                    sigma2.push(number(line, fields[2], "sigma2")?);
                }
            }
            Layout::Dates => {
                let d = NaiveDate::parse_from_str(fields[0].trim(), "%Y-%m-%d").map_err(|e| {
                    fail(
                        line,
                        format!("`{}` is not a YYYY-MM-DD date: {e}", fields[0].trim()),
                    )
                })?;
                if let Some(&prev) = dates.last() {
                    let gap = (d - prev).num_days();
                    if gap == 0 {
                        return Err(fail(line, format!("duplicated timestamp {d}")));
                    }
                    if gap < 0 {
                        return Err(fail(line, format!("time goes backwards: {d} after {prev}")));
                    }
                    if gap > opts.max_gap_days {
                        return Err(fail(
                            line,
                            format!(
                                "gap of {gap} days exceeds the tolerance of {} days",
                                opts.max_gap_days
                            ),
                        ));
                    }
                }
                dates.push(d);
                r.push(number(line, fields[1], "rate")?);
            }
        }
    }
    if r.len() < 2 {
        return Err(fail(
            header_line,
            format!("need at least 2 observations, got {}", r.len()),
        ));
    }

    let delta = match (layout, opts.delta.years()) {
        (_, Some(d)) => d,
        (Layout::Times { .. }, None) => times[1] - times[0],
        (Layout::Dates, None) => DAILY_DELTA,
    };
    let mut out = Path::from_observations(r, delta)?;
    if !sigma2.is_empty() {
        out.sigma2 = Some(sigma2);
    }
    Ok(out)
}

fn check_order(t: f64, prev: f64) -> std::result::Result<(), String> {
    if t == prev {
        Err(format!("duplicated timestamp {t}"))
    } else if t < prev {
        Err(format!("time goes backwards: {t} after {prev}"))
    } else {
        Ok(())
    }
}

/// The named step for a calendar convention, for reports.
pub fn convention_name(delta: f64) -> &'static str {
    if delta == DAILY_DELTA {
        "daily"
    } else if delta == WEEKLY_DELTA {
        "weekly"
    } else {
        "explicit"
    }
}
