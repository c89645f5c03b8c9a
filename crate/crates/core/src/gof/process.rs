//! Residual-marked empirical processes and their KS/CvM functionals.

use crate::error::{Error, Result};

/// Covariates indexing the process: the lagged level, optionally paired with a volatility estimate.
#[derive(Debug, Clone, Copy)]
pub enum Coordinates<'a> {
    Level(&'a [f64]),
    LevelVolatility(&'a [f64], &'a [f64]),
}

impl Coordinates<'_> {
    fn len(&self) -> usize {
        match self {
            Self::Level(r) => r.len(),
            Self::LevelVolatility(r, _) => r.len(),
        }
    }
}

/// Where the supremum of the process is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// The observed coordinate points.
    #[default]
    Observed,
    /// Every point of the observed-level by observed-volatility product grid.
    ExactGrid,
}

/// Process values at the observed points, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedProcessEval {
    /// `R_n` at each observation's own coordinates.
    pub values: Vec<f64>,
    /// `max |R_n|` over the product grid, in exact-grid mode.
    pub grid_sup: Option<f64>,
    /// `R_n` at the componentwise maximum: the scaled sum of all marks.
    pub endpoint: f64,
}

impl MarkedProcessEval {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Functional {
    Ks,
    Cvm,
}

impl Functional {
    pub const ALL: [Functional; 2] = [Functional::Ks, Functional::Cvm];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Ks => "ks",
            Self::Cvm => "cvm",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "ks" => Ok(Self::Ks),
            "cvm" => Ok(Self::Cvm),
            other => Err(Error::Config(format!(
                "unknown functional `{other}`, expected ks or cvm"
            ))),
        }
    }

    pub fn apply(&self, eval: &MarkedProcessEval) -> f64 {
        match self {
            Self::Ks => ks_statistic(eval),
            Self::Cvm => cvm_statistic(eval),
        }
    }
}

/// Dense ranks of `values` among their sorted distinct values.
fn dense_ranks(values: &[f64]) -> (Vec<usize>, usize) {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let ranks = values
        .iter()
        .map(|v| sorted.partition_point(|s| s < v))
        .collect();
    (ranks, sorted.len())
}

/// Indices sorted by `key`, grouped into runs of equal keys.
fn tie_groups(key: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..key.len()).collect();
    order.sort_by(|a, b| key[*a].total_cmp(&key[*b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in order {
        match groups.last_mut() {
            Some(g) if key[g[0]] == key[idx] => g.push(idx),
            _ => groups.push(vec![idx]),
        }
    }
    groups
}

struct Fenwick(Vec<f64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0.0; n + 1])
    }

    fn add(&mut self, pos: usize, v: f64) {
        let mut i = pos + 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..=pos`.
    fn prefix(&self, pos: usize) -> f64 {
        let mut i = pos + 1;
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// `R_n(point) = n^{-1/2} sum_j marks_j 1{coords_j <= point}` with ties included.
pub fn process_eval(
    marks: &[f64],
    coords: Coordinates<'_>,
    mode: EvalMode,
) -> Result<MarkedProcessEval> {
    let n = marks.len();
    if n == 0 {
        return Err(Error::Length("no marks".into()));
    }
    if coords.len() != n {
        return Err(Error::Length(format!(
            "{} coordinates for {n} marks",
            coords.len()
        )));
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    let coords_ok = match coords {
        Coordinates::Level(r) => finite(r),
        Coordinates::LevelVolatility(r, x) => x.len() == n && finite(r) && finite(x),
    };
    if !coords_ok {
        return Err(Error::domain(
            "coordinates",
            "must be finite and of equal length",
        ));
    }
    if !finite(marks) {
        return Err(Error::domain("marks", "must be finite"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut values = vec![0.0; n];
    let mut grid_sup = None;
    match coords {
        Coordinates::Level(r) => {
            let mut running = 0.0;
            for group in tie_groups(r) {
                running += group.iter().map(|i| marks[*i]).sum::<f64>();
                group.iter().for_each(|i| values[*i] = running * scale);
            }
            if mode == EvalMode::ExactGrid {
                grid_sup = Some(values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
            }
        }
        Coordinates::LevelVolatility(r, x) => {
            let (x_rank, width) = dense_ranks(x);
            let groups = tie_groups(r);
            let mut tree = Fenwick::new(width);
            for group in &groups {
                group.iter().for_each(|i| tree.add(x_rank[*i], marks[*i]));
                group
                    .iter()
                    .for_each(|i| values[*i] = tree.prefix(x_rank[*i]) * scale);
            }
            if mode == EvalMode::ExactGrid {
                let mut column = vec![0.0; width];
                let mut sup = 0.0_f64;
                for group in &groups {
                    group.iter().for_each(|i| column[x_rank[*i]] += marks[*i]);
                    let mut acc = 0.0;
                    for c in &column {
                        acc += c;
                        sup = sup.max((acc * scale).abs());
                    }
                }
                grid_sup = Some(sup);
            }
        }
    }
    Ok(MarkedProcessEval {
        values,
        grid_sup,
        endpoint: marks.iter().sum::<f64>() * scale,
    })
}

/// `max |R_n|` over the evaluation set.
pub fn ks_statistic(eval: &MarkedProcessEval) -> f64 {
    let observed = eval.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    eval.grid_sup.map_or(observed, |g| g.max(observed))
}

/// Mean of `R_n^2` over the observed points, summed in ascending order so the
/// result does not depend on the order of the observations.
pub fn cvm_statistic(eval: &MarkedProcessEval) -> f64 {
    let mut squares: Vec<f64> = eval.values.iter().map(|v| v * v).collect();
    squares.sort_by(f64::total_cmp);
    squares.iter().sum::<f64>() / squares.len() as f64
}
