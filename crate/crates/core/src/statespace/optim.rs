//! Derivative-free minimisation and finite-difference curvature.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Simplex diameter tolerance in the search coordinates.
    pub xtol: f64,
    /// Spread of objective values across the simplex.
    pub ftol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            xtol: 1e-8,
            ftol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimises `f` from `x0` with initial simplex offsets `step`.
///
/// Non-finite objective values are treated as `+inf`, so infeasible regions
/// can be signalled by returning `NaN` or `inf`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: &[f64],
    opts: NelderMeadOptions,
) -> Minimum {
    let dim = x0.len();
    let mut evaluations = 0;
    if dim == 0 {
        let value = f(x0);
        return Minimum {
            x: vec![],
            value,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for k in 0..dim {
        let mut v = x0.to_vec();
        v[k] += if step[k] != 0.0 { step[k] } else { 0.05 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iter {
        order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
        let (best, worst, second) = (order[0], order[dim], order[dim - 1]);

        let spread_x = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let spread_f = values
            .iter()
            .map(|v| (v - values[best]).abs())
            .fold(0.0, f64::max);
        if spread_x <= opts.xtol && spread_f <= opts.ftol {
            converged = true;
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += x / dim as f64;
            }
        }
        let along = |coef: f64, out: &mut Vec<f64>, worst_pt: &[f64]| {
            for k in 0..dim {
                out[k] = centroid[k] + coef * (worst_pt[k] - centroid[k]);
            }
        };

        along(-alpha, &mut trial, &simplex[worst]);
        let f_reflect = eval(&trial);
        if f_reflect < values[best] {
            along(-alpha * gamma, &mut trial2, &simplex[worst]);
            let f_expand = eval(&trial2);
            if f_expand < f_reflect {
                simplex[worst].copy_from_slice(&trial2);
                values[worst] = f_expand;
            } else {
                simplex[worst].copy_from_slice(&trial);
                values[worst] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[second] {
            simplex[worst].copy_from_slice(&trial);
            values[worst] = f_reflect;
            continue;
        }
        let outside = f_reflect < values[worst];
        along(
            if outside { -alpha * rho } else { rho },
            &mut trial2,
            &simplex[worst],
        );
        let f_contract = eval(&trial2);
        if f_contract < if outside { f_reflect } else { values[worst] } {
            simplex[worst].copy_from_slice(&trial2);
            values[worst] = f_contract;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for k in 0..dim {
                simplex[idx][k] = anchor[k] + sigma * (simplex[idx][k] - anchor[k]);
            }
            values[idx] = eval(&simplex[idx]);
        }
    }

    let best = (0..=dim)
        .min_by(|a, b| values[*a].total_cmp(&values[*b]))
        .unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}

/// Central-difference Hessian of `f` at `x` with uniform step `h`.
pub fn hessian<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> DMatrix<f64> {
    let dim = x.len();
    let mut out = DMatrix::zeros(dim, dim);
    let f0 = f(x);
    let mut at = x.to_vec();
    for i in 0..dim {
        at[i] = x[i] + h;
        let fp = f(&at);
        at[i] = x[i] - h;
        let fm = f(&at);
        at[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                at[i] = x[i] + si * h;
                at[j] = x[j] + sj * h;
                let v = f(&at);
                at[i] = x[i];
                at[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}
